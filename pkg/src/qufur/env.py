"""Environments: hidden-domain synthetic streams, a Bernoulli adversary with
per-coordinate repeated inputs, replay of exported CSV streams, and streams
over finite hypothesis tables.

All environments are oblivious: the full round list, labels included, is
materialized from (spec, seed) before any policy interaction, so identical
inputs give bit-identical streams and every label exists for loss accounting
even when the policy never queries it.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import StreamParseError
from .nonlinear import HypothesisTable

logger = logging.getLogger(__name__)

ORDERINGS = ("sequential", "interleaved", "shuffled")


@dataclass(frozen=True)
class DomainSpec:
    """Hidden domain layout: one (dimension, duration) entry per domain."""

    entries: tuple
    ordering: str = "sequential"

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((int(d), int(t)) for d, t in self.entries))
        if not self.entries:
            raise ValueError("domain spec needs at least one (d_u, T_u) entry")
        for d_u, t_u in self.entries:
            if d_u < 1:
                raise ValueError(f"domain dimension must be positive, got {d_u}")
            if t_u < d_u:
                raise ValueError(f"domain duration {t_u} must be at least its dimension {d_u}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")

    @property
    def total_rounds(self) -> int:
        return sum(t for _, t in self.entries)

    @property
    def total_dim(self) -> int:
        return sum(d for d, _ in self.entries)


@dataclass
class StreamRound:
    """One materialized round. ``x`` is a unit-capped vector (or an input id
    for table streams); ``true_mean`` and ``y`` are hidden from policies until
    the protocol reveals them."""

    t: int
    x: object
    domain_id: int
    true_mean: float | None
    y: float


@dataclass
class GroundTruth:
    theta_star: np.ndarray | None
    noise_eta: float
    truth_index: int | None = None


def _arrange(per_domain_rounds: list[list], ordering: str, rng) -> list[tuple[int, object]]:
    """Flatten per-domain payloads into stream order, tagging domain ids."""
    tagged = [[(u, item) for item in items] for u, items in enumerate(per_domain_rounds)]
    if ordering == "sequential":
        return [pair for block in tagged for pair in block]
    if ordering == "interleaved":
        out = []
        cursors = [0] * len(tagged)
        remaining = sum(len(b) for b in tagged)
        while remaining:
            for u, block in enumerate(tagged):
                if cursors[u] < len(block):
                    out.append(block[cursors[u]])
                    cursors[u] += 1
                    remaining -= 1
        return out
    flat = [pair for block in tagged for pair in block]
    perm = rng.permutation(len(flat))
    return [flat[i] for i in perm]


def synthetic_stream(spec: DomainSpec, ambient_d: int, eta: float, seed: int):
    """Unit-norm inputs from mutually orthogonal per-domain subspaces.

    Domain u owns a block of ``d_u`` coordinates rotated by a seeded
    orthogonal matrix; inputs are uniform on the unit sphere of that subspace.
    The shared linear truth is uniform on the ambient unit sphere and labels
    carry Gaussian noise of scale eta.
    """
    if spec.total_dim > ambient_d:
        raise ValueError(
            f"domain dimensions sum to {spec.total_dim}, exceeding ambient dimension {ambient_d}"
        )
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=ambient_d)
    theta /= np.linalg.norm(theta)

    per_domain: list[list[np.ndarray]] = []
    offset = 0
    for d_u, t_u in spec.entries:
        q, _ = np.linalg.qr(rng.normal(size=(d_u, d_u)))
        z = rng.normal(size=(t_u, d_u))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        block = z @ q.T
        xs = np.zeros((t_u, ambient_d))
        xs[:, offset:offset + d_u] = block
        per_domain.append(list(xs))
        offset += d_u

    arranged = _arrange(per_domain, spec.ordering, rng)
    noise = rng.normal(size=len(arranged)) * eta
    rounds = []
    for t, (u, x) in enumerate(arranged):
        mean = float(theta @ x)
        rounds.append(StreamRound(t=t, x=x, domain_id=u, true_mean=mean, y=mean + float(noise[t])))
    return GroundTruth(theta_star=theta, noise_eta=float(eta)), rounds


def lower_bound_stream(spec: DomainSpec, seed: int):
    """Adversarial stream: per-domain blocks of repeated standard-basis inputs.

    Domain u's block splits into d_u subblocks of length floor(T_u / d_u),
    the last absorbing the remainder; subblock (u, i) repeats coordinate
    vector number sum(d_v, v < u) + i. Truth coordinates are i.i.d. uniform on
    [0, 1] and labels are Bernoulli with the coordinate as mean, so noise is
    sub-Gaussian with variance proxy 1/4 (policies should use eta = 1 here).
    """
    rng = np.random.default_rng(seed)
    dim = spec.total_dim
    theta = rng.random(dim)

    per_domain: list[list[int]] = []
    offset = 0
    for d_u, t_u in spec.entries:
        base = t_u // d_u
        lengths = [base] * (d_u - 1) + [t_u - base * (d_u - 1)]
        coords = []
        for i, length in enumerate(lengths):
            coords.extend([offset + i] * length)
        per_domain.append(coords)
        offset += d_u

    arranged = _arrange(per_domain, spec.ordering, rng)
    draws = rng.random(len(arranged))
    rounds = []
    for t, (u, coord) in enumerate(arranged):
        x = np.zeros(dim)
        x[coord] = 1.0
        mean = float(theta[coord])
        rounds.append(
            StreamRound(t=t, x=x, domain_id=u, true_mean=mean, y=float(draws[t] < mean))
        )
    return GroundTruth(theta_star=theta, noise_eta=1.0), rounds


def table_stream(table: HypothesisTable, horizon: int, eta: float, seed: int):
    """Stream over a finite support: inputs uniform over the table's support,
    labels are the true hypothesis value plus Gaussian noise of scale eta."""
    if table.truth_index is None:
        raise ValueError("table stream requires a table with truth_index set")
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    rng = np.random.default_rng(seed)
    cols = rng.integers(0, len(table.support), size=horizon)
    noise = rng.normal(size=horizon) * eta
    rounds = []
    for t in range(horizon):
        col = int(cols[t])
        mean = float(table.values[table.truth_index, col])
        rounds.append(
            StreamRound(t=t, x=table.support[col], domain_id=0, true_mean=mean,
                        y=mean + float(noise[t]))
        )
    return GroundTruth(theta_star=None, noise_eta=float(eta), truth_index=table.truth_index), rounds


# ---------------------------------------------------------------------------
# CSV replay

REPLAY_FIXED_COLUMNS = ["t", "domain_id", "true_mean", "y"]
NA_TOKEN = "NA"


def replay_header(dim: int) -> list[str]:
    return REPLAY_FIXED_COLUMNS + [f"x_{j}" for j in range(dim)]


def replay_stream(path):
    """Replay an exported stream; returns (None, rounds) since the generating
    truth is not recoverable from the file.

    Header must be ``t,domain_id,true_mean,y,x_0,...``; ``true_mean`` may be
    the token NA, rows must be sorted by t, and rows with norm above one are
    rescaled to unit norm (counted and logged).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = [line for line in fh if line.strip()]
    lines = [(n + 1, line) for n, line in enumerate(raw) if not line.startswith("#")]
    if not lines:
        raise StreamParseError("line 1: empty stream file")
    header_no, header_line = lines[0]
    header = next(csv.reader([header_line]))
    if header[: len(REPLAY_FIXED_COLUMNS)] != REPLAY_FIXED_COLUMNS:
        raise StreamParseError(
            f"line {header_no}: header must start with {','.join(REPLAY_FIXED_COLUMNS)}"
        )
    dim = len(header) - len(REPLAY_FIXED_COLUMNS)
    if dim < 1 or header != replay_header(dim):
        raise StreamParseError(f"line {header_no}: malformed feature columns in header")

    rounds = []
    rescaled = 0
    prev_t = None
    for line_no, line in lines[1:]:
        cells = next(csv.reader([line]))
        if len(cells) != len(header):
            raise StreamParseError(
                f"line {line_no}: expected {len(header)} fields, got {len(cells)}"
            )
        try:
            t = int(cells[0])
            domain_id = int(cells[1])
            true_mean = None if cells[2] == NA_TOKEN else float(cells[2])
            y = float(cells[3])
            x = np.array([float(c) for c in cells[4:]])
        except ValueError as exc:
            raise StreamParseError(f"line {line_no}: {exc}") from None
        if not np.all(np.isfinite(x)) or not np.isfinite(y):
            raise StreamParseError(f"line {line_no}: non-finite value")
        if prev_t is not None and t <= prev_t:
            raise StreamParseError(f"line {line_no}: rows must be sorted by t")
        prev_t = t
        norm = float(np.linalg.norm(x))
        if norm > 1.0 + 1e-9:
            x = x / norm
            rescaled += 1
        rounds.append(StreamRound(t=t, x=x, domain_id=domain_id, true_mean=true_mean, y=y))
    if rescaled:
        logger.warning("rescaled %d replay rows with norm above one", rescaled)
    return None, rounds


def export_stream(rounds: list[StreamRound], path) -> None:
    """Write rounds in the replay schema, floats as shortest round-trip text."""
    if not rounds:
        raise ValueError("cannot export an empty stream")
    dim = len(np.asarray(rounds[0].x))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(replay_header(dim)) + "\n")
        for r in rounds:
            tm = NA_TOKEN if r.true_mean is None else repr(float(r.true_mean))
            cells = [str(r.t), str(r.domain_id), tm, repr(float(r.y))]
            cells += [repr(float(v)) for v in np.asarray(r.x)]
            fh.write(",".join(cells) + "\n")
