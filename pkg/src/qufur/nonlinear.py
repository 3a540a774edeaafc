"""Active regression over finite hypothesis classes.

Hypotheses are rows of a value table over a finite input support. Each round
the policy predicts with the empirical risk minimizer on queried labels,
builds a confidence set around it with a concentration threshold, and queries
with probability proportional to the squared disagreement width of that set
at the current input. Brute-force combinatorial diagnostics (eluder dimension,
sup-norm covering numbers) double as test oracles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError
from .policy import (
    CopyState,
    PolicyConfig,
    RoundDecision,
    alpha_grid,
    clip,
    per_copy_budget,
)
from .rng import EpisodeRng

# Guards for the exhaustive eluder search.
ELUDER_MAX_SUPPORT = 8
ELUDER_MAX_HYPOTHESES = 64


@dataclass
class HypothesisTable:
    """Finite hypothesis class: values[f][j] = f(support[j]), all in [-1, 1].

    ``truth_index`` is environment-side knowledge; policies never read it.
    """

    support: list
    values: np.ndarray
    truth_index: int | None = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-d table")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError("table needs at least one hypothesis and one input")
        if self.values.shape[1] != len(self.support):
            raise ValueError("values width must match support size")
        if np.any(np.abs(self.values) > 1.0 + 1e-12):
            raise ValueError("hypothesis values must lie in [-1, 1]")
        if self.truth_index is not None and not 0 <= self.truth_index < self.values.shape[0]:
            raise ValueError(f"truth_index {self.truth_index} out of range")
        self._index = {x: j for j, x in enumerate(self.support)}

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def column(self, x_id) -> int:
        try:
            return self._index[x_id]
        except KeyError:
            raise ValueError(f"unknown input identifier {x_id!r}") from None


def load_table(path) -> HypothesisTable:
    """Read a table from JSON: {"support": [...], "values": [[...]], "truth_index": n}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("support", "values"):
        if key not in doc:
            raise ValueError(f"hypothesis table JSON missing key {key!r}")
    return HypothesisTable(
        support=list(doc["support"]),
        values=np.asarray(doc["values"], dtype=np.float64),
        truth_index=doc.get("truth_index"),
    )


@dataclass
class ConfidenceSet:
    """Hypotheses within squared distance ``threshold`` of the center on queried inputs."""

    member_indices: np.ndarray
    center_index: int
    threshold: float


def erm(table: HypothesisTable, labeled: list[tuple]) -> int:
    """Index of the squared-loss minimizer over labeled pairs; ties pick the lowest."""
    if table.size < 1:
        raise ValueError("empty hypothesis table")
    if not labeled:
        return 0
    cols = [table.column(x) for x, _ in labeled]
    ys = np.array([float(y) for _, y in labeled])
    losses = ((table.values[:, cols] - ys[None, :]) ** 2).sum(axis=1)
    return int(np.argmin(losses))


def beta_threshold(k: int, T: int, eta: float, delta: float, cover_size: int) -> float:
    """Confidence radius after k queries at horizon T.

    Natural logarithms throughout; the k-dependent correction vanishes at
    k = 0 and both terms vanish with zero noise when nothing is queried.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if T < 1:
        raise ValueError(f"T must be positive, got {T}")
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if cover_size < 1:
        raise ValueError(f"cover_size must be positive, got {cover_size}")
    first = 8.0 * eta**2 * math.log(4.0 * cover_size / delta)
    if k == 0:
        return first
    second = (2.0 * k / T**2) * (16.0 + math.sqrt(2.0 * eta**2 * math.log(16.0 * k**2 / delta)))
    return first + second


def confidence_set(table: HypothesisTable, center: int, labeled: list[tuple],
                   threshold: float) -> ConfidenceSet:
    """All hypotheses whose squared gap to the center over labeled inputs is <= threshold."""
    if not 0 <= center < table.size:
        raise ValueError(f"center index {center} out of range")
    if labeled:
        cols = [table.column(x) for x, _ in labeled]
        gaps = table.values[:, cols] - table.values[center, cols][None, :]
        dist = (gaps**2).sum(axis=1)
    else:
        dist = np.zeros(table.size)
    members = np.flatnonzero(dist <= threshold)
    return ConfidenceSet(member_indices=members, center_index=center, threshold=float(threshold))


def disagreement(table: HypothesisTable, cset: ConfidenceSet, x_id) -> float:
    """Squared width of the confidence set at one input: (max f(x) - min f(x))^2."""
    if len(cset.member_indices) == 0:
        raise RuntimeError("confidence set is empty")
    col = table.column(x_id)
    vals = table.values[cset.member_indices, col]
    return float((vals.max() - vals.min()) ** 2)


def covering_number(table: HypothesisTable, epsilon: float) -> int:
    """Size of a greedy sup-norm epsilon-cover (an upper bound on the minimum)."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n = table.size
    uncovered = np.ones(n, dtype=bool)
    centers = 0
    while uncovered.any():
        c = int(np.flatnonzero(uncovered)[0])
        dist = np.abs(table.values - table.values[c][None, :]).max(axis=1)
        uncovered &= dist > epsilon
        centers += 1
    return centers


def nonlinear_qufur_step(table: HypothesisTable, labeled: list[tuple], cfg: PolicyConfig,
                         x_id, rng: EpisodeRng, cover_size: int | None = None) -> RoundDecision:
    """One round over a finite class: ERM prediction, disagreement-driven query."""
    center = erm(table, labeled)
    if cover_size is None:
        cover_size = covering_number(table, 1.0 / cfg.horizon**2)
    beta = beta_threshold(len(labeled), cfg.horizon, cfg.noise_level, cfg.delta, cover_size)
    cset = confidence_set(table, center, labeled, beta)
    delta = disagreement(table, cset, x_id)
    pred = clip(table.values[center, table.column(x_id)])
    if cfg.budget is not None and len(labeled) >= cfg.budget:
        return RoundDecision(pred, delta, 0.0, False)
    p = min(1.0, cfg.alpha * delta)
    return RoundDecision(pred, delta, p, rng.uniform() < p)


@dataclass
class NonlinearMasterState:
    copies: list[CopyState]
    per_copy_budget: int
    budget: int
    total_spent: int = 0
    round_index: int = 0


def nonlinear_copy_count(horizon: int) -> int:
    """Copies k + 1 with k = 3 * ceil(log2(T)) for the general-class master."""
    return 3 * int(math.ceil(math.log2(horizon))) + 1 if horizon > 1 else 1


def init_nonlinear_master(cfg: PolicyConfig) -> NonlinearMasterState:
    if cfg.budget is None:
        raise ValueError("fixed-budget master requires a budget")
    n = nonlinear_copy_count(cfg.horizon)
    return NonlinearMasterState(
        copies=[CopyState(alpha=a) for a in alpha_grid(cfg.horizon, n)],
        per_copy_budget=per_copy_budget(cfg.budget, n),
        budget=cfg.budget,
    )


def nonlinear_master_step(master: NonlinearMasterState, table: HypothesisTable,
                          labeled: list[tuple], cfg: PolicyConfig, x_id, rng: EpisodeRng,
                          cover_size: int | None = None) -> RoundDecision:
    """Multi-copy master round with disagreement as the shared uncertainty."""
    t = master.round_index
    master.round_index += 1
    center = erm(table, labeled)
    if cover_size is None:
        cover_size = covering_number(table, 1.0 / cfg.horizon**2)
    beta = beta_threshold(len(labeled), cfg.horizon, cfg.noise_level, cfg.delta, cover_size)
    cset = confidence_set(table, center, labeled, beta)
    delta = disagreement(table, cset, x_id)
    pred = clip(table.values[center, table.column(x_id)])
    if master.total_spent >= master.budget:
        return RoundDecision(pred, delta, 0.0, False)
    charge_target = None
    fired = False
    prob_none = 1.0
    for i, copy in enumerate(master.copies):  # ladder drained bottom-up
        if copy.spent >= master.per_copy_budget:
            continue
        if charge_target is None:
            charge_target = copy
        p_i = min(1.0, copy.alpha * delta)
        prob_none *= 1.0 - p_i
        if not fired and rng.keyed_uniform(t, i) < p_i:
            fired = True
    if fired:
        charge_target.spent += 1
    return RoundDecision(pred, delta, 1.0 - prob_none, fired)


class NonlinearQufurPolicy:
    """Episode wrapper for the finite-class policy (alpha-parameterized)."""

    name = "nonlinear"

    def __init__(self, cfg: PolicyConfig, table: HypothesisTable):
        self.cfg = cfg
        self.table = table
        self.cover_size = covering_number(table, 1.0 / cfg.horizon**2)
        self.labeled: list[tuple] = []
        self.rng: EpisodeRng | None = None

    def begin(self, rng: EpisodeRng) -> None:
        self.labeled = []
        self.rng = rng

    def decide(self, t: int, x_id) -> RoundDecision:
        return nonlinear_qufur_step(
            self.table, self.labeled, self.cfg, x_id, self.rng, cover_size=self.cover_size
        )

    def observe(self, t: int, x_id, y: float) -> None:
        self.labeled.append((x_id, float(y)))


class NonlinearMasterPolicy:
    """Episode wrapper for the finite-class fixed-budget master."""

    name = "nonlinear"

    def __init__(self, cfg: PolicyConfig, table: HypothesisTable):
        self.cfg = cfg
        self.table = table
        self.cover_size = covering_number(table, 1.0 / cfg.horizon**2)
        self.labeled: list[tuple] = []
        self.master = init_nonlinear_master(cfg)
        self.rng: EpisodeRng | None = None

    def begin(self, rng: EpisodeRng) -> None:
        self.labeled = []
        self.master = init_nonlinear_master(self.cfg)
        self.rng = rng

    def decide(self, t: int, x_id) -> RoundDecision:
        return nonlinear_master_step(
            self.master, self.table, self.labeled, self.cfg, x_id, self.rng,
            cover_size=self.cover_size,
        )

    def observe(self, t: int, x_id, y: float) -> None:
        self.labeled.append((x_id, float(y)))
        self.master.total_spent += 1


# ---------------------------------------------------------------------------
# Brute-force combinatorial diagnostics


def eluder_dimension(table: HypothesisTable, support_subset: list, epsilon: float) -> int:
    """Length of the longest sequence whose every element is eps'-independent
    of its predecessors, for the best eps' > epsilon.

    An element x is eps'-independent of a multiset of predecessors when some
    hypothesis pair stays within eps' cumulative gap on the predecessors yet
    differs by more than eps' at x. Elements may repeat. Exhaustive search;
    candidate eps' values enumerate the achievable pointwise gaps and the
    midpoints between consecutive ones.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if len(support_subset) > ELUDER_MAX_SUPPORT or table.size > ELUDER_MAX_HYPOTHESES:
        raise ResourceLimitError(
            f"eluder search is limited to {ELUDER_MAX_SUPPORT} inputs and "
            f"{ELUDER_MAX_HYPOTHESES} hypotheses"
        )
    if table.size < 2 or not support_subset:
        return 0
    cols = [table.column(x) for x in support_subset]
    vals = table.values[:, cols]
    n_f, n_x = vals.shape
    pairs = [(f, g) for f in range(n_f) for g in range(f + 1, n_f)]
    gaps = np.abs(np.stack([vals[f] - vals[g] for f, g in pairs]))  # (P, n_x)

    levels = np.unique(gaps)
    candidates = [g for g in levels if g > epsilon]
    candidates += [
        0.5 * (a + b) for a, b in zip(levels[:-1], levels[1:]) if 0.5 * (a + b) > epsilon
    ]
    above = [g for g in levels if g > epsilon]
    if above:
        candidates.append(0.5 * (epsilon + min(above)))

    gaps_sq = gaps**2
    best = 0
    for eps_p in sorted(set(candidates)):
        thr_sq = eps_p**2
        witness_any = gaps > eps_p  # (P, n_x): pair can certify independence at x
        memo: dict[tuple[int, ...], int] = {}

        def longest(counts: tuple[int, ...]) -> int:
            cached = memo.get(counts)
            if cached is not None:
                return cached
            sums = gaps_sq @ np.asarray(counts, dtype=np.float64)  # per-pair prefix mass
            live = sums <= thr_sq
            result = 0
            for j in range(n_x):
                if np.any(live & witness_any[:, j]):
                    nxt = list(counts)
                    nxt[j] += 1
                    result = max(result, 1 + longest(tuple(nxt)))
            memo[counts] = result
            return result

        best = max(best, longest(tuple([0] * n_x)))
    return best
