"""Episode runner, metrics, sweep driver, and CSV emission.

The runner enforces the interaction protocol per round: reveal the input,
predict from the pre-round state, record the realized loss, draw the query
decision, and only then reveal the label to the policy if it queried. The
environment owns every label; policies only ever see queried ones.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import env as env_mod
from . import kernel as kernel_mod
from . import nonlinear as nonlinear_mod
from .errors import ConfigurationError
from .linalg import absorb, init_state, quad_form
from .policy import (
    FixedBudgetPolicy,
    GreedyPolicy,
    OraclePolicy,
    PolicyConfig,
    QufurPolicy,
    UniformPolicy,
)
from .rng import EpisodeRng, hash64

SWEEP_COLUMNS = ["policy", "param_name", "param_value", "seed", "queries",
                 "regret_R", "regret_Reg", "cost_W", "stream_hash"]
AGGREGATE_COLUMNS = ["policy", "param_name", "param_value", "n_seeds",
                     "queries_mean", "queries_std", "regret_R_mean", "regret_R_std",
                     "regret_Reg_mean", "regret_Reg_std", "cost_W_mean", "cost_W_std"]
ROUND_COLUMNS = ["t", "domain_id", "prediction", "delta", "query_prob", "queried", "loss"]
SUMMARY_COLUMNS = ["policy", "seed", "queries", "regret_R", "regret_Reg", "total_loss", "cost_W"]

# Which config parameter each policy kind sweeps over by default.
SWEEP_PARAM = {
    "qufur": "alpha",
    "kernel_qufur": "alpha",
    "nonlinear": "alpha",
    "fixed_budget": "budget",
    "uniform": "mu",
    "greedy": "budget",
    "oracle": "budget",
}


@dataclass
class RoundRecord:
    t: int
    domain_id: int
    prediction: float
    delta: float
    query_prob: float
    queried: bool
    loss: float
    true_mean: float | None
    y: float


@dataclass
class EpisodeLog:
    """Per-round interaction records plus episode totals."""

    policy_name: str
    seed: int
    records: list[RoundRecord]
    queries: int
    regret_R: float | None
    regret_Reg: float
    total_loss: float
    stream_hash: str
    config: dict = field(default_factory=dict)


def stream_digest(rounds) -> str:
    """Hash of the materialized stream; equal digests mean paired environments."""
    h = hashlib.blake2b(digest_size=8)
    for r in rounds:
        h.update(struct.pack("<q", r.t))
        h.update(struct.pack("<q", r.domain_id))
        h.update(struct.pack("<d", math.nan if r.true_mean is None else r.true_mean))
        h.update(struct.pack("<d", r.y))
        x = np.asarray(r.x, dtype=np.float64) if not isinstance(r.x, str) else None
        if x is None:
            h.update(str(r.x).encode("utf-8"))
        else:
            h.update(x.tobytes())
    return h.hexdigest()


def _hindsight_comparator_loss(rounds, norm_bound_C: float) -> float:
    """Loss of the best-in-hindsight clipped ridge predictor over all rounds.

    Used as the comparator when the true mean is unavailable (replayed data).
    """
    xs = np.stack([np.asarray(r.x, dtype=np.float64) for r in rounds])
    ys = np.array([r.y for r in rounds])
    lam = 1.0 / norm_bound_C**2
    theta = np.linalg.solve(lam * np.eye(xs.shape[1]) + xs.T @ xs, xs.T @ ys)
    preds = np.clip(xs @ theta, -1.0, 1.0)
    return float(((preds - ys) ** 2).sum())


def run_episode(rounds, ground_truth, policy, cfg: PolicyConfig, seed: int,
                config_snapshot: dict | None = None) -> EpisodeLog:
    """Run one episode in strict protocol order; deterministic given seeds."""
    if not rounds:
        raise ConfigurationError("environment produced an empty stream")
    first_x = rounds[0].x
    if hasattr(policy, "dim") and not isinstance(first_x, str):
        if np.asarray(first_x).shape != (policy.dim,):
            raise ConfigurationError(
                f"policy dimension {policy.dim} does not match environment "
                f"dimension {np.asarray(first_x).shape}"
            )
    policy.begin(EpisodeRng(seed))
    records = []
    sq_loss = 0.0
    sq_gap = 0.0
    comparator = 0.0
    have_truth = all(r.true_mean is not None for r in rounds)
    for r in rounds:
        decision = policy.decide(r.t, r.x)
        loss = (decision.prediction - r.y) ** 2
        sq_loss += loss
        if have_truth:
            sq_gap += (decision.prediction - r.true_mean) ** 2
            comparator += (r.true_mean - r.y) ** 2
        if decision.queried:
            policy.observe(r.t, r.x, r.y)
        records.append(RoundRecord(
            t=r.t, domain_id=r.domain_id, prediction=decision.prediction,
            delta=decision.delta, query_prob=decision.query_prob,
            queried=decision.queried, loss=loss, true_mean=r.true_mean, y=r.y,
        ))
    if not have_truth:
        comparator = _hindsight_comparator_loss(rounds, cfg.norm_bound_C)
    return EpisodeLog(
        policy_name=policy.name,
        seed=seed,
        records=records,
        queries=sum(rec.queried for rec in records),
        regret_R=sq_gap if have_truth else None,
        regret_Reg=sq_loss - comparator,
        total_loss=sq_loss,
        stream_hash=stream_digest(rounds),
        config=dict(config_snapshot or {}),
    )


def compute_regret(log: EpisodeLog, ground_truth=None, rounds=None):
    """Recompute (R, Reg) from the per-round records.

    R sums squared gaps to the true mean and is None when any round lacks it;
    Reg subtracts the comparator loss (the true predictor when known,
    otherwise the hindsight ridge fit over the full stream).
    """
    have_truth = all(rec.true_mean is not None for rec in log.records)
    total_loss = sum((rec.prediction - rec.y) ** 2 for rec in log.records)
    if have_truth:
        regret_r = sum((rec.prediction - rec.true_mean) ** 2 for rec in log.records)
        comparator = sum((rec.true_mean - rec.y) ** 2 for rec in log.records)
        return regret_r, total_loss - comparator
    if rounds is None:
        raise ValueError("rounds are required to compute Reg without true means")
    cfg_c = float(log.config.get("norm_bound_C", 1.0))
    return None, total_loss - _hindsight_comparator_loss(rounds, cfg_c)


def compute_cost(log: EpisodeLog, c: float) -> float:
    """Scalarized objective c * R + Q."""
    if c < 0:
        raise ValueError(f"cost ratio must be nonnegative, got {c}")
    if log.regret_R is None:
        raise ValueError("cost requires regret_R, which is unavailable for this log")
    return c * log.regret_R + log.queries


def logdet_domain_bounds(rounds, log: EpisodeLog, norm_bound_C: float):
    """Per-domain capped-quadratic-form sums against the log-det potential.

    Replays the shared estimator over the queried rounds (bitwise identical to
    the episode) and reports, per hidden domain, tuples
    ``(domain, lhs_decision, lhs_snapshot, rhs)`` where ``rhs`` is
    ln det(I + C^2 * sum of x x^T) over that domain's queried inputs,
    ``lhs_snapshot`` sums min(1, quadratic form) with the end-of-round state
    (bounded by ``rhs``), and ``lhs_decision`` uses the pre-query state
    (bounded by ``2 * rhs``). Applies to policies driven by the linear
    estimator.
    """
    dim = len(np.asarray(rounds[0].x))
    state = init_state(dim, norm_bound_C)
    lhs_decision: dict[int, float] = {}
    lhs_snapshot: dict[int, float] = {}
    grams: dict[int, np.ndarray] = {}
    for r, rec in zip(rounds, log.records):
        if not rec.queried:
            continue
        x = np.asarray(r.x, dtype=np.float64)
        u = r.domain_id
        lhs_decision[u] = lhs_decision.get(u, 0.0) + min(1.0, quad_form(state, x))
        if u not in grams:
            grams[u] = np.zeros((dim, dim))
        grams[u] += np.outer(x, x)
        state = absorb(state, x, r.y)
        lhs_snapshot[u] = lhs_snapshot.get(u, 0.0) + min(1.0, quad_form(state, x))
    out = []
    for u, gram in grams.items():
        _, logdet = np.linalg.slogdet(np.eye(dim) + norm_bound_C**2 * gram)
        out.append((u, lhs_decision[u], lhs_snapshot[u], float(logdet)))
    return out


# ---------------------------------------------------------------------------
# Configuration


def _require(cfg: dict, key: str, kind, where: str):
    if key not in cfg:
        raise ConfigurationError(f"missing field {where}.{key}")
    value = cfg[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigurationError(f"field {where}.{key} has wrong type")
    return value


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None


def build_environment(env_cfg: dict, seed: int):
    """Materialize (ground_truth, rounds) for one seed from the config block."""
    if not isinstance(env_cfg, dict):
        raise ConfigurationError("field environment must be an object")
    kind = env_cfg.get("kind")
    if kind in ("synthetic", "lower_bound"):
        domains = env_cfg.get("domains")
        if not isinstance(domains, list) or not domains:
            raise ConfigurationError("field environment.domains must be a nonempty list")
        try:
            spec = env_mod.DomainSpec(
                entries=tuple((d, t) for d, t in domains),
                ordering=env_cfg.get("ordering", "sequential"),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"field environment.domains invalid: {exc}") from None
        if kind == "lower_bound":
            return env_mod.lower_bound_stream(spec, seed)
        ambient = env_cfg.get("ambient_dim", spec.total_dim)
        eta = env_cfg.get("eta", math.sqrt(0.1))
        try:
            return env_mod.synthetic_stream(spec, ambient, eta, seed)
        except ValueError as exc:
            raise ConfigurationError(f"field environment invalid: {exc}") from None
    if kind == "replay":
        path = _require(env_cfg, "path", str, "environment")
        return env_mod.replay_stream(path)
    if kind == "table":
        path = _require(env_cfg, "class_path", str, "environment")
        table = nonlinear_mod.load_table(path)
        horizon = _require(env_cfg, "rounds", int, "environment")
        eta = float(env_cfg.get("eta", 0.0))
        return env_mod.table_stream(table, horizon, eta, seed)
    raise ConfigurationError(
        f"field environment.kind must be synthetic|lower_bound|replay|table, got {kind!r}"
    )


def _policy_param_grid(policy_cfg: dict):
    """(param_name, [values]) for the swept parameter of one policy block."""
    kind = policy_cfg.get("kind")
    if kind not in SWEEP_PARAM:
        raise ConfigurationError(
            f"field policy.kind must be one of {sorted(SWEEP_PARAM)}, got {kind!r}"
        )
    name = SWEEP_PARAM[kind]
    raw = policy_cfg.get(name)
    if raw is None:
        raise ConfigurationError(f"field policy.{name} is required for kind {kind}")
    values = raw if isinstance(raw, list) else [raw]
    if not values:
        raise ConfigurationError(f"field policy.{name} must not be an empty list")
    numeric = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigurationError(f"field policy.{name} has a non-numeric entry {v!r}")
        numeric.append(float(v))
    if len(set(numeric)) != len(numeric):
        raise ConfigurationError(f"field policy.{name} has duplicate values")
    return name, numeric


def _policy_config(policy_cfg: dict, param_name: str, value: float, horizon: int,
                   env_eta: float) -> PolicyConfig:
    def pick(key, default):
        v = policy_cfg.get(key, default)
        return value if key == param_name else v

    budget = pick("budget", None)
    try:
        return PolicyConfig(
            alpha=float(pick("alpha", 0.0)),
            noise_level=float(policy_cfg.get("noise_level", env_eta)),
            norm_bound_C=float(policy_cfg.get("norm_bound_C", 1.0)),
            budget=None if budget is None else int(round(budget)),
            horizon=horizon,
            delta=float(policy_cfg.get("delta", 0.05)),
        )
    except ValueError as exc:
        raise ConfigurationError(f"field policy invalid: {exc}") from None


def make_policy(policy_cfg: dict, param_name: str, value: float, cfg: PolicyConfig,
                rounds, env_cfg: dict):
    """Instantiate the episode-facing policy for one sweep cell."""
    kind = policy_cfg["kind"]
    first_x = np.asarray(rounds[0].x)
    dim = int(first_x.shape[0]) if first_x.ndim == 1 else None
    if dim is None and kind != "nonlinear":
        raise ConfigurationError(
            f"policy kind {kind} needs a vector-input environment; use kind nonlinear"
        )
    if kind == "qufur":
        return QufurPolicy(cfg, dim)
    if kind == "fixed_budget":
        if cfg.budget is None:
            raise ConfigurationError("field policy.budget is required for kind fixed_budget")
        return FixedBudgetPolicy(cfg, dim)
    if kind == "uniform":
        mu = value if param_name == "mu" else policy_cfg.get("mu")
        if mu is None:
            raise ConfigurationError("field policy.mu is required for kind uniform")
        if not 0.0 <= mu <= 1.0:
            raise ConfigurationError(f"field policy.mu must be in [0, 1], got {mu}")
        return UniformPolicy(cfg, dim, float(mu))
    if kind == "greedy":
        if cfg.budget is None:
            raise ConfigurationError("field policy.budget is required for kind greedy")
        return GreedyPolicy(cfg, dim)
    if kind == "oracle":
        if cfg.budget is None:
            raise ConfigurationError("field policy.budget is required for kind oracle")
        domains = env_cfg.get("domains")
        if not domains:
            raise ConfigurationError("oracle policy requires environment.domains")
        schedule = [r.domain_id for r in rounds]
        return OraclePolicy(cfg, dim, [(d, t) for d, t in domains], schedule, cfg.budget)
    if kind == "kernel_qufur":
        kspec = policy_cfg.get("kernel", {"name": "linear"})
        if not isinstance(kspec, dict) or "name" not in kspec:
            raise ConfigurationError("field policy.kernel must be an object with a name")
        try:
            kern = kernel_mod.make_kernel(kspec["name"], kspec.get("gamma"))
        except ValueError as exc:
            raise ConfigurationError(f"field policy.kernel invalid: {exc}") from None
        return kernel_mod.KernelQufurPolicy(cfg, dim, kern)
    if kind == "nonlinear":
        table_path = policy_cfg.get("class_path") or env_cfg.get("class_path")
        if table_path is None:
            raise ConfigurationError("field policy.class_path is required for kind nonlinear")
        table = nonlinear_mod.load_table(table_path)
        if "alpha" in policy_cfg or param_name == "alpha":
            return nonlinear_mod.NonlinearQufurPolicy(cfg, table)
        return nonlinear_mod.NonlinearMasterPolicy(cfg, table)
    raise ConfigurationError(f"unknown policy kind {kind!r}")


# ---------------------------------------------------------------------------
# Sweep driver


@dataclass
class SweepRow:
    policy: str
    param_name: str
    param_value: float
    seed: int
    queries: int
    regret_R: float | None
    regret_Reg: float
    cost_W: float | None
    stream_hash: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    aggregates: list[dict]


def _aggregate(rows: list[SweepRow]) -> list[dict]:
    keys = []
    grouped: dict[tuple, list[SweepRow]] = {}
    for row in rows:
        key = (row.policy, row.param_name, row.param_value)
        if key not in grouped:
            grouped[key] = []
            keys.append(key)
        grouped[key].append(row)
    out = []
    for key in keys:
        group = grouped[key]

        def stats(values):
            vals = [v for v in values if v is not None]
            if not vals:
                return None, None
            mean = float(np.mean(vals))
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            return mean, std

        q_mean, q_std = stats([g.queries for g in group])
        r_mean, r_std = stats([g.regret_R for g in group])
        reg_mean, reg_std = stats([g.regret_Reg for g in group])
        w_mean, w_std = stats([g.cost_W for g in group])
        out.append({
            "policy": key[0], "param_name": key[1], "param_value": key[2],
            "n_seeds": len(group),
            "queries_mean": q_mean, "queries_std": q_std,
            "regret_R_mean": r_mean, "regret_R_std": r_std,
            "regret_Reg_mean": reg_mean, "regret_Reg_std": reg_std,
            "cost_W_mean": w_mean, "cost_W_std": w_std,
        })
    return out


def validate_config(config: dict) -> dict:
    if not isinstance(config, dict):
        raise ConfigurationError("config root must be an object")
    for key in ("environment", "policy"):
        if key not in config:
            raise ConfigurationError(f"missing field {key}")
    seeds = config.get("seeds", 1)
    if isinstance(seeds, bool) or not isinstance(seeds, int) or seeds < 1:
        raise ConfigurationError("field seeds must be a positive integer")
    cost_c = config.get("cost_c", 1.0)
    if isinstance(cost_c, bool) or not isinstance(cost_c, (int, float)) or cost_c < 0:
        raise ConfigurationError("field cost_c must be a nonnegative number")
    base_seed = config.get("base_seed", 0)
    if isinstance(base_seed, bool) or not isinstance(base_seed, int):
        raise ConfigurationError("field base_seed must be an integer")
    horizon = config.get("horizon")
    if horizon is not None and (isinstance(horizon, bool) or not isinstance(horizon, int)
                                or horizon < 1):
        raise ConfigurationError("field horizon must be a positive integer")
    return config


def _episode_cell(config: dict, policy_cfg: dict, param_name: str, value: float,
                  seed_index: int, env_cache: dict):
    """Run one (policy, param, seed) cell against the seed-paired environment."""
    base_seed = config.get("base_seed", 0)
    env_cfg = config["environment"]
    if seed_index not in env_cache:
        env_seed = hash64(base_seed, "env", seed_index)
        env_cache[seed_index] = build_environment(env_cfg, env_seed)
    ground_truth, rounds = env_cache[seed_index]
    horizon = config.get("horizon")
    if horizon is not None:
        if horizon > len(rounds):
            raise ConfigurationError(
                f"field horizon {horizon} exceeds environment length {len(rounds)}"
            )
        rounds = rounds[:horizon]
    env_eta = ground_truth.noise_eta if ground_truth is not None else 1.0
    cfg = _policy_config(policy_cfg, param_name, value, len(rounds), env_eta)
    policy = make_policy(policy_cfg, param_name, value, cfg, rounds, env_cfg)
    episode_seed = hash64(base_seed, policy.name, param_name, float(value), seed_index)
    snapshot = {"kind": policy_cfg["kind"], "param_name": param_name, "param_value": value,
                "norm_bound_C": cfg.norm_bound_C, "noise_level": cfg.noise_level,
                "seed_index": seed_index}
    log = run_episode(rounds, ground_truth, policy, cfg, episode_seed, snapshot)
    return rounds, cfg, log


def sweep(config: dict) -> SweepResult:
    """Cartesian product of policies x parameter grid x seeds, seed-paired."""
    validate_config(config)
    policies = config["policy"]
    if isinstance(policies, dict):
        policies = [policies]
    if not isinstance(policies, list) or not policies:
        raise ConfigurationError("field policy must be an object or nonempty list")
    cost_c = float(config.get("cost_c", 1.0))
    rows = []
    env_cache: dict[int, tuple] = {}
    for policy_cfg in policies:
        param_name, values = _policy_param_grid(policy_cfg)
        for value in values:
            for seed_index in range(config.get("seeds", 1)):
                _, _, log = _episode_cell(config, policy_cfg, param_name, value,
                                          seed_index, env_cache)
                cost = None if log.regret_R is None else cost_c * log.regret_R + log.queries
                rows.append(SweepRow(
                    policy=log.policy_name, param_name=param_name, param_value=value,
                    seed=seed_index, queries=log.queries, regret_R=log.regret_R,
                    regret_Reg=log.regret_Reg, cost_W=cost, stream_hash=log.stream_hash,
                ))
    return SweepResult(rows=rows, aggregates=_aggregate(rows))


def run_single(config: dict, seed_index: int):
    """One episode from a config whose policy block has scalar parameters."""
    validate_config(config)
    policy_cfg = config["policy"]
    if isinstance(policy_cfg, list):
        raise ConfigurationError("field policy must be a single object for run")
    param_name, values = _policy_param_grid(policy_cfg)
    if len(values) != 1:
        raise ConfigurationError(f"field policy.{param_name} must be scalar for run")
    return _episode_cell(config, policy_cfg, param_name, values[0], seed_index, {})


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _timestamp_header() -> str:
    return f"# generated {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n"


def write_round_log_csv(log: EpisodeLog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_timestamp_header())
        fh.write(",".join(ROUND_COLUMNS) + "\n")
        for rec in log.records:
            fh.write(",".join([
                str(rec.t), str(rec.domain_id), _fmt(rec.prediction), _fmt(rec.delta),
                _fmt(rec.query_prob), "1" if rec.queried else "0", _fmt(rec.loss),
            ]) + "\n")


def write_summary_csv(log: EpisodeLog, cost_c: float, path) -> None:
    cost = None if log.regret_R is None else cost_c * log.regret_R + log.queries
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_timestamp_header())
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        fh.write(",".join([
            log.policy_name, str(log.seed), str(log.queries), _fmt(log.regret_R),
            _fmt(log.regret_Reg), _fmt(log.total_loss), _fmt(cost),
        ]) + "\n")


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_timestamp_header())
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in result.rows:
            fh.write(",".join([
                row.policy, row.param_name, _fmt(row.param_value), str(row.seed),
                str(row.queries), _fmt(row.regret_R), _fmt(row.regret_Reg),
                _fmt(row.cost_W), row.stream_hash,
            ]) + "\n")


def write_aggregate_csv(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_timestamp_header())
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for agg in result.aggregates:
            fh.write(",".join(_fmt(agg[col]) for col in AGGREGATE_COLUMNS) + "\n")
