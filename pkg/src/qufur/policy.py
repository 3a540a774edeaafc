"""Query policies for active online regression.

The core scheme queries each round with probability proportional to an
uncertainty estimate of the current input; a fixed-budget master aggregates
geometrically spaced copies of it so a hard label budget can be honored
without knowing the domain structure. Uniform, greedy, and domain-aware
baselines share the same estimator and episode protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import RlsState, absorb, init_state, quad_form, theta_hat
from .rng import EpisodeRng


def clip(z: float) -> float:
    """Clamp a prediction to [-1, 1]."""
    return min(1.0, max(-1.0, float(z)))


@dataclass
class PolicyConfig:
    """Shared policy parameters for one run.

    ``noise_level`` is the sub-Gaussian scale eta; uncertainty always uses
    eta_tilde = max(1, eta). ``budget``, when present, is a hard cap on total
    queries and is clamped to the horizon.
    """

    alpha: float = 0.0
    noise_level: float = 1.0
    norm_bound_C: float = 1.0
    budget: int | None = None
    horizon: int = 1
    delta: float = 0.05

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.noise_level < 0:
            raise ValueError(f"noise_level must be nonnegative, got {self.noise_level}")
        if not self.norm_bound_C > 0:
            raise ValueError(f"norm_bound_C must be positive, got {self.norm_bound_C}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        self.horizon = int(self.horizon)
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.budget is not None:
            if int(self.budget) != self.budget or self.budget < 0:
                raise ValueError(f"budget must be a nonnegative integer, got {self.budget}")
            self.budget = min(int(self.budget), self.horizon)

    @property
    def eta_tilde(self) -> float:
        return max(1.0, float(self.noise_level))


@dataclass
class RoundDecision:
    """One round's interaction summary: prediction, uncertainty, query draw."""

    prediction: float
    delta: float
    query_prob: float
    queried: bool


def predict(state: RlsState, x) -> float:
    """Clipped inner product of the current coefficients with x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (state.dim,):
        raise ValueError(f"expected vector of length {state.dim}, got shape {x.shape}")
    return clip(float(theta_hat(state) @ x))


def uncertainty(state: RlsState, x, eta: float) -> float:
    """Uncertainty estimate max(1, eta)^2 * min(1, x^T M^-1 x), in [0, eta_tilde^2]."""
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    eta_tilde = max(1.0, float(eta))
    return eta_tilde**2 * min(1.0, quad_form(state, x))


def qufur_step(state: RlsState, cfg: PolicyConfig, x, rng: EpisodeRng) -> RoundDecision:
    """One round of the uncertainty-proportional policy.

    Queries with probability min(1, alpha * delta); a present-and-exhausted
    budget forces the query off and reports probability 0.
    """
    pred = predict(state, x)
    delta = uncertainty(state, x, cfg.noise_level)
    if cfg.budget is not None and state.query_count >= cfg.budget:
        return RoundDecision(pred, delta, 0.0, False)
    p = min(1.0, cfg.alpha * delta)
    return RoundDecision(pred, delta, p, rng.uniform() < p)


# ---------------------------------------------------------------------------
# Fixed-budget master


@dataclass
class CopyState:
    alpha: float
    spent: int = 0


@dataclass
class MasterState:
    """Bookkeeping for the multi-copy master sharing one estimator."""

    copies: list[CopyState]
    per_copy_budget: int
    budget: int
    shared_rls: RlsState
    total_spent: int = 0
    round_index: int = 0


def alpha_grid(horizon: int, n_copies: int) -> list[float]:
    """Geometric tradeoff grid 2^i / T^2 for i = 0 .. n_copies - 1."""
    t2 = float(horizon) ** 2
    return [2.0**i / t2 for i in range(n_copies)]


def master_copy_count(horizon: int) -> int:
    """Number of copies k + 1 with k = ceil(3 * log2(T))."""
    return int(math.ceil(3.0 * math.log2(horizon))) + 1 if horizon > 1 else 1


def per_copy_budget(budget: int, n_copies: int) -> int:
    """Per-copy query allowance floor(B / k) with a floor of one.

    ``n_copies`` counts the copies i = 0..k, so the divisor is k. The floor
    keeps small budgets (below the copy count) from freezing every copy at
    zero; the master's global stop is what guarantees total queries never
    exceed the budget, so neither the floor nor the k-vs-k+1 split can
    overshoot it.
    """
    if budget <= 0:
        return 0
    return max(1, budget // max(1, n_copies - 1))


def init_master(cfg: PolicyConfig, dim: int) -> MasterState:
    """Master over copies i = 0..k with alpha_i = 2^i / T^2 and a shared estimator."""
    if cfg.budget is None:
        raise ValueError("fixed-budget master requires a budget")
    n = master_copy_count(cfg.horizon)
    return MasterState(
        copies=[CopyState(alpha=a) for a in alpha_grid(cfg.horizon, n)],
        per_copy_budget=per_copy_budget(cfg.budget, n),
        budget=cfg.budget,
        shared_rls=init_state(dim, cfg.norm_bound_C),
    )


def fixed_budget_step(master: MasterState, cfg: PolicyConfig, x, rng: EpisodeRng) -> RoundDecision:
    """One master round: each under-budget copy draws from its keyed substream.

    A query fires when any budget-holding copy draws success; the reported
    probability is the chance of that union (0 once everything is exhausted).
    One query consumes exactly one budget unit, drained from the least
    aggressive copy still holding budget: charging every firing copy would
    bill a single label many times over, and charging firing copies first
    strands the rarely-firing copies' allowance, so the ladder is drained
    bottom-up and the aggressive copies stay live longest. The caller absorbs
    the labeled example and bumps ``total_spent`` after the label is revealed.
    """
    t = master.round_index
    master.round_index += 1
    pred = predict(master.shared_rls, x)
    delta = uncertainty(master.shared_rls, x, cfg.noise_level)
    if master.total_spent >= master.budget:
        return RoundDecision(pred, delta, 0.0, False)
    charge_target = None
    fired = False
    prob_none = 1.0
    for i, copy in enumerate(master.copies):  # ascending alpha
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


# ---------------------------------------------------------------------------
# Baselines


def oracle_rates(domains: list[tuple[int, int]], budget: int) -> list[float]:
    """Domain-aware query rates mu_u = min(1, c * sqrt(d_u / T_u)).

    The scale c is found by bisection so the expected query count
    sum_u mu_u * T_u meets min(budget, sum_u T_u).
    """
    if not domains:
        raise ValueError("domain list must be nonempty")
    for d_u, t_u in domains:
        if d_u < 1 or t_u < d_u:
            raise ValueError(f"need 1 <= d_u <= T_u, got ({d_u}, {t_u})")
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    ratios = np.array([math.sqrt(d / t) for d, t in domains])
    durations = np.array([float(t) for _, t in domains])
    target = min(float(budget), float(durations.sum()))
    if target == 0.0:
        return [0.0] * len(domains)

    def spend(c: float) -> float:
        return float(np.minimum(1.0, c * ratios) @ durations)

    lo, hi = 0.0, float(1.0 / ratios.min())
    if spend(hi) <= target:
        return [1.0] * len(domains)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spend(mid) < target:
            lo = mid
        else:
            hi = mid
    c_star = 0.5 * (lo + hi)
    return [float(min(1.0, c_star * r)) for r in ratios]


def bernoulli_query(p: float, remaining_budget: int, rng: EpisodeRng) -> bool:
    """Budget-capped coin flip; never draws when the budget is spent."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    if remaining_budget <= 0:
        return False
    return rng.uniform() < p


# ---------------------------------------------------------------------------
# Episode-facing policy wrappers. Each is a value state machine advanced by a
# single episode loop: begin(rng) resets state, decide(t, x) is computed from
# the pre-round state only, observe(t, x, y) folds in a revealed label.


class LinearPolicy:
    """Base for policies predicting with the shared ridge estimator."""

    name = "linear"

    def __init__(self, cfg: PolicyConfig, dim: int):
        self.cfg = cfg
        self.dim = dim
        self.state = init_state(dim, cfg.norm_bound_C)
        self.rng: EpisodeRng | None = None

    def begin(self, rng: EpisodeRng) -> None:
        self.state = init_state(self.dim, self.cfg.norm_bound_C)
        self.rng = rng

    def observe(self, t: int, x, y: float) -> None:
        self.state = absorb(self.state, x, y)

    def decide(self, t: int, x) -> RoundDecision:  # pragma: no cover - abstract
        raise NotImplementedError


class QufurPolicy(LinearPolicy):
    name = "qufur"

    def decide(self, t: int, x) -> RoundDecision:
        return qufur_step(self.state, self.cfg, x, self.rng)


class FixedBudgetPolicy(LinearPolicy):
    name = "fixed_budget"

    def __init__(self, cfg: PolicyConfig, dim: int):
        super().__init__(cfg, dim)
        self.master = init_master(cfg, dim)

    def begin(self, rng: EpisodeRng) -> None:
        super().begin(rng)
        self.master = init_master(self.cfg, self.dim)

    def decide(self, t: int, x) -> RoundDecision:
        return fixed_budget_step(self.master, self.cfg, x, self.rng)

    def observe(self, t: int, x, y: float) -> None:
        self.master.shared_rls = absorb(self.master.shared_rls, x, y)
        self.master.total_spent += 1


class FixedProbabilityPolicy(LinearPolicy):
    """Queries with a per-round probability schedule under a hard budget cap."""

    def __init__(self, cfg: PolicyConfig, dim: int):
        super().__init__(cfg, dim)
        self.spent = 0

    def begin(self, rng: EpisodeRng) -> None:
        super().begin(rng)
        self.spent = 0

    def query_probability(self, t: int) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def decide(self, t: int, x) -> RoundDecision:
        pred = predict(self.state, x)
        delta = uncertainty(self.state, x, self.cfg.noise_level)
        remaining = (self.cfg.budget - self.spent) if self.cfg.budget is not None else 1
        p = self.query_probability(t) if remaining > 0 else 0.0
        queried = bernoulli_query(p, remaining, self.rng)
        return RoundDecision(pred, delta, p, queried)

    def observe(self, t: int, x, y: float) -> None:
        super().observe(t, x, y)
        self.spent += 1


class UniformPolicy(FixedProbabilityPolicy):
    name = "uniform"

    def __init__(self, cfg: PolicyConfig, dim: int, mu: float):
        super().__init__(cfg, dim)
        if not 0.0 <= mu <= 1.0:
            raise ValueError(f"mu must be in [0, 1], got {mu}")
        self.mu = float(mu)

    def query_probability(self, t: int) -> float:
        return self.mu


class GreedyPolicy(FixedProbabilityPolicy):
    name = "greedy"

    def query_probability(self, t: int) -> float:
        return 1.0


class OraclePolicy(FixedProbabilityPolicy):
    """Domain-aware baseline: rate mu_u for the true domain of each round."""

    name = "oracle"

    def __init__(self, cfg: PolicyConfig, dim: int, domains: list[tuple[int, int]],
                 domain_schedule: list[int], budget: int):
        super().__init__(cfg, dim)
        self.rates = oracle_rates(domains, budget)
        self.domain_schedule = list(domain_schedule)

    def query_probability(self, t: int) -> float:
        return self.rates[self.domain_schedule[t]]
