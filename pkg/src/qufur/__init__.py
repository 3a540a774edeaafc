"""Label-efficient online regression under hidden domain shift.

Query policies that spend labels in proportion to predictive uncertainty,
their fixed-budget master, uniform/greedy/domain-aware baselines, kernel and
finite-class variants, synthetic and adversarial environments, and a seeded
sweep harness with CSV output.
"""

from .env import DomainSpec, GroundTruth, StreamRound, lower_bound_stream, replay_stream, synthetic_stream
from .errors import (
    ConfigurationError,
    NumericalDegeneracyError,
    ResourceLimitError,
    StreamParseError,
)
from .harness import EpisodeLog, compute_cost, compute_regret, run_episode, sweep
from .kernel import (
    KernelState,
    effective_dimension,
    kernel_absorb,
    kernel_predict,
    kernel_uncertainty,
    make_kernel,
)
from .linalg import RlsState, absorb, init_state, quad_form, theta_hat
from .nonlinear import (
    ConfidenceSet,
    HypothesisTable,
    beta_threshold,
    confidence_set,
    covering_number,
    disagreement,
    eluder_dimension,
    erm,
    load_table,
    nonlinear_qufur_step,
)
from .policy import (
    MasterState,
    PolicyConfig,
    RoundDecision,
    bernoulli_query,
    fixed_budget_step,
    init_master,
    oracle_rates,
    predict,
    qufur_step,
    uncertainty,
)
from .rng import EpisodeRng, hash64

__version__ = "0.1.0"
