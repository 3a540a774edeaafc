"""Figure rendering for sweep and per-round CSV logs."""

from .csvio import SchemaError, read_round_log, read_sweep
from .render import (
    TradeoffSeries,
    domain_change_points,
    render_query_prob,
    render_tradeoff,
    smooth_series,
    tradeoff_series,
)

__version__ = "0.1.0"
