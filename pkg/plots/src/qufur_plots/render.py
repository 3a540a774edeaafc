"""Figure rendering: query-loss tradeoff curves and query-probability traces.

Output is deterministic: fixed DPI, a color cycle keyed by the policy name
hash, a fixed SVG hash salt, and no embedded dates, so re-rendering the same
CSV reproduces the output byte for byte. Every plotted tradeoff point carries
a gid embedding its data coordinates, which keeps rendered values traceable
to the CSV cells they aggregate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "qufur-plots"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .csvio import SchemaError, read_round_log, read_sweep

DPI = 150
_PALETTE = plt.get_cmap("tab10").colors

LOSS_COLUMNS = ("regret_R", "regret_Reg", "cost_W")


@dataclass
class TradeoffSeries:
    """One policy's curve: matched (mean queries, mean loss) points with spread."""

    policy: str
    points: list  # (mean_q, mean_loss, std_q, std_loss), sorted by mean_q
    source: str


def policy_color(policy: str):
    digest = hashlib.blake2b(policy.encode("utf-8"), digest_size=2).digest()
    return _PALETTE[digest[0] % len(_PALETTE)]


def point_gid(policy: str, mean_q: float, mean_loss: float) -> str:
    return f"pt_{policy}_{mean_q:.6f}_{mean_loss:.6f}"


def _save(fig, out_image) -> None:
    path = str(out_image)
    if path.endswith(".svg"):
        fig.savefig(path, format="svg", metadata={"Date": None})
    elif path.endswith(".png"):
        fig.savefig(path, format="png", dpi=DPI)
    else:
        raise ValueError(f"unsupported image extension on {path!r} (use .png or .svg)")
    plt.close(fig)


def tradeoff_series(sweep_csv, loss_column: str = "regret_R") -> list[TradeoffSeries]:
    """Aggregate the sweep detail CSV into per-policy curves."""
    if loss_column not in LOSS_COLUMNS:
        raise SchemaError(f"loss column must be one of {LOSS_COLUMNS}, got {loss_column!r}")
    rows = read_sweep(sweep_csv)
    groups: dict[tuple, list] = {}
    order: list[tuple] = []
    for row in rows:
        if row[loss_column] == "":
            continue
        key = (row["policy"], row["param_name"], float(row["param_value"]))
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append((float(row["queries"]), float(row[loss_column])))
    if not groups:
        raise SchemaError(f"{sweep_csv}: no rows with a value in column {loss_column!r}")

    by_policy: dict[str, list] = {}
    for key in order:
        policy = key[0]
        qs = np.array([q for q, _ in groups[key]])
        ls = np.array([l for _, l in groups[key]])
        std_q = float(qs.std(ddof=1)) if len(qs) > 1 else 0.0
        std_l = float(ls.std(ddof=1)) if len(ls) > 1 else 0.0
        by_policy.setdefault(policy, []).append(
            (float(qs.mean()), float(ls.mean()), std_q, std_l))
    return [
        TradeoffSeries(policy=name, points=sorted(pts), source=str(sweep_csv))
        for name, pts in by_policy.items()
    ]


def render_tradeoff(sweep_csv, out_image, loss_column: str = "regret_R") -> list[TradeoffSeries]:
    """Render one error-bar line per policy; x is mean queries, y the loss column."""
    series = tradeoff_series(sweep_csv, loss_column)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for s in series:
        qs = [p[0] for p in s.points]
        ls = [p[1] for p in s.points]
        errs = [p[3] for p in s.points]
        color = policy_color(s.policy)
        ax.errorbar(qs, ls, yerr=errs, color=color, label=s.policy,
                    marker="o", markersize=4, capsize=3, linewidth=1.5)
        for q, l, _, _ in s.points:
            dot, = ax.plot([q], [l], marker="o", markersize=4, color=color)
            dot.set_gid(point_gid(s.policy, q, l))
    ax.set_xlabel("queries")
    ax.set_ylabel(loss_column)
    ax.legend()
    ax.grid(True, alpha=0.3)
    _save(fig, out_image)
    return series


def smooth_series(values, window: int):
    """Trailing moving average with partial windows, so constants stay constant."""
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    values = np.asarray(values, dtype=float)
    if window == 1:
        return values.copy()
    csum = np.concatenate([[0.0], np.cumsum(values)])
    out = np.empty_like(values)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def domain_change_points(domains) -> list[int]:
    """Indices where the hidden domain id changes from the previous round."""
    return [i for i in range(1, len(domains)) if domains[i] != domains[i - 1]]


def render_query_prob(round_log_csv, out_image, smoothing_window: int = 20):
    """Render the smoothed query-probability trace with domain-change markers."""
    ts, domains, probs = read_round_log(round_log_csv)
    smoothed = smooth_series(probs, smoothing_window)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(ts, smoothed, color=policy_color("query_prob"), linewidth=1.2)
    for i in domain_change_points(domains):
        ax.axvline(ts[i], color="gray", linestyle="--", linewidth=0.8, alpha=0.7)
    ax.set_xlabel("round")
    ax.set_ylabel(f"query probability (window {smoothing_window})")
    ax.set_ylim(-0.02, 1.05)
    ax.grid(True, alpha=0.3)
    _save(fig, out_image)
    return ts, smoothed
