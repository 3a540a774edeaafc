"""Command line entry point.

Subcommands: ``run`` (one episode), ``sweep`` (policy x parameter x seed
grid), ``lowerbound`` (budget scan on the adversarial stream), ``eluder``
(brute-force dimension of a hypothesis table), ``export-stream`` (write a
replay CSV). Exit codes: 0 success, 2 configuration error, 3 runtime or
numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .env import DomainSpec, export_stream, lower_bound_stream
from .errors import (
    ConfigurationError,
    NumericalDegeneracyError,
    ResourceLimitError,
    StreamParseError,
)
from .nonlinear import eluder_dimension, load_table
from .policy import FixedBudgetPolicy, PolicyConfig
from .rng import hash64


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qufur", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode and write per-round + summary CSVs")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", help="run the config's sweep grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out-dir", required=True)

    p_lb = sub.add_parser("lowerbound", help="budget scan on the adversarial stream")
    p_lb.add_argument("--spec", required=True, help="JSON file with domain entries")
    p_lb.add_argument("--budgets", required=True, help="comma-separated budgets")
    p_lb.add_argument("--seeds", type=int, required=True)
    p_lb.add_argument("--out", required=True)

    p_el = sub.add_parser("eluder", help="brute-force eluder dimension of a table")
    p_el.add_argument("--class", dest="class_path", required=True)
    p_el.add_argument("--epsilon", type=float, required=True)

    p_ex = sub.add_parser("export-stream", help="write the config's environment as a replay CSV")
    p_ex.add_argument("--config", required=True)
    p_ex.add_argument("--seed", type=int, default=0)
    p_ex.add_argument("--out", required=True)
    return parser


def _cmd_run(args) -> int:
    config = harness.load_config(args.config)
    rounds, cfg, log = harness.run_single(config, args.seed)
    cost_c = float(config.get("cost_c", 1.0))
    harness.write_round_log_csv(log, args.out)
    summary_path = os.fspath(args.out) + ".summary.csv"
    harness.write_summary_csv(log, cost_c, summary_path)
    r_txt = "NA" if log.regret_R is None else f"{log.regret_R:.6g}"
    print(f"policy={log.policy_name} queries={log.queries} regret_R={r_txt} "
          f"regret_Reg={log.regret_Reg:.6g} total_loss={log.total_loss:.6g}")
    return 0


def _cmd_sweep(args) -> int:
    config = harness.load_config(args.config)
    result = harness.sweep(config)
    os.makedirs(args.out_dir, exist_ok=True)
    detail = os.path.join(args.out_dir, "sweep_detail.csv")
    agg = os.path.join(args.out_dir, "sweep_aggregate.csv")
    harness.write_sweep_csv(result, detail)
    harness.write_aggregate_csv(result, agg)
    print(f"wrote {len(result.rows)} rows to {detail}")
    print(f"wrote {len(result.aggregates)} aggregate rows to {agg}")
    return 0


def _cmd_lowerbound(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"spec file invalid: {exc}") from None
    entries = doc.get("domains") or doc.get("entries")
    if not isinstance(entries, list) or not entries:
        raise ConfigurationError("field domains must be a nonempty list of [d_u, T_u]")
    try:
        budgets = [int(b) for b in args.budgets.split(",") if b.strip()]
    except ValueError:
        raise ConfigurationError(f"field budgets invalid: {args.budgets!r}") from None
    if not budgets:
        raise ConfigurationError("field budgets must name at least one budget")
    try:
        spec = DomainSpec(entries=tuple((d, t) for d, t in entries))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"field domains invalid: {exc}") from None

    rows = []
    dim = spec.total_dim
    for seed_index in range(args.seeds):
        env_seed = hash64(0, "env", seed_index)
        ground_truth, rounds = lower_bound_stream(spec, env_seed)
        for budget in budgets:
            cfg = PolicyConfig(noise_level=1.0, norm_bound_C=dim**0.5,
                               budget=budget, horizon=len(rounds))
            policy = FixedBudgetPolicy(cfg, dim)
            episode_seed = hash64(0, policy.name, "budget", float(budget), seed_index)
            log = harness.run_episode(rounds, ground_truth, policy, cfg, episode_seed)
            rows.append(harness.SweepRow(
                policy=policy.name, param_name="budget", param_value=float(budget),
                seed=seed_index, queries=log.queries, regret_R=log.regret_R,
                regret_Reg=log.regret_Reg, cost_W=None, stream_hash=log.stream_hash,
            ))
    result = harness.SweepResult(rows=rows, aggregates=harness._aggregate(rows))
    harness.write_sweep_csv(result, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_eluder(args) -> int:
    table = load_table(args.class_path)
    dim = eluder_dimension(table, list(table.support), args.epsilon)
    print(dim)
    return 0


def _cmd_export(args) -> int:
    config = harness.load_config(args.config)
    harness.validate_config(config)
    env_seed = hash64(config.get("base_seed", 0), "env", args.seed)
    _, rounds = harness.build_environment(config["environment"], env_seed)
    export_stream(rounds, args.out)
    print(f"wrote {len(rounds)} rounds to {args.out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "lowerbound": _cmd_lowerbound,
    "eluder": _cmd_eluder,
    "export-stream": _cmd_export,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (StreamParseError, NumericalDegeneracyError, ResourceLimitError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
