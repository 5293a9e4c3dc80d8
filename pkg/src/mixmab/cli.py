"""Command-line front end: ``mixmab run|compare|sweep|validate``.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure (for
example an unwritable output directory).  Results go under ``--out`` or,
when absent, under ``$MIXMAB_OUTPUT_ROOT`` (default ``./results``).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .bandit import ConfigError, PolicyKind
from .config import format_config, parse_config, parse_rate, parse_seeds
from .engine import SimConfig, run
from .metrics import (
    convergence_time,
    cumulative_pdr,
    energy_per_packet,
    pdr,
    write_csv,
    write_device_csv,
)

OUTPUT_ROOT_ENV = "MIXMAB_OUTPUT_ROOT"

SUMMARY_FIELDS = ("policy", "scenario", "rate_per_hour", "seed", "final_pdr", "mean_ec_mj",
                  "convergence_time_ms")


@dataclass
class RunSummary:
    policy: str
    scenario: int | None
    rate_per_hour: float
    seed: int
    final_pdr: float | None
    mean_ec_mj: float | None
    convergence_time_ms: float | None
    generated: int
    sent: int
    received: int
    residual: int

    def row(self) -> list[str]:
        return [_cell(getattr(self, f)) for f in SUMMARY_FIELDS]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "results"))


def default_run_name(cfg: SimConfig) -> str:
    sc = "custom" if cfg.scenario is None else f"s{cfg.scenario}"
    return f"{sc}_{cfg.policy.value}_r{cfg.packet_rate_per_hour:g}_seed{cfg.seed}"


def execute(cfg: SimConfig, out_dir: Path | None, *, per_device: bool = False, event_log: bool = False) -> RunSummary:
    """Run one simulation and, when ``out_dir`` is given, write its artifacts there."""
    result = run(cfg, record=event_log)
    series = result.series
    conv = convergence_time(cumulative_pdr(series), bucket_ms=series.bucket_ms)
    agg = series.aggregated()
    summary = RunSummary(
        policy=cfg.policy.value,
        scenario=cfg.scenario,
        rate_per_hour=cfg.packet_rate_per_hour,
        seed=cfg.seed,
        final_pdr=pdr(series),
        mean_ec_mj=energy_per_packet(series),
        convergence_time_ms=conv,
        generated=int(agg["generated"].sum()),
        sent=int(agg["sent"].sum()),
        received=int(agg["received"].sum()),
        residual=int(series.residual[-1]),
    )
    if out_dir is None:
        return summary
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": cfg.seed, "build": f"mixmab {__version__}"}
    (out_dir / "manifest.ini").write_text(format_config(cfg, manifest))
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        write_csv(series, fh)
    if per_device:
        with open(out_dir / "devices.csv", "w", newline="") as fh:
            write_device_csv(series, fh)
    if event_log:
        (out_dir / "events.log").write_text(result.event_log_text())
    (out_dir / "summary.json").write_text(json.dumps(summary.__dict__, indent=2, sort_keys=True) + "\n")
    return summary


def _execute_job(job: tuple[SimConfig, Path | None, bool, bool]) -> RunSummary:
    cfg, out_dir, per_device, event_log = job
    return execute(cfg, out_dir, per_device=per_device, event_log=event_log)


def run_many(jobs: Sequence[tuple[SimConfig, Path | None, bool, bool]], workers: int = 1) -> list[RunSummary]:
    if workers <= 1 or len(jobs) <= 1:
        return [_execute_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_job, jobs))


def _median(values: list[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return statistics.median(vals) if vals else None


def write_table(summaries: Sequence[RunSummary], path: Path, group_key: str) -> list[list[str]]:
    """One row per run plus a ``median`` row per group; also returns the rows."""
    rows = [s.row() for s in summaries]
    groups: dict[Any, list[RunSummary]] = {}
    for s in summaries:
        groups.setdefault(getattr(s, group_key), []).append(s)
    for key, members in groups.items():
        first = members[0]
        rows.append([
            first.policy, _cell(first.scenario), _cell(first.rate_per_hour), "median",
            _cell(_median([m.final_pdr for m in members])),
            _cell(_median([m.mean_ec_mj for m in members])),
            _cell(_median([m.convergence_time_ms for m in members])),
        ])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        writer.writerows(rows)
    return rows


# -- argument handling ---------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--scenario", help="preset 1..5 or 'custom'")
    p.add_argument("--policy", choices=[k.value for k in PolicyKind])
    p.add_argument("--seed", type=int)
    p.add_argument("--devices", type=int, dest="n_devices")
    p.add_argument("--radius", type=float, dest="cell_radius_m", help="cell radius in metres")
    p.add_argument("--horizon-hours", type=float)
    p.add_argument("--rate", help="packets per hour, or 1ph/1pd/1pw")
    p.add_argument("--payload", type=int, dest="payload_bytes")
    p.add_argument("--duty-cycle", type=float)
    p.add_argument("--bucket-ms", type=float, dest="metrics_bucket_ms")
    p.add_argument("--l-exp", type=int)
    p.add_argument("--l-ee", type=int)
    p.add_argument("--gamma", type=float, help="override the horizon-derived learning rate")


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    flags: dict[str, Any] = {}
    if args.scenario is not None:
        if args.scenario.lower() == "custom":
            flags["scenario"] = None
        else:
            try:
                flags["scenario"] = int(args.scenario)
            except ValueError:
                raise ConfigError(f"scenario: must be 1..5 or custom, got {args.scenario!r}") from None
    if args.policy is not None:
        flags["policy"] = PolicyKind(args.policy)
    if args.horizon_hours is not None:
        flags["horizon_ms"] = args.horizon_hours * 3_600_000.0
    if args.rate is not None:
        flags["packet_rate_per_hour"] = parse_rate(args.rate)
    for key in ("seed", "n_devices", "cell_radius_m", "payload_bytes", "duty_cycle",
                "metrics_bucket_ms", "l_exp", "l_ee", "gamma"):
        value = getattr(args, key)
        if value is not None:
            flags[key] = value
    return flags


def _resolve(args: argparse.Namespace) -> SimConfig:
    return parse_config(args.config, _flags(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixmab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mixmab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    _add_config_flags(p_run)
    p_run.add_argument("--out", help="results directory")
    p_run.add_argument("--per-device-csv", action="store_true")
    p_run.add_argument("--event-log", action="store_true")

    p_cmp = sub.add_parser("compare", help="several policies over several seeds")
    _add_config_flags(p_cmp)
    p_cmp.add_argument("--policies", default="mixmab,loramab,legacy")
    p_cmp.add_argument("--seeds", default="1..10")
    p_cmp.add_argument("--jobs", type=int, default=1)
    p_cmp.add_argument("--out")

    p_sweep = sub.add_parser("sweep", help="one policy over several packet rates")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--rates", default="1ph,1pd,1pw")
    p_sweep.add_argument("--seeds", default="1")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out")

    p_val = sub.add_parser("validate", help="check a configuration and print it fully resolved")
    _add_config_flags(p_val)
    return parser


def _cmd_run(args) -> int:
    cfg = _resolve(args)
    out = Path(args.out) if args.out else output_root() / default_run_name(cfg)
    s = execute(cfg, out, per_device=args.per_device_csv, event_log=args.event_log)
    print(f"{out}: pdr={_cell(s.final_pdr)} ec_mj={_cell(s.mean_ec_mj)} "
          f"convergence_ms={_cell(s.convergence_time_ms) or 'not converged'}")
    return 0


def _print_rows(rows: list[list[str]]) -> None:
    print(",".join(SUMMARY_FIELDS))
    for row in rows:
        print(",".join(row))


def _cmd_compare(args) -> int:
    base = _resolve(args)
    policies = [PolicyKind(p.strip()) for p in args.policies.split(",") if p.strip()]
    seeds = parse_seeds(args.seeds)
    out = Path(args.out) if args.out else output_root() / f"compare_s{base.scenario}"
    jobs = []
    for policy in policies:
        for seed in seeds:
            cfg = base.replace(policy=policy, seed=seed)
            jobs.append((cfg, out / default_run_name(cfg), False, False))
    summaries = run_many(jobs, args.jobs)
    _print_rows(write_table(summaries, out / "compare.csv", "policy"))
    return 0


def _cmd_sweep(args) -> int:
    base = _resolve(args)
    rates = [(tok.strip(), parse_rate(tok)) for tok in args.rates.split(",") if tok.strip()]
    seeds = parse_seeds(args.seeds)
    out = Path(args.out) if args.out else output_root() / f"sweep_s{base.scenario}"
    jobs = []
    for label, rate in rates:
        for seed in seeds:
            cfg = base.replace(packet_rate_per_hour=rate, seed=seed)
            jobs.append((cfg, out / label / default_run_name(cfg), False, False))
    summaries = run_many(jobs, args.jobs)
    _print_rows(write_table(summaries, out / "sweep.csv", "rate_per_hour"))
    return 0


def _cmd_validate(args) -> int:
    cfg = _resolve(args)
    sys.stdout.write(format_config(cfg))
    print(f"# K = {cfg.action_space().K}")
    return 0


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "sweep": _cmd_sweep, "validate": _cmd_validate}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"mixmab: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mixmab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
