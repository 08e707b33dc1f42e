"""Command-line entry point: ``murim {run,sweep,attack}``.

Every subcommand writes a summary table, a round log and a config echo to
the output directory (``--out``, else ``$MURIM_OUT``, else ``murim-out``).
Feeding the echoed ``config.json`` back through ``-c`` reproduces the
outputs byte for byte.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import report
from .attacks import MPA, NGA, NONE as ATTACK_NONE
from .config import FEDAVG, RunConfig, _Loader, dumps, from_dict, to_dict, with_overrides
from .errors import MurimError
from .simulator import attack_pair, clean_twin, sweep

OUT_ENV = "MURIM_OUT"
DEFAULT_OUT = "murim-out"
ATTACK_KINDS = (MPA, NGA)

log = logging.getLogger("murim")


def _scalar(text: str) -> Any:
    # same scalar rules as config files, so "1e-5" is a float and "true" a bool
    return yaml.load(text, Loader=_Loader)


def _assignment(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value


def _seed_list(text: str) -> list[int]:
    try:
        if "-" in text.strip("-") and "," not in text:
            lo, hi = text.split("-")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}; use 0,1,2 or 0-4") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML or JSON config file ('-' reads stdin)")
    common.add_argument("--set", dest="overrides", action="append", type=_assignment, default=[],
                        metavar="KEY=VALUE", help="override a dotted config key, e.g. reputation.grace_rounds=2")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--jobs", type=int, default=1, help="worker processes; 0 uses every core")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="murim", description="MURIM federated-learning incentive simulator")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{run,sweep,attack}")

    p_run = sub.add_parser("run", parents=[common], help="single simulation")
    p_run.add_argument("--curves", action="store_true", help="also write per-round accuracy series")

    p_sweep = sub.add_parser("sweep", parents=[common], help="grid of simulations, one row per run")
    p_sweep.add_argument("--grid", action="append", type=_assignment, default=[], metavar="KEY=V1,V2",
                         help="axis of the grid; repeat for a cartesian product")
    p_sweep.add_argument("--seeds", type=_seed_list, help="seed list, e.g. 0,1,2 or 0-4")

    p_atk = sub.add_parser("attack", parents=[common], help="clean vs attacked twin runs")
    p_atk.add_argument("--kind", choices=ATTACK_KINDS, help="attack to inject (default from config)")
    p_atk.add_argument("--baseline", action="store_true",
                       help="FedAvg without reputation instead of SLE with reputation")
    p_atk.add_argument("--seeds", type=_seed_list, help="repeat over several seeds")
    return parser


def _load_raw(source: str | None) -> dict | None:
    if source is None:
        return None
    text = sys.stdin.read() if source == "-" else Path(source).read_text(encoding="utf-8")
    raw = yaml.load(text, Loader=_Loader)
    if raw is not None and not isinstance(raw, dict):
        raise MurimError(f"{source}: top level must be a mapping")
    return raw


def _resolve(args, raw: dict | None) -> RunConfig:
    config = from_dict(raw)
    if args.overrides:
        config = with_overrides(config, {k: _scalar(v) for k, v in args.overrides})
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _emit(out: Path, fmt: str, summary_rows, rounds_text: str, echo: str) -> None:
    report.write_text(out / f"summary.{fmt}", report.table_text(summary_rows, fmt))
    report.write_text(out / f"rounds.{fmt}", rounds_text)
    report.write_text(out / "config.json", echo)


def cmd_run(args, raw: dict | None) -> int:
    config = _resolve(args, raw)
    entry = sweep([config])[0]
    if entry.error:
        raise MurimError(entry.error)
    result = entry.result
    out = _out_dir(args)
    _emit(out, args.format, [report.summary_row(config, result.summary)],
          report.rounds_text(result.records, args.format), dumps(config))
    if args.curves:
        report.write_text(out / f"curves.{args.format}",
                          report.table_text(report.curves_rows(result.summary), args.format))
    s = result.summary
    print(f"test={s.final_test:.4f} innoc_drop={s.innocent_drops} liars_surv={s.liars_survived} "
          f"dropouts={s.total_dropouts} -> {out}")
    return 0


def _sweep_plan(args, raw: dict | None) -> tuple[dict, dict[str, list], list[int] | None]:
    if raw is not None and set(raw) == {"base", "grid", "seeds"}:
        base, grid, seeds = raw["base"], dict(raw["grid"]), raw["seeds"]
    else:
        base, grid, seeds = raw, {}, None
    for key, values in args.grid:
        grid[key] = [_scalar(v) for v in values.split(",")]
    if args.seeds is not None:
        seeds = args.seeds
    return base, grid, seeds


def cmd_sweep(args, raw: dict | None) -> int:
    base_raw, grid, seeds = _sweep_plan(args, raw)
    base = _resolve(args, base_raw)
    if seeds is None:
        seeds = [base.seed]
    keys = list(grid)
    points = list(itertools.product(*(grid[k] for k in keys))) or [()]
    configs, labels = [], []
    for point in points:
        cfg = with_overrides(base, dict(zip(keys, point))) if keys else base
        for seed in seeds:
            configs.append(replace(cfg, seed=seed))
            labels.append(dict(zip(keys, point)))
    entries = sweep(configs, jobs=args.jobs)

    rows, logs, failed = [], [], 0
    for i, (entry, label) in enumerate(zip(entries, labels)):
        if entry.error:
            failed += 1
            print(f"run {i} (seed {entry.config.seed}) failed: {entry.error}", file=sys.stderr)
            continue
        rows.append({"run": i, **label, **report.summary_row(entry.config, entry.result.summary)})
        logs.append(report.rounds_text(entry.result.records, args.format, {"run": i, "seed": entry.config.seed}))

    out = _out_dir(args)
    if args.format == "csv":
        # one header, then the body of every per-run log
        rounds = logs[0] + "".join(t.split("\n", 1)[1] for t in logs[1:]) if logs else ""
    else:
        rounds = json.dumps([r for t in logs for r in json.loads(t)], indent=2) + "\n"
    plan = {"base": to_dict(base), "grid": grid, "seeds": seeds}
    _emit(out, args.format, rows, rounds, json.dumps(plan, indent=2, sort_keys=True) + "\n")
    if len(seeds) > 1 and rows:
        means = report.mean_rows([{k: v for k, v in r.items() if k != "run"} for r in rows], keys)
        report.write_text(out / f"summary_mean.{args.format}", report.table_text(means, args.format))
    print(f"{len(rows)} runs ok, {failed} failed -> {out}")
    return 1 if failed else 0


def cmd_attack(args, raw: dict | None) -> int:
    config = _resolve(args, raw)
    if args.kind:
        config = replace(config, attack=replace(config.attack, kind=args.kind))
    if config.attack.kind == ATTACK_NONE:
        raise MurimError("attack.kind: set --kind or attack.kind in the config")
    if args.baseline:
        config = replace(config, aggregator=FEDAVG, reputation_enabled=False)
    seeds = args.seeds if args.seeds is not None else [config.seed]

    rows, logs = [], []
    for seed in seeds:
        cfg = replace(config, seed=seed)
        clean, attacked = attack_pair(cfg, jobs=args.jobs)
        for variant, cfg_v, res in (("clean", clean_twin(cfg), clean), ("attacked", cfg, attacked)):
            rows.append({"variant": variant, **report.summary_row(cfg_v, res.summary)})
            logs.append(report.rounds_text(res.records, args.format, {"variant": variant, "seed": seed}))
        print(f"seed {seed}: delta_acc={attacked.summary.delta_acc:.4f}")

    out = _out_dir(args)
    if args.format == "csv":
        rounds = logs[0] + "".join(t.split("\n", 1)[1] for t in logs[1:])
    else:
        rounds = json.dumps([r for t in logs for r in json.loads(t)], indent=2) + "\n"
    _emit(out, args.format, rows, rounds, dumps(config))
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "attack": cmd_attack}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = _load_raw(args.config)
        return COMMANDS[args.command](args, raw)
    except (MurimError, OSError, yaml.YAMLError) as exc:
        print(f"murim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
