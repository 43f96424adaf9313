"""Command-line entry point: ``fadesched {lpf,region,simulate,sweep}``.

Exit codes: 0 success, 1 runtime failure, 2 bad input (parse/validation),
3 an enumeration cap was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from pydantic import ValidationError

from . import __version__
from .analysis import lambda_membership, lambdahat_membership, lpf, gfs_stability_guaranteed
from .config import SCHEMA_VERSION, ExperimentConfig, arrivals_for_load, load_config, preset
from .errors import CapacityError, FadeSchedError
from .schedulers import SchedulerKind
from .sim import estimate_stability, load_sweep, replication_seed, run

log = logging.getLogger("fadesched")

RUN_CSV_HEADER = ("slot", "total_queue")
SWEEP_CSV_HEADER = (
    "load",
    "scheduler",
    "mean_total_queue",
    "normalized_slope",
    "verdict",
    "stable_reps",
    "unstable_reps",
    "replications",
)

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class InputError(Exception):
    pass


def _setup_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("FADESCHED_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _num(x: float) -> str:
    return repr(float(x))


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load(args: argparse.Namespace) -> ExperimentConfig:
    if bool(args.config) == bool(args.preset):
        raise InputError("give exactly one of --config or --preset")
    if args.preset:
        try:
            cfg = preset(args.preset)
        except KeyError as e:
            raise InputError(str(e.args[0])) from None
    else:
        try:
            cfg = load_config(args.config)
        except FileNotFoundError:
            raise InputError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as e:
            raise InputError(f"{args.config}: invalid JSON ({e})") from None
    overrides: dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        overrides["horizon"] = args.horizon
    if overrides:
        data = cfg.echo()
        data.setdefault("sim", {}).update(overrides)
        cfg = ExperimentConfig.model_validate(data)
    return cfg


def _require(cfg: ExperimentConfig, *fields: str) -> None:
    missing = [f for f in fields if getattr(cfg, f) is None]
    if missing:
        raise InputError(f"config is missing required section(s): {', '.join(missing)}")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_lpf(args: argparse.Namespace) -> int:
    cfg = _load(args)
    graph = cfg.graph.build()
    report = lpf(graph, cfg.reference_rates)
    payload = {"schema_version": SCHEMA_VERSION, "kind": "lpf", "link_ids": list(graph.link_ids)}
    payload.update(report.to_dict())
    if args.out:
        _write_json(_out_dir(args) / "lpf.json", payload)
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"links: {graph.num_links}  subsets evaluated: {report.subsets_evaluated}")
        print(f"local pooling factor sigma* = {report.sigma_star:.12g}")
        print(f"attained on links {list(report.subset_ids)}")
    return 0


def cmd_region(args: argparse.Namespace) -> int:
    cfg = _load(args)
    _require(cfg, "fading")
    graph = cfg.graph.build()
    model = cfg.fading.build()
    if cfg.lam is not None:
        lam = np.array(cfg.lam)
    elif cfg.arrivals is not None:
        lam = cfg.arrivals.build(model).mean_rate_vector(model.pi)
    else:
        raise InputError("config needs 'lambda' or an 'arrivals' section")
    means = model.mean_rates()
    full = lambda_membership(lam, model, graph)
    static = lambdahat_membership(lam, means, graph)
    report = lpf(graph, means)
    guaranteed = gfs_stability_guaranteed(lam, report.sigma_star, means, graph)
    ids = list(graph.link_ids)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "region",
        "link_ids": ids,
        "lambda": lam.tolist(),
        "mean_rates": means.tolist(),
        "fading_region": full.to_dict(ids),
        "mean_rate_region": static.to_dict(ids),
        "sigma_star": report.sigma_star,
        "gfs_guaranteed": guaranteed,
    }
    if args.out:
        _write_json(_out_dir(args) / "region.json", payload)
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"lambda = {lam.tolist()}")
        print(f"in fading region:            {full.member}")
        print(f"in mean-rate region:         {static.member}")
        print(f"sigma* = {report.sigma_star:.12g}; GFS stability guaranteed: {guaranteed}")
    return 0


def write_run_csv(path: Path, metrics, link_ids: Sequence[Any]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_CSV_HEADER + tuple(f"q_{lid}" for lid in link_ids))
        for slot, total, row in zip(metrics.sample_slots, metrics.sample_totals, metrics.sample_queues):
            w.writerow([int(slot), _num(total), *(_num(x) for x in row)])


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    _require(cfg, "fading")
    graph = cfg.graph.build()
    model = cfg.fading.build()
    if args.load is not None:
        arrivals = arrivals_for_load(cfg, args.load)
    else:
        _require(cfg, "arrivals")
        arrivals = cfg.arrivals.build(model)
    kinds = cfg.scheduler_kinds()
    if args.scheduler:
        kinds = [SchedulerKind.parse(s) for s in args.scheduler]
    thresholds = cfg.thresholds.build()
    out = _out_dir(args)
    runs = []
    for kind in kinds:
        sim_cfg = cfg.sim.build(kind)
        m = run(sim_cfg, graph, model, arrivals).metrics
        verdict = estimate_stability(m, thresholds)
        csv_name = f"run_{kind.label.replace(':', '_')}.csv"
        write_run_csv(out / csv_name, m, graph.link_ids)
        entry = m.summary()
        entry.update(
            verdict=verdict.verdict,
            normalized_slope=verdict.normalized_slope,
            verdict_reason=verdict.reason,
            csv=csv_name,
        )
        runs.append(entry)
        print(
            f"{kind.label:>10}: {verdict.verdict:<12} avg total queue {m.time_avg_total:.4g}"
            f"  final {m.final_total:.4g}  normalized slope {verdict.normalized_slope:.3g}"
        )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "simulate",
        "config": cfg.echo(),
        "seed": cfg.sim.seed,
        "load": args.load,
        "arrival_rates": arrivals.mean_rate_vector(model.pi).tolist(),
        "runs": runs,
    }
    _write_json(out / "summary.json", summary)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    _require(cfg, "fading", "sweep")
    graph = cfg.graph.build()
    model = cfg.fading.build()
    sweep = cfg.sweep
    result = load_sweep(
        sweep.direction,
        sweep.loads,
        sweep.replications,
        cfg.sim.build(),
        graph,
        model,
        cfg.scheduler_kinds(),
        process=sweep.process,
        jobs=args.jobs,
        thresholds=cfg.thresholds.build(),
    )
    out = _out_dir(args)
    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_CSV_HEADER)
        for r in result.rows:
            w.writerow(
                [_num(r.load), r.scheduler, _num(r.mean_total_queue), _num(r.normalized_slope),
                 r.verdict, r.stable_reps, r.unstable_reps, r.replications]
            )
            print(f"load {r.load:<6g} {r.scheduler:>10}: {r.verdict:<12} mean total queue {r.mean_total_queue:.4g}")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "config": cfg.echo(),
        "replication_seeds": [replication_seed(cfg.sim.seed, r) for r in range(sweep.replications)],
        "rows": [r.__dict__ for r in result.rows],
        "runs": [r.__dict__ for r in result.runs],
    }
    _write_json(out / "sweep_summary.json", summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fadesched", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_default: str | None) -> None:
        p.add_argument("--config", metavar="PATH", help="experiment or graph JSON file")
        p.add_argument("--preset", metavar="NAME", help="built-in configuration")
        p.add_argument("--out", metavar="DIR", default=out_default, help="output directory")

    p = sub.add_parser("lpf", help="local pooling factor of a graph")
    common(p, None)
    p.add_argument("--json", action="store_true", help="print the JSON report")
    p.set_defaults(func=cmd_lpf)

    p = sub.add_parser("region", help="capacity-region membership of the config's lambda")
    common(p, None)
    p.add_argument("--json", action="store_true", help="print the JSON report")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("simulate", help="run each configured scheduler once")
    common(p, "out")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--horizon", type=int, metavar="SLOTS")
    p.add_argument("--load", type=float, help="use load * sweep.direction as i.i.d. arrival rates")
    p.add_argument("--scheduler", action="append", help="override the scheduler list (repeatable)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="load sweep over the configured grid")
    common(p, "out")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--horizon", type=int, metavar="SLOTS")
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.set_defaults(func=cmd_sweep)
    return parser


def _format_validation(e: ValidationError) -> str:
    lines = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err["loc"])
        msg = err["msg"].removeprefix("Value error, ")
        lines.append(f"{loc}: {msg}" if loc else msg)
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"invalid configuration:\n{_format_validation(e)}", file=sys.stderr)
        return 2
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return 3
    except (InputError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FadeSchedError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
