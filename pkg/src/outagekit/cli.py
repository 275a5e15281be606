"""Command-line front end.

Subcommands: enumerate, detect, evaluate, place, simulate, sweep. Outputs are
JSON (CSV for sweep tables) on stdout unless --out is given. Exit codes:
0 success, 1 malformed input (bad files, bad arguments), 2 the computation
cannot be completed (inconsistent observation, enumeration cap, placement
limits); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from .detector import (
    DetectionError,
    build_areas,
    detect,
    observation_from_json,
)
from .errors import area_max_error
from .hypotheses import EnumerationCapError, enumerate_unique
from .network import FeederFormatError, branch_decompose, cumulative_stats, load_feeder
from .placement import (
    PlacementConfig,
    PlacementError,
    solve_budget,
    solve_feasibility,
)
from .sim import (
    SweepConfig,
    empirical_detection_rate,
    sweep,
    write_sweep_csv,
    write_sweep_histograms,
)

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for infeasibility
    def error(self, message: str):  # type: ignore[override]
        raise _UsageError(message)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FeederFormatError(f"cannot read {path!r}: {exc}") from exc


def _load_sensor_list(path: str) -> list[str]:
    data = _load_json(path)
    if isinstance(data, dict) and "sensors" in data:
        data = data["sensors"]
    if not isinstance(data, list):
        raise FeederFormatError("placement file must hold a sensor list")
    return [str(e) for e in data]


def _parse_outage(text: str | None) -> frozenset:
    if not text:
        return frozenset()
    return frozenset(part.strip() for part in text.split(",") if part.strip())


def _cmd_enumerate(args) -> None:
    tree, _ = load_feeder(args.feeder)
    hyps = enumerate_unique(
        branch_decompose(tree), max_outages=args.max_outages, cap=args.cap
    )
    _emit(json.dumps([sorted(h) for h in hyps], indent=2), args.out)


def _cmd_detect(args) -> None:
    tree, sensors = load_feeder(args.feeder)
    obs = observation_from_json(_load_json(args.obs))
    det = detect(
        tree,
        sensors,
        obs,
        max_outages=args.max_outages,
        rho=args.rho,
        cap=args.cap,
    )
    _emit(json.dumps(det.to_json(), indent=2), args.out)


def _cmd_evaluate(args) -> None:
    tree, sensors = load_feeder(args.feeder)
    if args.placement is not None:
        sensors = tuple(_load_sensor_list(args.placement))
    stats = cumulative_stats(tree)
    areas = []
    worst = 0.0
    for area in build_areas(tree, sensors):
        err = area_max_error(
            area, stats, max_outages=args.max_outages, cap=args.cap, rho=args.rho
        )
        worst = max(worst, err)
        areas.append({"root": area.root_sensor, "error": err})
    _emit(json.dumps({"areas": areas, "max_error": worst}, indent=2), args.out)


def _cmd_place(args) -> None:
    tree, _ = load_feeder(args.feeder)
    config = PlacementConfig(max_outages=args.max_outages, rho=args.rho, cap=args.cap)
    if args.target is not None:
        placement = solve_feasibility(tree, args.target, mode=args.mode, config=config)
    else:
        placement = solve_budget(tree, args.budget, mode=args.mode, config=config)
    _emit(json.dumps(placement.to_json(), indent=2), args.out)


def _cmd_simulate(args) -> None:
    tree, sensors = load_feeder(args.feeder)
    if args.placement is not None:
        sensors = tuple(_load_sensor_list(args.placement))
    rate, se = empirical_detection_rate(
        tree,
        sensors,
        _parse_outage(args.outage),
        args.trials,
        seed=args.seed,
        max_outages=args.max_outages,
        rho=args.rho,
        cap=args.cap,
    )
    payload = {"error_rate": rate, "stderr": se, "trials": args.trials}
    _emit(json.dumps(payload, indent=2), args.out)


def _cmd_sweep(args) -> None:
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise FeederFormatError("sweep config must be a JSON object")
    known = {
        "kappas",
        "targets",
        "n_vertices",
        "seed",
        "mode",
        "max_outages",
        "max_children",
        "mean_range",
        "threads",
    }
    fields = {k: v for k, v in raw.items() if k in known}
    for key in ("kappas", "targets", "mean_range"):
        if key in fields:
            fields[key] = tuple(fields[key])
    if args.seed is not None:
        fields["seed"] = args.seed
    if args.threads is not None:
        fields["threads"] = args.threads
    config = SweepConfig(**fields)
    result = sweep(config)

    out_dir = args.out or raw.get("out_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "sweep.csv")
    write_sweep_csv(result, csv_path)
    written = write_sweep_histograms(result, out_dir)
    sys.stdout.write(json.dumps({"csv": csv_path, "histograms": written}, indent=2) + "\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="outagekit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, rho: bool = True) -> None:
        p.add_argument("--feeder", required=True, help="feeder JSON file")
        p.add_argument("--max-outages", type=int, default=2, dest="max_outages")
        p.add_argument("--cap", type=int, default=1_000_000, help="hypothesis cap per area")
        p.add_argument("--out", default=None, help="write output to a file instead of stdout")
        if rho:
            p.add_argument("--rho", type=float, default=None, help="per-edge outage prior")

    p = sub.add_parser("enumerate", help="list unique outage hypotheses")
    common(p, rho=False)
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("detect", help="detect outages from an observation file")
    common(p)
    p.add_argument("--obs", required=True, help="observation JSON file")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("evaluate", help="per-area worst missed-detection errors")
    common(p)
    p.add_argument("--placement", default=None, help="placement JSON overriding feeder sensors")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("place", help="compute a sensor placement")
    common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--target", type=float, default=None, help="error target in (0, 1)")
    group.add_argument("--budget", type=int, default=None, help="added-sensor budget")
    p.add_argument("--mode", choices=("greedy", "optimal"), default="greedy")
    p.set_defaults(func=_cmd_place)

    p = sub.add_parser("simulate", help="empirical detection error by Monte Carlo")
    common(p)
    p.add_argument("--placement", default=None, help="placement JSON overriding feeder sensors")
    p.add_argument("--outage", default=None, help="true outage edges, comma separated")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="density/error grid experiment")
    p.add_argument("--config", required=True, help="sweep config JSON file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FeederFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DetectionError, EnumerationCapError, PlacementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
