"""Case-study machinery: synthetic feeders, forecast scaling law, Monte Carlo.

The forecast-error scaling law kappa(W) = sqrt(3562/W + 41.9) yields percent
(large aggregates approach 6.5%, not 647%); it is stored as a fraction here.
Synthetic trees come from a seeded recursive-attachment process, standing in
for utility feeders: sweeps only need them as substrates. Sampled loads are
Gaussian and may go negative; downstream classification thresholds |flow|.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .detector import Observation, build_areas, detect
from .errors import all_missed_detection, pattern_hypothesis_sets
from .network import EdgeId, Tree, build_tree, cumulative_stats
from .placement import Placement, PlacementConfig, solve_feasibility

__all__ = [
    "KAPPA_LAW_A",
    "KAPPA_LAW_B",
    "kappa_of_load",
    "ForecastModel",
    "random_tree",
    "simulate_outage",
    "empirical_detection_rate",
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "sweep",
    "write_sweep_csv",
    "write_sweep_histograms",
]

# scaling-law constants; the law yields kappa in percent
KAPPA_LAW_A = 3562.0
KAPPA_LAW_B = 41.9


def kappa_of_load(w: float) -> float:
    """Coefficient of variation (fraction) of a forecast for aggregate load ``w``."""
    if not (w > 0.0):
        raise ValueError(f"aggregate load must be positive, got {w}")
    return math.sqrt(KAPPA_LAW_A / w + KAPPA_LAW_B) / 100.0


@dataclass(frozen=True)
class ForecastModel:
    """Assigns forecast standard deviations from means.

    ``fixed_kappa`` applies one coefficient of variation everywhere;
    ``scaling_law`` derives it per vertex from the vertex's own mean load.
    Zero-mean vertices get zero deviation under either mode.
    """

    mode: str = "fixed_kappa"
    kappa: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("fixed_kappa", "scaling_law"):
            raise ValueError(f"unknown forecast mode {self.mode!r}")
        if self.mode == "fixed_kappa" and (self.kappa is None or self.kappa < 0):
            raise ValueError("fixed_kappa mode needs a non-negative kappa")

    def sigma(self, mean: float) -> float:
        if mean <= 0.0:
            return 0.0
        k = self.kappa if self.mode == "fixed_kappa" else kappa_of_load(mean)
        return k * mean  # type: ignore[operator]

    def apply(self, tree: Tree) -> Tree:
        var = {v: self.sigma(tree.mean[v]) ** 2 for v in tree.edges}
        return tree.with_loads(var=var)


def random_tree(
    n: int,
    *,
    seed: int = 0,
    max_children: int = 3,
    mean_range: tuple[float, float] = (0.5, 1.5),
) -> Tree:
    """Seeded random recursive-attachment tree with ``n`` vertices.

    The root has a single outgoing edge (the feeder head); every later vertex
    attaches uniformly among non-root vertices that still have capacity.
    Means are uniform in ``mean_range``; variances are zero until a
    :class:`ForecastModel` is applied.
    """
    if n < 2:
        raise ValueError("need at least a root and one load vertex")
    rng = random.Random(seed)
    lo, hi = mean_range
    records = [
        {"id": "v0", "parent": None},
        {"id": "v1", "parent": "v0", "mean": rng.uniform(lo, hi)},
    ]
    open_slots = {"v1": max_children}
    for i in range(2, n):
        parent = rng.choice(sorted(open_slots))
        open_slots[parent] -= 1
        if open_slots[parent] == 0:
            del open_slots[parent]
        vid = f"v{i}"
        records.append({"id": vid, "parent": parent, "mean": rng.uniform(lo, hi)})
        open_slots[vid] = max_children
    return build_tree(records)


def simulate_outage(
    tree: Tree,
    sensors: Iterable[EdgeId],
    h_true: Iterable[EdgeId],
    *,
    model: ForecastModel | None = None,
    seed: int | None = 0,
    rng: np.random.Generator | None = None,
) -> Observation:
    """Draw loads from the forecast distribution and meter exact flows.

    A sensor reads the sum of drawn loads below it that remain connected to
    the root under ``h_true``; sensors at or below an outage edge read zero.
    """
    if model is not None:
        tree = model.apply(tree)
    hyp = frozenset(h_true)
    for e in hyp:
        if e not in tree.parent or e == tree.root:
            raise ValueError(f"outage on unknown edge {e!r}")
    if rng is None:
        rng = np.random.default_rng(seed)

    draws: dict[str, float] = {}
    connected: dict[str, bool] = {tree.root: True}
    subtree_flow: dict[str, float] = {}
    for v in tree.order[1:]:
        connected[v] = connected[tree.parent[v]] and v not in hyp  # type: ignore[index]
        sd = math.sqrt(tree.var[v])
        x = tree.mean[v] + sd * rng.standard_normal() if sd > 0 else tree.mean[v]
        draws[v] = x if connected[v] else 0.0
    for v in reversed(tree.order):
        if v == tree.root:
            continue
        subtree_flow[v] = draws[v] + sum(subtree_flow[c] for c in tree.children[v])

    flows = {s: subtree_flow[s] for s in sensors}
    forecasts = {v: tree.mean[v] for v in tree.edges}
    return Observation(flows=flows, forecasts=forecasts)


def empirical_detection_rate(
    tree: Tree,
    sensors: Iterable[EdgeId],
    h_true: Iterable[EdgeId],
    n_trials: int,
    *,
    model: ForecastModel | None = None,
    seed: int = 0,
    max_outages: int | None = 2,
    rho: float | None = None,
    cap: int = 1_000_000,
) -> tuple[float, float]:
    """Fraction of trials where detection differs from the truth, with stderr."""
    if model is not None:
        tree = model.apply(tree)
    sensor_list = tuple(sensors)
    hyp = frozenset(h_true)
    rng = np.random.default_rng(seed)
    wrong = 0
    for _ in range(n_trials):
        obs = simulate_outage(tree, sensor_list, hyp, rng=rng)
        est = detect(
            tree, sensor_list, obs, max_outages=max_outages, rho=rho, cap=cap
        )
        if est.hypothesis != hyp:
            wrong += 1
    p = wrong / n_trials
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n_trials) / n_trials)
    return p, se


@dataclass(frozen=True)
class SweepConfig:
    """Grid experiment settings.

    Case studies follow the single-outage convention by default; the full
    pairwise hypothesis space is available by raising ``max_outages``.
    """

    kappas: tuple[float, ...] = (0.01, 0.3)
    targets: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3)
    n_vertices: int = 100
    seed: int = 0
    mode: str = "greedy"
    max_outages: int | None = 1
    max_children: int = 3
    mean_range: tuple[float, float] = (0.5, 1.5)
    threads: int = 1


@dataclass(frozen=True)
class SweepRow:
    kappa: float
    target: float
    n_sensors: int
    density: float
    mean_err: float
    max_err: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    histograms: dict = field(default_factory=dict)  # (kappa, target) -> tuple of errors


def _error_distribution(tree: Tree, placement: Placement, config: SweepConfig) -> tuple[float, ...]:
    """Analytic missed detection of every (area, pattern, hypothesis) triple."""
    stats = cumulative_stats(tree)
    pconfig = PlacementConfig(max_outages=config.max_outages)
    errors: list[float] = []
    for area in build_areas(tree, placement.sensors):
        for _, hset in pattern_hypothesis_sets(
            area, stats, max_outages=pconfig.max_outages, cap=pconfig.cap, rho=pconfig.rho
        ):
            errors.extend(all_missed_detection(hset))
    return tuple(errors)


def _grid_point(args: tuple) -> tuple[SweepRow, tuple[float, ...]]:
    tree, kappa, target, config = args
    pconfig = PlacementConfig(max_outages=config.max_outages)
    placement = solve_feasibility(tree, target, mode=config.mode, config=pconfig)
    hist = _error_distribution(tree, placement, config)
    n_edges = len(tree.edges)
    row = SweepRow(
        kappa=kappa,
        target=target,
        n_sensors=len(placement.sensors),
        density=len(placement.sensors) / n_edges,
        mean_err=float(np.mean(hist)) if hist else 0.0,
        max_err=float(np.max(hist)) if hist else 0.0,
    )
    return row, hist


def sweep(config: SweepConfig = SweepConfig()) -> SweepResult:
    """Placement density and error distribution over a (kappa, target) grid.

    One tree per kappa (same topology seed, rescaled forecast deviations), so
    the target axis isolates the effect of the error budget.
    """
    base = random_tree(
        config.n_vertices,
        seed=config.seed,
        max_children=config.max_children,
        mean_range=config.mean_range,
    )
    tasks = []
    for kappa in config.kappas:
        tree = ForecastModel(mode="fixed_kappa", kappa=kappa).apply(base)
        for target in config.targets:
            tasks.append((tree, kappa, target, config))

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(_grid_point, tasks))
    else:
        outcomes = [_grid_point(t) for t in tasks]

    rows = []
    hists = {}
    for (row, hist), (_, kappa, target, _) in zip(outcomes, tasks):
        rows.append(row)
        hists[(kappa, target)] = hist
    return SweepResult(rows=tuple(rows), histograms=hists)


def write_sweep_csv(result: SweepResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kappa", "target", "n_sensors", "density", "mean_err", "max_err"])
        for r in result.rows:
            writer.writerow([r.kappa, r.target, r.n_sensors, r.density, r.mean_err, r.max_err])


def write_sweep_histograms(result: SweepResult, out_dir: str) -> list[str]:
    """One JSON file per grid point with the raw per-hypothesis error list."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for (kappa, target), errors in sorted(result.histograms.items()):
        name = f"hist_kappa{kappa:g}_target{target:g}.json"
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            json.dump(
                {"kappa": kappa, "target": target, "errors": list(errors)},
                fh,
                indent=1,
            )
        written.append(path)
    return written
