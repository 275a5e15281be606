"""Sensor placement minimizing worst-case missed detection on a feeder.

Bottom-up sweep over edges, deepest first. Whenever the area that would hang
below a sensor at the current edge exceeds the error target, the area is
split at the vertex just below: on a chain the sensor goes on the single
child edge; at a junction some child subtrees are cut off behind new sensors.
Greedy commits to the cheapest feasible cut; optimal mode carries every
feasible cut of minimal size as a parallel scenario and keeps the completion
with the fewest sensors. Every edge is processed, so each final area was
explicitly checked against the target with its final child sensors.

The brute-force oracle evaluates every sensor subset of a given size under
both the worst-area objective and the product-of-correct-probabilities bound;
it exists to benchmark the bottom-up algorithm at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

from .detector import Area, build_areas
from .errors import area_max_error
from .network import (
    CumulativeStats,
    EdgeId,
    Tree,
    VertexId,
    branch_decompose,
    cumulative_stats,
)

__all__ = [
    "PlacementError",
    "PlacementConfig",
    "Placement",
    "generate_edge_order",
    "evaluate_areas",
    "solve_feasibility",
    "solve_budget",
    "OracleResult",
    "brute_force_placement_oracle",
]

# slack added to the target in feasibility comparisons, absorbing CDF rounding
FEAS_SLACK = 1e-12


class PlacementError(RuntimeError):
    """Placement cannot be completed under the configured limits."""


@dataclass(frozen=True)
class PlacementConfig:
    max_outages: int | None = 2
    rho: float | None = None
    cap: int = 1_000_000
    bisect_tol: float = 1e-4
    scenario_cap: int = 100_000


@dataclass(frozen=True)
class Placement:
    """Sensor set (root edge included), the target it meets, per-area errors."""

    sensors: tuple[EdgeId, ...]
    target: float
    mode: str
    area_errors: tuple[tuple[EdgeId, float], ...]

    @property
    def n_added(self) -> int:
        return len(self.sensors) - 1

    @property
    def max_error(self) -> float:
        return max((e for _, e in self.area_errors), default=0.0)

    def to_json(self) -> dict:
        return {
            "sensors": list(self.sensors),
            "target": self.target,
            "mode": self.mode,
            "areas": [{"root": r, "error": e} for r, e in self.area_errors],
        }


def generate_edge_order(tree: Tree) -> tuple[EdgeId, ...]:
    """Deepest-first processing order.

    Branches sorted by maximum edge depth, deepest first (ties on branch id);
    within a branch, bottom edge first. Child branches are always deeper than
    their parent, so every edge is processed after all of its descendants.
    """
    graph = branch_decompose(tree)
    ranked = sorted(
        graph.branches.values(),
        key=lambda b: (-max(tree.depth(e) for e in b.edges), b.id),
    )
    order: list[EdgeId] = []
    for b in ranked:
        order.extend(reversed(b.edges))
    return tuple(order)


def _single_area(tree: Tree, root_sensor: EdgeId, sensor_set: frozenset) -> Area:
    """The area that a sensor at ``root_sensor`` would own under ``sensor_set``."""
    child_sensors: list[EdgeId] = []
    edges: list[EdgeId] = []
    vertices: set[VertexId] = {root_sensor}
    stack = list(tree.children[root_sensor])
    while stack:
        e = stack.pop()
        edges.append(e)
        if e in sensor_set:
            child_sensors.append(e)
            continue
        vertices.add(e)
        stack.extend(tree.children[e])
    edges.sort()
    child_sensors.sort()
    graph = branch_decompose(tree, child_sensors, within=edges)
    return Area(
        root_sensor=root_sensor,
        child_sensors=tuple(child_sensors),
        vertices=frozenset(vertices),
        edges=tuple(edges),
        graph=graph,
    )


class _AreaEvaluator:
    """Caches area errors by (root sensor, child sensors); placements sharing
    a cell never pay for it twice."""

    def __init__(self, tree: Tree, stats: CumulativeStats, config: PlacementConfig):
        self.tree = tree
        self.stats = stats
        self.config = config
        self._cache: dict[tuple[EdgeId, tuple[EdgeId, ...]], float] = {}

    def error(self, root_sensor: EdgeId, sensor_set: frozenset) -> float:
        area = _single_area(self.tree, root_sensor, sensor_set)
        key = (root_sensor, area.child_sensors)
        hit = self._cache.get(key)
        if hit is None:
            hit = area_max_error(
                area,
                self.stats,
                max_outages=self.config.max_outages,
                cap=self.config.cap,
                rho=self.config.rho,
            )
            self._cache[key] = hit
        return hit


def evaluate_areas(
    tree: Tree,
    sensors: Iterable[EdgeId],
    *,
    config: PlacementConfig = PlacementConfig(),
) -> tuple[tuple[EdgeId, float], ...]:
    """Independent re-evaluation: (root sensor, worst error) for every area."""
    stats = cumulative_stats(tree)
    out = []
    for area in build_areas(tree, sensors):
        err = area_max_error(
            area,
            stats,
            max_outages=config.max_outages,
            cap=config.cap,
            rho=config.rho,
        )
        out.append((area.root_sensor, err))
    return tuple(out)


def _root_edge(tree: Tree) -> EdgeId:
    roots = tree.children[tree.root]
    if len(roots) != 1:
        raise PlacementError("feeder root must have exactly one outgoing edge")
    return roots[0]


def solve_feasibility(
    tree: Tree,
    target: float,
    *,
    mode: str = "greedy",
    config: PlacementConfig = PlacementConfig(),
) -> Placement:
    """Fewest-sensor placement with every area error at or below ``target``."""
    if not (0.0 < target):
        raise PlacementError(f"target must be positive, got {target}")
    if mode not in ("greedy", "optimal"):
        raise PlacementError(f"unknown mode {mode!r}")

    order = generate_edge_order(tree)
    root_edge = _root_edge(tree)
    evaluator = _AreaEvaluator(tree, cumulative_stats(tree), config)
    limit = target + FEAS_SLACK

    best: frozenset | None = None
    visits = 0

    def run(t: int, m: frozenset) -> None:
        nonlocal best, visits
        visits += 1
        if visits > config.scenario_cap:
            raise PlacementError(f"scenario cap {config.scenario_cap} exceeded")
        i = t
        while i < len(order):
            if best is not None and len(m) >= len(best):
                return
            e = order[i]
            if evaluator.error(e, m) <= limit:
                i += 1
                continue
            kids = tree.children[e]
            if len(kids) == 0:
                raise PlacementError(f"leaf area of {e!r} violates the target")
            if len(kids) == 1:
                m |= {kids[0]}
                continue
            # junction: find the smallest cut count with a feasible split
            options: list[tuple[float, tuple[EdgeId, ...]]] = []
            for c in range(1, len(kids)):
                for cut in combinations(sorted(kids), c):
                    err = evaluator.error(e, m | set(cut))
                    if err <= limit:
                        options.append((err, cut))
                if options:
                    break
            if not options:
                # cutting every child leaves a single-vertex area: always feasible
                m |= set(kids)
                continue
            options.sort(key=lambda o: (o[0], o[1]))
            if mode == "greedy":
                m |= set(options[0][1])
                continue
            for _, cut in options:
                run(i + 1, m | set(cut))
            return
        if best is None or len(m) < len(best):
            best = m

    run(0, frozenset())
    if best is None:
        raise PlacementError("no feasible placement found")
    sensors = tuple(sorted(best | {root_edge}))
    return Placement(
        sensors=sensors,
        target=target,
        mode=mode,
        area_errors=evaluate_areas(tree, sensors, config=config),
    )


def solve_budget(
    tree: Tree,
    budget: int,
    *,
    mode: str = "greedy",
    config: PlacementConfig = PlacementConfig(),
) -> Placement:
    """Smallest error target reachable with at most ``budget`` added sensors.

    Bisects the target over (0, 1); the added-sensor count is non-increasing
    in the target, so the feasible region is an interval.
    """
    if budget < 0:
        raise PlacementError(f"budget must be non-negative, got {budget}")

    def fits(t: float) -> Placement | None:
        p = solve_feasibility(tree, t, mode=mode, config=config)
        return p if p.n_added <= budget else None

    hi = 1.0
    best = fits(hi)
    if best is None:
        raise PlacementError("even the trivial target is over budget")
    lo = 0.0
    while hi - lo > config.bisect_tol:
        mid = 0.5 * (lo + hi)
        p = fits(mid)
        if p is None:
            lo = mid
        else:
            hi = mid
            best = p
    return best


@dataclass(frozen=True)
class OracleResult:
    """Exhaustive-search optima for both placement objectives."""

    minmax_placement: tuple[EdgeId, ...]
    minmax_value: float
    minmax_product: float
    product_placement: tuple[EdgeId, ...]
    product_value: float
    evaluated: int = field(default=0)


def brute_force_placement_oracle(
    tree: Tree,
    n_added: int,
    *,
    config: PlacementConfig = PlacementConfig(),
) -> OracleResult:
    """Evaluate every placement of ``n_added`` sensors (plus the root edge).

    Scores each subset under (a) the worst area error and (b) the product of
    per-area correct-detection minima, and returns the optimum of each.
    """
    root_edge = _root_edge(tree)
    candidates = sorted(e for e in tree.edges if e != root_edge)
    if n_added > len(candidates):
        raise PlacementError(f"cannot add {n_added} sensors to {len(candidates)} edges")
    evaluator = _AreaEvaluator(tree, cumulative_stats(tree), config)

    best_mm: tuple[float, tuple[EdgeId, ...]] | None = None
    best_mm_prod = 0.0
    best_pr: tuple[float, tuple[EdgeId, ...]] | None = None
    count = 0
    for combo in combinations(candidates, n_added):
        count += 1
        sensor_set = frozenset(combo) | {root_edge}
        worst = 0.0
        prod = 1.0
        for s in sorted(sensor_set):
            err = evaluator.error(s, sensor_set)
            worst = max(worst, err)
            prod *= 1.0 - err
        placement = tuple(sorted(sensor_set))
        if best_mm is None or (worst, placement) < best_mm:
            best_mm = (worst, placement)
            best_mm_prod = prod
        if best_pr is None or (-prod, placement) < best_pr:
            best_pr = (-prod, placement)
    assert best_mm is not None and best_pr is not None
    return OracleResult(
        minmax_placement=best_mm[1],
        minmax_value=best_mm[0],
        minmax_product=best_mm_prod,
        product_placement=best_pr[1],
        product_value=-best_pr[0],
        evaluated=count,
    )
