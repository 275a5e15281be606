"""Decoupled MAP outage detection from noiseless edge-flow sensors.

Sensors partition the feeder into areas, one per sensor: the cell between a
root sensor and its nearest sensed descendants. Subtracting child readings
from the root reading gives a scalar whose distribution under each local
hypothesis is Gaussian with moments from subtree-cumulative forecasts, so
each positive-flow area runs an independent scalar test and the global
estimate is the union of the local picks. ``detect_centralized_oracle``
solves the same problem as one joint multivariate test over all positive
sensors; it is exponentially more expensive and exists to validate the
decoupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .hypotheses import (
    Hypothesis,
    enumerate_unique,
    hypothesis_sort_key,
    local_hypotheses,
)
from .network import (
    BranchGraph,
    CumulativeStats,
    EdgeId,
    Tree,
    VertexId,
    branch_decompose,
    cumulative_stats,
)

__all__ = [
    "DetectionError",
    "InconsistentObservationError",
    "Area",
    "build_areas",
    "Observation",
    "observation_from_json",
    "effective_measurement",
    "hypothesis_stats",
    "AreaDecision",
    "Detection",
    "detect",
    "detect_centralized_oracle",
]

# flow readings this far below the feeder's total mean load count as zero
FLOW_EPS_FRACTION = 1e-9


class DetectionError(RuntimeError):
    """Detection cannot proceed (missing readings, empty hypothesis set...)."""


class InconsistentObservationError(DetectionError):
    """A sensor reads positive below a sensor reading zero: physically impossible."""


@dataclass(frozen=True)
class Area:
    """Partition cell between one root sensor and its nearest sensed descendants.

    ``edges`` is the enumerable outage universe: everything strictly below
    the root sensor down to and including the child sensor edges. ``vertices``
    are the loads whose sum the effective measurement observes.
    """

    root_sensor: EdgeId
    child_sensors: tuple[EdgeId, ...]
    vertices: frozenset
    edges: tuple[EdgeId, ...]
    graph: BranchGraph


def _normalize_sensors(tree: Tree, sensors: Iterable[EdgeId]) -> tuple[EdgeId, ...]:
    root_edges = tree.children[tree.root]
    if len(root_edges) != 1:
        raise DetectionError("feeder root must have exactly one outgoing edge")
    out = set(sensors) | {root_edges[0]}
    for e in out:
        if e not in tree.parent or e == tree.root:
            raise DetectionError(f"sensor on unknown edge {e!r}")
    return tuple(sorted(out))


def build_areas(tree: Tree, sensors: Iterable[EdgeId]) -> tuple[Area, ...]:
    """One area per sensor. The root edge is metered implicitly."""
    sensor_set = set(_normalize_sensors(tree, sensors))
    areas = []
    for s in sorted(sensor_set):
        child_sensors: list[EdgeId] = []
        edges: list[EdgeId] = []
        vertices: set[VertexId] = {s}
        stack = list(tree.children[s])
        while stack:
            e = stack.pop()
            edges.append(e)
            if e in sensor_set:
                child_sensors.append(e)
                continue  # everything below belongs to the child's own area
            vertices.add(e)
            stack.extend(tree.children[e])
        edges.sort()
        child_sensors.sort()
        graph = branch_decompose(tree, child_sensors, within=edges)
        areas.append(
            Area(
                root_sensor=s,
                child_sensors=tuple(child_sensors),
                vertices=frozenset(vertices),
                edges=tuple(edges),
                graph=graph,
            )
        )
    return tuple(areas)


@dataclass(frozen=True)
class Observation:
    """Sensor flow readings plus (optionally) the forecast means in force."""

    flows: Mapping[EdgeId, float]
    forecasts: Mapping[VertexId, float] | None = None


def observation_from_json(data: Mapping[str, object]) -> Observation:
    if not isinstance(data, Mapping) or "flows" not in data:
        raise DetectionError("observation must be an object with a 'flows' mapping")
    flows = {str(k): float(v) for k, v in data["flows"].items()}  # type: ignore[union-attr]
    forecasts = None
    if data.get("forecasts") is not None:
        forecasts = {str(k): float(v) for k, v in data["forecasts"].items()}  # type: ignore[union-attr]
    return Observation(flows=flows, forecasts=forecasts)


def effective_measurement(area: Area, flows: Mapping[EdgeId, float]) -> float:
    """Root reading minus the sum of child-sensor readings."""
    try:
        return flows[area.root_sensor] - sum(flows[c] for c in area.child_sensors)
    except KeyError as exc:
        raise DetectionError(f"missing flow reading for sensor {exc.args[0]!r}") from exc


def hypothesis_stats(
    area: Area,
    hypothesis: Hypothesis,
    pattern: Mapping[EdgeId, bool],
    stats: CumulativeStats,
) -> tuple[float, float]:
    """Moments of the effective measurement under one local hypothesis.

    Start from the cumulative sums below the root sensor, remove every
    subtree cut by the hypothesis, and remove each positive child sensor's
    subtree (its reading is subtracted from the measurement). A zero child
    sensor sits below some hypothesis edge, so its subtree is already gone.
    """
    mu = stats.mean_below[area.root_sensor]
    var = stats.var_below[area.root_sensor]
    for e in hypothesis:
        mu -= stats.mean_below[e]
        var -= stats.var_below[e]
    for c in area.child_sensors:
        if pattern[c]:
            mu -= stats.mean_below[c]
            var -= stats.var_below[c]
    if var <= 0.0:
        raise ValueError(
            f"non-positive variance {var} for hypothesis {sorted(hypothesis)}: "
            "remaining loads carry no forecast uncertainty"
        )
    return mu, var


@dataclass(frozen=True)
class AreaDecision:
    root_sensor: EdgeId
    hypothesis: Hypothesis
    loglik: float


@dataclass(frozen=True)
class Detection:
    """Global estimate (union of local picks) plus the per-area decisions."""

    hypothesis: Hypothesis
    areas: tuple[AreaDecision, ...]

    def to_json(self) -> dict:
        return {
            "global": sorted(self.hypothesis),
            "areas": [
                {
                    "root": a.root_sensor,
                    "hypothesis": sorted(a.hypothesis),
                    "loglik": a.loglik,
                }
                for a in self.areas
            ],
        }


def _flow_signs(
    tree: Tree,
    sensors: tuple[EdgeId, ...],
    obs: Observation,
    total_mean: float,
) -> dict[EdgeId, bool]:
    eps = max(FLOW_EPS_FRACTION * total_mean, 1e-300)
    positive: dict[EdgeId, bool] = {}
    for s in sensors:
        if s not in obs.flows:
            raise DetectionError(f"missing flow reading for sensor {s!r}")
        positive[s] = abs(obs.flows[s]) > eps
    # a positive reading below a dark sensor is impossible
    for s in sensors:
        v = tree.parent[s]
        while v is not None:
            if v in positive:
                if positive[s] and not positive[v]:
                    raise InconsistentObservationError(
                        f"sensor {s!r} reads positive below dark sensor {v!r}"
                    )
                break
            v = tree.parent[v]
    return positive


def _forecast_tree(tree: Tree, obs: Observation) -> Tree:
    if obs.forecasts is None:
        return tree
    means = {v: m for v, m in obs.forecasts.items() if v != tree.root}
    return tree.with_loads(mean=means)


def _pick(
    candidates: list[tuple[Hypothesis, float]],
) -> tuple[Hypothesis, float]:
    """Highest log-likelihood; ties broken by fewest edges, then edge ids."""
    return min(candidates, key=lambda c: (-c[1], hypothesis_sort_key(c[0])))


def detect(
    tree: Tree,
    sensors: Iterable[EdgeId],
    obs: Observation,
    *,
    max_outages: int | None = 2,
    rho: float | None = None,
    cap: int = 1_000_000,
) -> Detection:
    """Decoupled MAP estimate of the outage hypothesis.

    Each positive-flow area picks the local hypothesis maximizing the
    Gaussian log-likelihood of its effective measurement (plus ``|H| ln rho``
    when a prior is configured); dark areas are accounted for by the covering
    edge chosen in the nearest live ancestor area. A dark root sensor short-
    circuits to the root-edge outage.
    """
    sensor_list = _normalize_sensors(tree, sensors)
    ftree = _forecast_tree(tree, obs)
    stats = cumulative_stats(ftree)
    positive = _flow_signs(tree, sensor_list, obs, stats.total_mean)

    root_edge = tree.children[tree.root][0]
    if not positive[root_edge]:
        return Detection(hypothesis=frozenset({root_edge}), areas=())

    log_rho = math.log(rho) if rho is not None else 0.0
    decisions: list[AreaDecision] = []
    picks: list[Hypothesis] = []
    for area in build_areas(tree, sensor_list):
        if not positive[area.root_sensor]:
            continue
        pattern = {c: positive[c] for c in area.child_sensors}
        local = local_hypotheses(
            area.graph, pattern, max_outages=max_outages, cap=cap
        )
        if not local:
            raise DetectionError(
                f"no hypothesis consistent with flows in area of {area.root_sensor!r}"
            )
        ds = effective_measurement(area, obs.flows)
        scored: list[tuple[Hypothesis, float]] = []
        for h in local:
            mu, var = hypothesis_stats(area, h, pattern, stats)
            ll = -0.5 * math.log(2.0 * math.pi * var) - (ds - mu) ** 2 / (2.0 * var)
            if rho is not None:
                ll += len(h) * log_rho
            scored.append((h, ll))
        hyp, ll = _pick(scored)
        decisions.append(AreaDecision(area.root_sensor, hyp, ll))
        picks.append(hyp)

    combined: frozenset = frozenset().union(*picks) if picks else frozenset()
    return Detection(hypothesis=combined, areas=tuple(decisions))


def detect_centralized_oracle(
    tree: Tree,
    sensors: Iterable[EdgeId],
    obs: Observation,
    *,
    max_outages: int | None = 2,
    rho: float | None = None,
    cap: int = 1_000_000,
) -> Hypothesis:
    """Joint MAP over the full unique-hypothesis set; validation reference.

    Scores every hypothesis consistent with the flow signs by the joint
    Gaussian likelihood of all positive readings (covariances follow sensor
    nesting). Same tie-breaking as :func:`detect`.
    """
    from scipy.stats import multivariate_normal

    sensor_list = _normalize_sensors(tree, sensors)
    ftree = _forecast_tree(tree, obs)
    stats = cumulative_stats(ftree)
    positive = _flow_signs(tree, sensor_list, obs, stats.total_mean)

    hypotheses = enumerate_unique(
        branch_decompose(tree), max_outages=max_outages, cap=cap
    )
    live = [s for s in sensor_list if positive[s]]
    readings = np.array([obs.flows[s] for s in live])
    log_rho = math.log(rho) if rho is not None else 0.0

    scored: list[tuple[Hypothesis, float]] = []
    for h in hypotheses:
        ok = True
        for s in sensor_list:
            covered = any(tree.is_ancestor_edge(e, s) for e in h)
            if covered == positive[s]:
                ok = False
                break
        if not ok:
            continue
        mean = np.empty(len(live))
        rem_var = np.empty(len(live))
        for i, s in enumerate(live):
            mu = stats.mean_below[s]
            var = stats.var_below[s]
            for e in h:
                if e != s and tree.is_ancestor_edge(s, e):
                    mu -= stats.mean_below[e]
                    var -= stats.var_below[e]
            mean[i] = mu
            rem_var[i] = var
        cov = np.zeros((len(live), len(live)))
        for i, si in enumerate(live):
            for j, sj in enumerate(live):
                if i == j:
                    cov[i, j] = rem_var[i]
                elif tree.is_ancestor_edge(si, sj):
                    cov[i, j] = rem_var[j]
                elif tree.is_ancestor_edge(sj, si):
                    cov[i, j] = rem_var[i]
        if len(live) == 0:
            ll = 0.0
        else:
            try:
                ll = float(multivariate_normal(mean=mean, cov=cov).logpdf(readings))
            except np.linalg.LinAlgError as exc:
                raise DetectionError(f"singular covariance for {sorted(h)}") from exc
        if rho is not None:
            ll += len(h) * log_rho
        scored.append((h, ll))

    if not scored:
        raise DetectionError("no hypothesis consistent with the observed flows")
    hyp, _ = _pick(scored)
    return hyp
