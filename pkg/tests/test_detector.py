"""Area construction and maximum-likelihood outage identification."""
from __future__ import annotations

import random

import pytest

from helpers import DEEP_PARENTS, FIVE_EDGE_PARENTS, TRAP_PARENTS, TRAP_VARS, tree_from
from outagekit.detector import (
    DetectionError,
    InconsistentObservationError,
    Observation,
    build_areas,
    detect,
    detect_centralized_oracle,
    effective_measurement,
    hypothesis_stats,
    observation_from_json,
)
from outagekit.network import cumulative_stats
from outagekit.sim import ForecastModel, random_tree, simulate_outage


def test_two_sensor_areas_on_deep_tree(deep_tree):
    areas = build_areas(deep_tree, ("e1", "e11"))
    by_root = {a.root_sensor: a for a in areas}
    assert set(by_root) == {"e1", "e11"}
    upper = by_root["e1"]
    assert upper.child_sensors == ("e11",)
    assert set(upper.edges) == {f"e{i}" for i in range(2, 12)}
    assert set(upper.vertices) == {f"e{i}" for i in range(1, 11)}
    lower = by_root["e11"]
    assert lower.child_sensors == ()
    assert set(lower.edges) == {f"e{i}" for i in range(12, 19)}
    assert set(lower.vertices) == {f"e{i}" for i in range(11, 19)}


def test_areas_partition_edges_and_vertices():
    rng = random.Random(17)
    for _ in range(25):
        tree = random_tree(rng.randint(3, 20), seed=rng.randrange(10**6))
        edges = list(tree.edges)
        root_edge = tree.children[tree.root][0]
        extra = rng.sample(edges, k=min(len(edges), rng.randint(0, 4)))
        sensors = {root_edge, *extra}
        areas = build_areas(tree, sensors)
        assert sorted(a.root_sensor for a in areas) == sorted(sensors)
        seen_edges: list[str] = []
        seen_vertices: list[str] = []
        for a in areas:
            seen_edges.extend(a.edges)
            seen_vertices.extend(a.vertices)
        # every edge except the feeder head belongs to exactly one area;
        # child sensor edges sit in the area above them
        assert sorted(seen_edges) == sorted(set(edges) - {root_edge})
        assert len(seen_edges) == len(set(seen_edges))
        assert sorted(seen_vertices) == sorted(edges)


def test_effective_measurement(deep_tree):
    area = build_areas(deep_tree, ("e1", "e11"))[0]
    assert effective_measurement(area, {"e1": 9.5, "e11": 2.5}) == pytest.approx(7.0)
    with pytest.raises(DetectionError, match="missing flow"):
        effective_measurement(area, {"e1": 9.5})


def test_hypothesis_stats_exact(trap_tree):
    stats = cumulative_stats(trap_tree)
    area = next(
        a for a in build_areas(trap_tree, ("e1", "e2", "e3")) if a.root_sensor == "e2"
    )
    dark = {"e3": False}
    assert hypothesis_stats(area, frozenset({"e3"}), dark, stats) == (
        pytest.approx(3.0),
        pytest.approx(0.1638),
    )
    assert hypothesis_stats(area, frozenset({"e3", "e6"}), dark, stats) == (
        pytest.approx(2.0),
        pytest.approx(0.1031),
    )
    assert hypothesis_stats(area, frozenset({"e3", "e5"}), dark, stats) == (
        pytest.approx(1.0),
        pytest.approx(0.0125),
    )
    # a positive child sensor removes its subtree from the measurement
    assert hypothesis_stats(area, frozenset(), {"e3": True}, stats) == (
        pytest.approx(3.0),
        pytest.approx(0.1638),
    )


def test_hypothesis_stats_rejects_certain_measurement():
    tree = tree_from({"a": "root", "b": "a"}, variances={"a": 0.0, "b": 1.0})
    stats = cumulative_stats(tree)
    area = build_areas(tree, ("a",))[0]
    with pytest.raises(ValueError, match="variance"):
        hypothesis_stats(area, frozenset({"b"}), {}, stats)


def test_detect_no_outage(five_edge_tree):
    det = detect(five_edge_tree, ["e1"], Observation(flows={"e1": 5.0}))
    assert det.hypothesis == frozenset()
    assert det.areas[0].root_sensor == "e1"


def test_detect_single_missing_unit(five_edge_tree):
    # both leaf cuts explain the reading exactly; ties resolve to the
    # lexicographically first edge set
    stats = cumulative_stats(five_edge_tree)
    area = build_areas(five_edge_tree, ("e1",))[0]
    s4 = hypothesis_stats(area, frozenset({"e4"}), {}, stats)
    s5 = hypothesis_stats(area, frozenset({"e5"}), {}, stats)
    assert s4 == s5
    det = detect(five_edge_tree, ["e1"], Observation(flows={"e1": 4.0}))
    assert det.hypothesis == frozenset({"e4"})
    assert det.areas[0].loglik == pytest.approx(2.9930844722234733)


def test_detect_dark_root(five_edge_tree):
    det = detect(five_edge_tree, ["e1"], Observation(flows={"e1": 0.0}))
    assert det.hypothesis == frozenset({"e1"})
    # readings below the noise floor count as dark
    det = detect(five_edge_tree, ["e1"], Observation(flows={"e1": 1e-15}))
    assert det.hypothesis == frozenset({"e1"})


def test_detect_dark_child_sensor():
    tree = tree_from(DEEP_PARENTS, variances=1e-4)
    obs = Observation(flows={"e1": 10.0, "e11": 0.0})
    det = detect(tree, ["e1", "e11"], obs)
    assert det.hypothesis == frozenset({"e11"})
    # the dark sensor's own area is pruned: nothing below it is decidable
    assert [a.root_sensor for a in det.areas] == ["e1"]
    assert sorted(detect_centralized_oracle(tree, ["e1", "e11"], obs)) == ["e11"]


def test_detect_rejects_inconsistent_observation():
    tree = tree_from(DEEP_PARENTS, variances=1e-4)
    with pytest.raises(InconsistentObservationError):
        detect(tree, ["e1", "e11"], Observation(flows={"e1": 0.0, "e11": 2.0}))


def test_detect_rejects_missing_reading(five_edge_tree):
    with pytest.raises(DetectionError, match="missing flow"):
        detect(five_edge_tree, ["e1"], Observation(flows={}))


def test_forecast_override_rescales_means(five_edge_tree):
    forecasts = {e: 2.0 for e in five_edge_tree.edges}
    obs = Observation(flows={"e1": 8.0}, forecasts=forecasts)
    det = detect(five_edge_tree, ["e1"], obs)
    assert det.hypothesis == frozenset({"e4"})


def test_observation_from_json():
    obs = observation_from_json({"flows": {"e1": 4}, "forecasts": {"e2": 1.5}})
    assert obs.flows == {"e1": 4.0}
    assert obs.forecasts == {"e2": 1.5}
    assert observation_from_json({"flows": {}}).forecasts is None
    with pytest.raises(DetectionError):
        observation_from_json({"readings": {}})


def test_prior_pulls_toward_larger_hypotheses():
    tree = tree_from(
        FIVE_EDGE_PARENTS,
        means={"e1": 1.0, "e2": 1.0, "e3": 1.0, "e4": 1.0, "e5": 1.2},
        variances=0.04,
    )
    obs = Observation(flows={"e1": 3.0})
    sizes = [
        len(detect(tree, ["e1"], obs, rho=rho).hypothesis)
        for rho in (0.05, 0.3, 0.6, 0.9)
    ]
    assert sizes == sorted(sizes)
    assert sizes[0] == 1
    assert sizes[-1] == 2


def test_decoupled_matches_centralized_oracle():
    # per-area picks joined together must equal the joint-likelihood argmax
    rng = random.Random(404)
    model = ForecastModel("fixed_kappa", kappa=0.15)
    for trial in range(150):
        tree = model.apply(
            random_tree(rng.randint(3, 10), seed=rng.randrange(10**6))
        )
        edges = list(tree.edges)
        root_edge = tree.children[tree.root][0]
        extra = rng.sample(edges, k=min(len(edges), rng.randint(0, 3)))
        sensors = sorted({root_edge, *extra})
        pool = [e for e in edges]
        truth = frozenset(rng.sample(pool, k=rng.randint(0, 2)))
        for a in list(truth):
            for b in list(truth):
                if a != b and tree.is_ancestor_edge(a, b):
                    truth = truth - {b}
        obs = simulate_outage(tree, sensors, truth, seed=rng.randrange(10**6))
        got = detect(tree, sensors, obs, max_outages=None).hypothesis
        want = detect_centralized_oracle(tree, sensors, obs, max_outages=None)
        assert got == want


def test_detection_report_shape(trap_tree):
    obs = Observation(flows={"e1": 6.0, "e5": 2.0})
    det = detect(trap_tree, ["e1", "e5"], obs)
    doc = det.to_json()
    assert set(doc) == {"global", "areas"}
    assert doc["global"] == sorted(det.hypothesis)
    assert {a["root"] for a in doc["areas"]} == {"e1", "e5"}
