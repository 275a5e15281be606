"""Radial feeder model: rooted trees, branch decomposition, cumulative load stats.

Design choices
--------------
* An edge is identified by the vertex it feeds (its child endpoint), so
  ``EdgeId`` and ``VertexId`` share one namespace and an edge set is just a
  set of non-root vertex ids.
* ``Tree`` is immutable after construction; derived quantities
  (:class:`CumulativeStats`, :class:`BranchGraph`) are computed once and
  cached by the caller, never stored back on the tree.
* Branch decomposition keeps a metered edge in the path section *above* the
  meter: the section ends with the edge that carries the sensor, and
  anything further downstream starts a new section.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = [
    "VertexId",
    "EdgeId",
    "BranchId",
    "FeederFormatError",
    "Tree",
    "build_tree",
    "Branch",
    "BranchGraph",
    "branch_decompose",
    "CumulativeStats",
    "cumulative_stats",
    "load_feeder",
    "dump_feeder",
]

VertexId = str
# An edge is named by its child vertex: edge "v7" joins parent("v7") to "v7".
EdgeId = str
BranchId = str


class FeederFormatError(ValueError):
    """Raised when vertex records or a feeder file do not describe a valid tree."""


@dataclass(frozen=True)
class Tree:
    """Rooted tree with per-vertex load forecasts.

    ``mean[v]`` and ``var[v]`` are the forecast mean and variance of the load
    at vertex ``v``; the root carries no load. ``order`` lists vertices with
    every parent before its children, root first.
    """

    root: VertexId
    parent: Mapping[VertexId, VertexId | None]
    children: Mapping[VertexId, tuple[VertexId, ...]]
    mean: Mapping[VertexId, float]
    var: Mapping[VertexId, float]
    order: tuple[VertexId, ...]

    @property
    def edges(self) -> tuple[EdgeId, ...]:
        """All edge ids (non-root vertices), in topological order."""
        return self.order[1:]

    def is_ancestor_edge(self, a: EdgeId, b: EdgeId) -> bool:
        """True if edge ``a`` lies on the path from the root to edge ``b`` (or a == b)."""
        v: VertexId | None = b
        while v is not None:
            if v == a:
                return True
            v = self.parent[v]
        return False

    def descendant_vertices(self, v: VertexId) -> set[VertexId]:
        """Vertices in the subtree rooted at ``v``, including ``v`` itself."""
        out: set[VertexId] = set()
        stack = [v]
        while stack:
            u = stack.pop()
            out.add(u)
            stack.extend(self.children[u])
        return out

    def depth(self, v: VertexId) -> int:
        d = 0
        u = self.parent[v]
        while u is not None:
            d += 1
            u = self.parent[u]
        return d

    def with_loads(
        self,
        mean: Mapping[VertexId, float] | None = None,
        var: Mapping[VertexId, float] | None = None,
    ) -> "Tree":
        """Functional update: same topology, new load statistics."""
        new_mean = dict(self.mean) if mean is None else {**self.mean, **mean}
        new_var = dict(self.var) if var is None else {**self.var, **var}
        new_mean[self.root] = 0.0
        new_var[self.root] = 0.0
        _check_loads(new_mean, new_var, self.root)
        return Tree(self.root, self.parent, self.children, new_mean, new_var, self.order)


def _check_loads(mean: Mapping[VertexId, float], var: Mapping[VertexId, float], root: VertexId) -> None:
    for v, m in mean.items():
        if v == root:
            if m != 0.0 or var[v] != 0.0:
                raise FeederFormatError("root vertex must carry no load")
            continue
        if not (m >= 0.0):
            raise FeederFormatError(f"negative or non-finite mean load at {v!r}: {m}")
        if not (var[v] >= 0.0):
            raise FeederFormatError(f"negative or non-finite load variance at {v!r}: {var[v]}")


def build_tree(vertices: Iterable[Mapping[str, object]]) -> Tree:
    """Build a :class:`Tree` from vertex records.

    Each record needs ``id`` and ``parent`` (``None`` for the root) and may
    carry ``mean`` and ``var`` (default 0). Rejects duplicate ids, missing or
    multiple roots, unknown parents, cycles, and any load on the root.
    """
    parent: dict[VertexId, VertexId | None] = {}
    mean: dict[VertexId, float] = {}
    var: dict[VertexId, float] = {}
    for rec in vertices:
        vid = str(rec["id"])
        if vid in parent:
            raise FeederFormatError(f"duplicate vertex id {vid!r}")
        p = rec.get("parent")
        parent[vid] = None if p is None else str(p)
        mean[vid] = float(rec.get("mean", 0.0))  # type: ignore[arg-type]
        var[vid] = float(rec.get("var", 0.0))  # type: ignore[arg-type]

    roots = [v for v, p in parent.items() if p is None]
    if len(roots) != 1:
        raise FeederFormatError(f"expected exactly one root vertex, found {len(roots)}")
    root = roots[0]
    for v, p in parent.items():
        if p is not None and p not in parent:
            raise FeederFormatError(f"vertex {v!r} references unknown parent {p!r}")

    children: dict[VertexId, list[VertexId]] = {v: [] for v in parent}
    for v, p in parent.items():
        if p is not None:
            children[p].append(v)
    for v in children:
        children[v].sort()

    # BFS from the root; anything unreached is disconnected (or on a cycle).
    order: list[VertexId] = [root]
    seen = {root}
    i = 0
    while i < len(order):
        for c in children[order[i]]:
            if c in seen:
                raise FeederFormatError(f"cycle through vertex {c!r}")
            seen.add(c)
            order.append(c)
        i += 1
    if len(order) != len(parent):
        missing = sorted(set(parent) - seen)
        raise FeederFormatError(f"vertices not connected to the root: {missing}")

    _check_loads(mean, var, root)
    return Tree(
        root=root,
        parent=parent,
        children={v: tuple(c) for v, c in children.items()},
        mean=mean,
        var=var,
        order=tuple(order),
    )


@dataclass(frozen=True)
class Branch:
    """A junction-free edge path. ``edges`` runs top (closest to root) to bottom.

    Synthetic branch graphs may carry empty ``edges``; decomposition of a real
    tree never produces one except the virtual root of a forest.
    """

    id: BranchId
    edges: tuple[EdgeId, ...]
    children: tuple[BranchId, ...]


@dataclass(frozen=True)
class BranchGraph:
    """Branches of a tree (or of an edge subset), linked parent to child."""

    branches: Mapping[BranchId, Branch]
    roots: tuple[BranchId, ...]

    def __iter__(self):
        return iter(self.branches.values())

    def edge_count(self) -> int:
        return sum(len(b.edges) for b in self.branches.values())


def branch_decompose(
    tree: Tree,
    sensors: Iterable[EdgeId] = (),
    *,
    within: Iterable[EdgeId] | None = None,
) -> BranchGraph:
    """Split a tree (or an edge subset) into junction-free branches.

    A new branch starts below a junction, and below any metered edge: the
    metered edge stays at the bottom of the upstream branch. ``within``
    restricts the decomposition to an edge subset (used for the region
    between nested sensors); the subset must be downward-closed between its
    own edges, which holds for every region this package constructs.

    Branch ids are the branch's top edge id.
    """
    sensor_set = set(sensors)
    edge_set = set(tree.edges) if within is None else set(within)
    for e in sensor_set | edge_set:
        if e not in tree.parent or e == tree.root:
            raise FeederFormatError(f"unknown edge id {e!r}")

    # children of an edge within the subset
    def sub_children(e: EdgeId) -> list[EdgeId]:
        return [c for c in tree.children[e] if c in edge_set]

    # top edges: parent edge missing from the subset
    tops = [e for e in edge_set if tree.parent[e] not in edge_set]
    tops.sort()

    branches: dict[BranchId, Branch] = {}

    def grow(top: EdgeId) -> BranchId:
        path = [top]
        while True:
            last = path[-1]
            nxt = sub_children(last)
            if len(nxt) != 1 or last in sensor_set:
                break
            path.append(nxt[0])
        kids = tuple(grow(c) for c in sub_children(path[-1]))
        bid = path[0]
        branches[bid] = Branch(id=bid, edges=tuple(path), children=kids)
        return bid

    roots = tuple(grow(t) for t in tops)
    return BranchGraph(branches=branches, roots=roots)


@dataclass(frozen=True)
class CumulativeStats:
    """Subtree-cumulative load statistics, one entry per edge.

    ``mean_below[e]`` / ``var_below[e]`` sum the forecast mean / variance over
    every vertex at or below the child endpoint of ``e``.
    """

    mean_below: Mapping[EdgeId, float]
    var_below: Mapping[EdgeId, float]
    total_mean: float = field(default=0.0)


def cumulative_stats(tree: Tree) -> CumulativeStats:
    """Single bottom-up pass accumulating subtree mean and variance sums."""
    mean_below: dict[EdgeId, float] = {}
    var_below: dict[EdgeId, float] = {}
    for v in reversed(tree.order):
        m = tree.mean[v]
        s = tree.var[v]
        for c in tree.children[v]:
            m += mean_below[c]
            s += var_below[c]
        if v != tree.root:
            mean_below[v] = m
            var_below[v] = s
    total = sum(tree.mean[v] for v in tree.edges)
    return CumulativeStats(mean_below=mean_below, var_below=var_below, total_mean=total)


def load_feeder(source: str | Mapping[str, object]) -> tuple[Tree, tuple[EdgeId, ...]]:
    """Read a feeder description (path to JSON, or an already-parsed mapping).

    Format: ``{"vertices": [{"id", "parent", "mean", "sigma2"}...],
    "sensors": [edge ids]}``. Instead of ``sigma2`` a vertex may set
    ``"kappa_derived": true`` to take its deviation from the forecast scaling
    law applied to its own mean. The root edge is always metered and may be
    omitted from ``sensors``.
    """
    if isinstance(source, str):
        with open(source) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FeederFormatError(f"invalid JSON in {source!r}: {exc}") from exc
    else:
        data = source
    if not isinstance(data, Mapping) or "vertices" not in data:
        raise FeederFormatError("feeder description must be an object with a 'vertices' list")
    vertices = data["vertices"]
    if not isinstance(vertices, list):
        raise FeederFormatError("'vertices' must be a list")

    records = []
    for rec in vertices:
        if not isinstance(rec, Mapping) or "id" not in rec:
            raise FeederFormatError(f"bad vertex record: {rec!r}")
        row = {"id": rec["id"], "parent": rec.get("parent"), "mean": rec.get("mean", 0.0)}
        if rec.get("kappa_derived"):
            from .sim import kappa_of_load  # deferred: sim builds on this module

            mean = float(row["mean"])  # type: ignore[arg-type]
            row["var"] = (kappa_of_load(mean) * mean) ** 2 if mean > 0 else 0.0
        else:
            row["var"] = rec.get("sigma2", 0.0)
        records.append(row)
    tree = build_tree(records)
    raw = data.get("sensors", [])
    if not isinstance(raw, list):
        raise FeederFormatError("'sensors' must be a list of edge ids")
    sensors = {str(e) for e in raw}
    for e in sensors:
        if e not in tree.parent or e == tree.root:
            raise FeederFormatError(f"sensor on unknown edge {e!r}")
    root_edges = tree.children[tree.root]
    if len(root_edges) != 1:
        raise FeederFormatError("feeder root must have exactly one outgoing edge")
    sensors.add(root_edges[0])
    return tree, tuple(sorted(sensors))


def dump_feeder(tree: Tree, sensors: Iterable[EdgeId]) -> dict:
    """Inverse of :func:`load_feeder`, producing a JSON-serialisable dict."""
    verts = [
        {
            "id": v,
            "parent": tree.parent[v],
            "mean": tree.mean[v],
            "sigma2": tree.var[v],
        }
        for v in tree.order
    ]
    return {"vertices": verts, "sensors": sorted(set(sensors))}
