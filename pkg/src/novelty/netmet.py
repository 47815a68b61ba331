"""Point-in-time follow-graph snapshots and per-user position metrics.

A snapshot at instant t holds exactly the edges created strictly before t,
so an image never sees a follow made at its own timestamp.  Metrics:

* in/out degree on the directed snapshot;
* closeness on the undirected projection with the Wasserman-Faust
  component correction (r/(n-1)) * (r / sum of distances);
* Burt's constraint on the ego network of a user and their out-neighbors
  (undirected projection, unit tie weights);
* ego density: realized directed ties among the users someone follows.

Degenerate conventions: out-degree 0 gives constraint 0; fewer than two
followees gives density 0; an isolated node gives closeness 0.
"""

from __future__ import annotations

from bisect import bisect_left
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from typing import Hashable, Iterable

Node = Hashable


class Snapshot:
    """Directed graph over a fixed node set, mutable by edge insertion."""

    __slots__ = ("nodes", "out", "inc", "und")

    def __init__(self, nodes: Iterable[Node] = ()) -> None:
        self.nodes: set[Node] = set(nodes)
        self.out: dict[Node, set[Node]] = {}
        self.inc: dict[Node, set[Node]] = {}
        self.und: dict[Node, set[Node]] = {}

    def add_edge(self, src: Node, dst: Node) -> None:
        if src == dst:
            raise ValueError(f"self-loop on {src!r}")
        self.nodes.add(src)
        self.nodes.add(dst)
        self.out.setdefault(src, set()).add(dst)
        self.inc.setdefault(dst, set()).add(src)
        self.und.setdefault(src, set()).add(dst)
        self.und.setdefault(dst, set()).add(src)

    def has_node(self, u: Node) -> bool:
        return u in self.nodes

    def n_nodes(self) -> int:
        return len(self.nodes)

    def out_neighbors(self, u: Node) -> set[Node]:
        return self.out.get(u, set())

    def _require(self, u: Node) -> None:
        if u not in self.nodes:
            raise KeyError(f"unknown node {u!r}")


@dataclass
class TemporalGraph:
    """Timestamped directed follow edges; duplicates keep the earliest time."""

    edges: list[tuple[Node, Node, datetime]] = field(default_factory=list)
    nodes: set[Node] = field(default_factory=set)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[Node, Node, datetime]]) -> "TemporalGraph":
        ordered = sorted(edges, key=lambda e: e[2])
        seen: set[tuple[Node, Node]] = set()
        kept: list[tuple[Node, Node, datetime]] = []
        nodes: set[Node] = set()
        for src, dst, ts in ordered:
            if src == dst:
                raise ValueError(f"self-loop on {src!r}")
            nodes.add(src)
            nodes.add(dst)
            if (src, dst) in seen:
                continue
            seen.add((src, dst))
            kept.append((src, dst, ts))
        return cls(edges=kept, nodes=nodes)

    def snapshot_at(self, t: datetime) -> Snapshot:
        """Graph of edges with timestamp strictly before t, over all known nodes."""
        snap = Snapshot(self.nodes)
        cutoff = bisect_left([e[2] for e in self.edges], t)
        for src, dst, _ in self.edges[:cutoff]:
            snap.add_edge(src, dst)
        return snap


def in_degree(snap: Snapshot, u: Node) -> int:
    snap._require(u)
    return len(snap.inc.get(u, ()))


def out_degree(snap: Snapshot, u: Node) -> int:
    snap._require(u)
    return len(snap.out.get(u, ()))


def closeness(snap: Snapshot, u: Node) -> float:
    """Wasserman-Faust closeness on the undirected projection; isolated -> 0."""
    snap._require(u)
    n = snap.n_nodes()
    if n < 2:
        return 0.0
    dist = {u: 0}
    queue = deque([u])
    total = 0
    while queue:
        v = queue.popleft()
        for w in snap.und.get(v, ()):
            if w not in dist:
                dist[w] = dist[v] + 1
                total += dist[w]
                queue.append(w)
    reachable = len(dist) - 1
    if reachable == 0:
        return 0.0
    return (reachable / (n - 1)) * (reachable / total)


def constraint(snap: Snapshot, u: Node) -> float:
    """Burt's constraint on the ego network of u and its out-neighbors.

    Tie proportions use the undirected projection restricted to the ego
    network, unit weights.  No followees -> 0 by convention.
    """
    snap._require(u)
    alters = snap.out.get(u, set())
    if not alters:
        return 0.0
    # Fixed iteration order so float accumulation is reproducible across
    # processes regardless of set hashing.
    ego = sorted({u} | alters, key=repr)
    adj = {i: (snap.und.get(i, set()) & set(ego)) for i in ego}
    p: dict[Node, dict[Node, float]] = {}
    for i in ego:
        deg = len(adj[i])
        p[i] = {j: 1.0 / deg for j in adj[i]} if deg else {}
    total = 0.0
    for j in sorted(alters, key=repr):
        indirect = sum(
            p[u].get(q, 0.0) * p[q].get(j, 0.0) for q in ego if q != u and q != j
        )
        total += (p[u].get(j, 0.0) + indirect) ** 2
    return total


def ego_density(snap: Snapshot, u: Node) -> float:
    """Directed ties realized among u's followees over the possible count."""
    snap._require(u)
    alters = snap.out.get(u, set())
    k = len(alters)
    if k < 2:
        return 0.0
    ties = sum(len(snap.out.get(a, set()) & alters) for a in alters)
    return ties / (k * (k - 1))


@dataclass(frozen=True)
class NetworkFeatures:
    in_degree: int
    out_degree: int
    closeness: float
    constraint: float
    density: float

    @classmethod
    def zero(cls) -> "NetworkFeatures":
        return cls(0, 0, 0.0, 0.0, 0.0)


def metrics_for(snap: Snapshot, u: Node) -> NetworkFeatures:
    """All five metrics for one node; unknown nodes get the zero vector."""
    if not snap.has_node(u):
        return NetworkFeatures.zero()
    return NetworkFeatures(
        in_degree=in_degree(snap, u),
        out_degree=out_degree(snap, u),
        closeness=closeness(snap, u),
        constraint=constraint(snap, u),
        density=ego_density(snap, u),
    )
