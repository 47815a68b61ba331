import random
from datetime import datetime, timedelta, timezone

import pytest

from novelty.netmet import (
    Snapshot,
    TemporalGraph,
    closeness,
    constraint,
    ego_density,
    in_degree,
    metrics_for,
    out_degree,
)
from oracles import all_digraphs, bf_metrics

T0 = datetime(2014, 1, 1, tzinfo=timezone.utc)


def at(days):
    return T0 + timedelta(days=days)


def snap_of(*edges, nodes=()):
    s = Snapshot(nodes)
    for a, b in edges:
        s.add_edge(a, b)
    return s


# -- snapshots ---------------------------------------------------------------


def test_snapshot_before_all_edges_is_empty():
    g = TemporalGraph.from_edges([("a", "b", at(1)), ("b", "c", at(2))])
    snap = g.snapshot_at(at(0))
    assert snap.out == {}
    assert snap.nodes == {"a", "b", "c"}  # registry is time-independent


def test_snapshot_boundary_is_strict():
    g = TemporalGraph.from_edges([("a", "b", at(1))])
    assert g.snapshot_at(at(1)).out == {}
    assert g.snapshot_at(at(1) + timedelta(seconds=1)).out == {"a": {"b"}}


def test_snapshot_middle_query():
    g = TemporalGraph.from_edges(
        [("a", "b", at(1)), ("b", "c", at(2)), ("c", "a", at(3))]
    )
    snap = g.snapshot_at(at(2))
    assert snap.out == {"a": {"b"}}


def test_snapshot_monotone():
    rng = random.Random(3)
    edges = [
        (f"n{rng.randrange(6)}", f"n{rng.randrange(6)}", at(rng.randrange(50)))
        for _ in range(40)
    ]
    edges = [(a, b, t) for a, b, t in edges if a != b]
    g = TemporalGraph.from_edges(edges)
    prev = set()
    for day in range(0, 55, 5):
        snap = g.snapshot_at(at(day))
        cur = {(a, b) for a, outs in snap.out.items() for b in outs}
        assert prev <= cur
        prev = cur


def test_duplicate_edge_keeps_earliest():
    g = TemporalGraph.from_edges([("a", "b", at(5)), ("a", "b", at(1))])
    assert len(g.edges) == 1
    assert g.edges[0][2] == at(1)


def test_self_loop_rejected():
    with pytest.raises(ValueError, match="self-loop"):
        TemporalGraph.from_edges([("a", "a", at(1))])


# -- hand-checked metric values ----------------------------------------------


def test_closeness_star():
    star = snap_of(("hub", "l1"), ("hub", "l2"), ("hub", "l3"))
    assert closeness(star, "hub") == 1.0
    # leaf: distances {1, 2, 2} -> (3/3) * (3/5)
    assert closeness(star, "l1") == pytest.approx(0.6)


def test_closeness_isolated_zero():
    s = snap_of(("a", "b"), nodes=["c"])
    assert closeness(s, "c") == 0.0


def test_closeness_unknown_node():
    with pytest.raises(KeyError):
        closeness(snap_of(("a", "b")), "zz")


def test_constraint_hand_cases():
    # Two mutually connected alters: 2 * (0.5 + 0.25)^2.
    s = snap_of(("u", "a"), ("u", "b"), ("a", "b"))
    assert constraint(s, "u") == pytest.approx(1.125)
    # Two unconnected alters: 2 * 0.25.
    s2 = snap_of(("u", "a"), ("u", "b"))
    assert constraint(s2, "u") == pytest.approx(0.5)


def test_constraint_no_followees_zero():
    s = snap_of(("a", "u"))
    assert constraint(s, "u") == 0.0


def test_density_cases():
    s = snap_of(("u", "a"), ("u", "b"), ("a", "b"))
    assert ego_density(s, "u") == pytest.approx(0.5)  # 1 of 2 directed ties
    full = snap_of(
        ("u", "a"), ("u", "b"), ("u", "c"),
        ("a", "b"), ("b", "a"), ("a", "c"), ("c", "a"), ("b", "c"), ("c", "b"),
    )
    assert ego_density(full, "u") == 1.0
    single = snap_of(("u", "a"))
    assert ego_density(single, "u") == 0.0


def test_degrees():
    s = snap_of(("a", "u"), ("b", "u"), ("u", "c"))
    assert in_degree(s, "u") == 2
    assert out_degree(s, "u") == 1


# -- brute-force agreement ----------------------------------------------------


def assert_matches_bruteforce(n_nodes, edges):
    nodes = list(range(n_nodes))
    snap = Snapshot(nodes)
    for a, b in edges:
        snap.add_edge(a, b)
    for u in nodes:
        expected = bf_metrics(nodes, edges, u)
        got = metrics_for(snap, u)
        assert (got.in_degree, got.out_degree) == expected[:2]
        assert got.closeness == pytest.approx(expected[2], abs=1e-12)
        assert got.constraint == pytest.approx(expected[3], abs=1e-12)
        assert got.density == pytest.approx(expected[4], abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_exhaustive_small_digraphs(n):
    for edges in all_digraphs(n):
        assert_matches_bruteforce(n, edges)


def test_random_five_node_digraphs():
    rng = random.Random(17)
    pairs = [(i, j) for i in range(5) for j in range(5) if i != j]
    for _ in range(300):
        edges = [p for p in pairs if rng.random() < 0.35]
        assert_matches_bruteforce(5, edges)


def test_metric_ranges_on_random_graphs():
    rng = random.Random(23)
    for _ in range(100):
        n = rng.randrange(2, 9)
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        edges = [p for p in pairs if rng.random() < 0.3]
        snap = Snapshot(range(n))
        for a, b in edges:
            snap.add_edge(a, b)
        for u in range(n):
            m = metrics_for(snap, u)
            assert 0.0 <= m.closeness <= 1.0
            assert 0.0 <= m.density <= 1.0
            assert m.constraint >= 0.0


def test_metrics_for_unknown_user_is_zero_vector():
    m = metrics_for(snap_of(("a", "b")), "stranger")
    assert (m.in_degree, m.out_degree, m.closeness, m.constraint, m.density) == (
        0, 0, 0.0, 0.0, 0.0,
    )
