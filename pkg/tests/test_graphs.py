import random
import sys
from itertools import combinations
from pathlib import Path

import networkx as nx
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from exceptions import BudgetError, DisconnectedInputError, SizeRefusalError
from graphs import (
    end_probe,
    enumerate_cuts_bruteforce,
    from_networkx,
    grow_ball,
    make_cut,
    min_vertex_set_cut,
    probe_window,
    shortlex_key,
)
from groups import FreeGroup, ball_oracle


def _brute_min_cut(ball, sources, sinks):
    """Least boundary over all source sides, and the shortlex-least sorted labels among the minimum ones."""
    n = len(ball)
    rest = [v for v in range(n) if v not in sources and v not in sinks]
    best, least = None, None
    for k in range(len(rest) + 1):
        for extra in combinations(rest, k):
            side = set(sources) | set(extra)
            size = make_cut(ball, side).boundary_size
            key = [shortlex_key(s) for s in ball.side_labels(side)]
            if best is None or size < best or (size == best and key < least):
                best, least = size, key
    return best, least


def _random_multigraph(rng, n):
    g = nx.MultiGraph()
    g.add_nodes_from(range(n))
    for v in range(1, n):
        g.add_edge(v, rng.randrange(v), multiplicity=rng.randint(1, 3))
    for _ in range(rng.randint(0, n)):
        u, v = rng.sample(range(n), 2)
        g.add_edge(u, v, multiplicity=rng.randint(1, 2))
    return g


def test_integers_have_two_ends():
    """Test that the Cayley graph of Z probes two stable ends."""
    Z = FreeGroup(["z"], "Z")
    report = end_probe(ball_oracle(Z), Z.identity(), 1, 4)

    assert report.unbounded_count == 2
    assert report.stable
    assert report.summary() == "2 unbounded components (stable)"


def test_z2_is_one_ended(z2):
    """Test that the grid Z^2 probes one end."""
    report = end_probe(ball_oracle(z2), z2.identity(), 1, 4)

    assert report.unbounded_count == 1
    assert report.bounded_count == 0
    assert report.stable


def test_f2_complement_of_unit_ball(f2):
    """Test that removing B(1) from the F2 tree leaves twelve unbounded pieces."""
    report = end_probe(ball_oracle(f2), f2.identity(), 1, 4)

    assert report.unbounded_count == 12
    assert report.previous_count == 12
    assert report.stable


def test_grow_ball_depths_and_labels(f2):
    """Test that ball growth is BFS-exact and labels by canonical words."""
    ball = grow_ball(ball_oracle(f2), f2.identity(), 2)

    assert len(ball) == 1 + 4 + 12
    assert ball.labels[0] == "1"
    assert max(ball.depth) == 2
    assert len(ball.frontier) == 12
    assert "a^2" in ball.labels
    assert sum(ball.edges.values()) == len(ball) - 1


def test_grow_ball_budget(f2):
    """Test that ball growth refuses to exceed its vertex budget."""
    with pytest.raises(BudgetError):
        grow_ball(ball_oracle(f2), f2.identity(), 3, budget=20)


def test_probe_window_rejects_bad_radii(line_window):
    """Test that probes need 0 <= r < R."""
    with pytest.raises(ValueError):
        probe_window(line_window, 4)
    with pytest.raises(ValueError):
        probe_window(line_window, -1)


def test_short_probe_is_not_stable(line_window):
    """Test that a probe without a smaller radius to compare against is not stable."""
    report = probe_window(line_window.truncate(2), 1)

    assert report.unbounded_count == 2
    assert report.previous_count is None
    assert not report.stable


def test_k4_min_cut():
    """Test that separating two vertices of K4 costs three edges."""
    ball = from_networkx(nx.complete_graph(4))
    cut = min_vertex_set_cut(ball, [0], [3])

    assert cut.boundary_size == 3
    assert cut.connected


def test_min_cut_counts_multiplicity():
    """Test that parallel edges are counted with their multiplicity."""
    g = nx.Graph()
    g.add_edge("s", "m", multiplicity=3)
    g.add_edge("m", "t", multiplicity=1)
    ball = from_networkx(g)
    cut = min_vertex_set_cut(ball, [ball.index["s"]], [ball.index["t"]])

    assert cut.boundary_size == 1
    assert ball.side_labels(cut.side) == ["m", "s"]


def test_min_cut_matches_exhaustive_search():
    """Test that the flow cut equals exhaustive enumeration on random small multigraphs, tie-break included."""
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(2, 10)
        ball = from_networkx(_random_multigraph(rng, n))
        s, t = rng.sample(range(n), 2)
        cut = min_vertex_set_cut(ball, [s], [t])
        size, least = _brute_min_cut(ball, {s}, {t})

        assert s in cut.side and t not in cut.side
        assert cut.boundary_size == size
        assert [shortlex_key(x) for x in ball.side_labels(cut.side)] == least


def test_min_cut_tie_break_looks_past_the_extreme_sides():
    """Test that the least label list can be a middle minimum cut, neither smallest nor largest."""
    g = nx.Graph()
    g.add_edges_from([("m", "a"), ("a", "z"), ("z", "n")])
    ball = from_networkx(g)
    cut = min_vertex_set_cut(ball, [ball.index["m"]], [ball.index["n"]])

    assert cut.boundary_size == 1
    assert ball.side_labels(cut.side) == ["a", "m"]


def test_min_cut_rejects_disconnected_input():
    """Test that sources and sinks in different components are refused."""
    g = nx.Graph()
    g.add_edge(0, 1)
    g.add_edge(2, 3)
    ball = from_networkx(g)

    with pytest.raises(DisconnectedInputError):
        min_vertex_set_cut(ball, [0], [3])
    with pytest.raises(ValueError):
        min_vertex_set_cut(ball, [0], [0])


def test_bruteforce_cuts_of_a_cycle():
    """Test that a 4-cycle has six cuts with both sides connected, all of boundary two."""
    ball = from_networkx(nx.cycle_graph(4))
    cuts = enumerate_cuts_bruteforce(ball, max_boundary=2)

    assert len(cuts) == 6
    assert all(c.boundary_size == 2 for c in cuts)


def test_bruteforce_refuses_large_graphs():
    """Test that exhaustive enumeration refuses oversize inputs."""
    ball = from_networkx(nx.path_graph(20))

    with pytest.raises(SizeRefusalError):
        enumerate_cuts_bruteforce(ball, max_boundary=1)


def test_truncate_and_wall_multiplicity():
    """Test window truncation and wall-edge multiplication."""
    ball = from_networkx(nx.star_graph(5), wall_edges=[(0, 1), (0, 2)])
    side = {ball.index[0]}
    before = make_cut(ball, side)
    after = make_cut(ball.with_wall_multiplicity(4), side)

    assert before.boundary_size == 5
    assert before.wall_weight == 2
    assert after.boundary_size == 11
    assert after.wall_weight == 8
