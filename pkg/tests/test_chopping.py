import random
import sys
from dataclasses import replace
from pathlib import Path

import networkx as nx
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from chopping import (
    HalfspaceCut,
    TreeWindowData,
    WallAction,
    build_p0_t0,
    build_p_order,
    class_stabilizers,
    cube_to_t_prime,
    find_halfspace_cut,
    fixes_class,
    iterate_chop,
    multiedge_modify,
    order_pocset,
    round_properties,
    two_ended_edge_group,
)
from graphs import from_networkx, grow_ball, make_cut, probe_window
from groups import ball_oracle
from pocsets import Pocset, cube
from splittings import LEFT, RIGHT, HalfspaceBall


def _halfspace(window, wall_ids):
    return HalfspaceBall(None, None, LEFT, window, window.induced(wall_ids), True)


@pytest.fixture
def f2_wall(f2):
    """F2 ball of radius 3 with the axis of a as wall, cut off the b-branches at 1."""
    window = grow_ball(ball_oracle(f2), f2.identity(), 3)
    wall = [i for i, g in enumerate(window.keys) if all(x == 0 for x, _ in f2.word(g))]
    side = [i for i, g in enumerate(window.keys) if f2.word(g)[:1] and f2.word(g)[0][0] == 1]
    hs = _halfspace(window, wall)
    hc = HalfspaceCut(hs, make_cut(window, side), probe_window(window, 1))
    a = f2.parse("a")
    elements = (f2.identity(), a, f2.inverse(a), f2.parse("a^2"), f2.parse("a^-2"))
    action = WallAction(elements, f2.multiply, f2.inverse, f2.format, (a,))
    return hc, action


def test_translates_of_a_cut_form_a_star(f2_wall):
    """Test that wall translates of the b-branch cut give a star-shaped T0."""
    hc, action = f2_wall
    base = build_p0_t0(hc, action)

    assert hc.cut.boundary_size == 2
    assert [t.label for t in base.translates] == ["1", "a", "a^-1", "a^2", "a^-2"]
    assert len(base.tree.vertices) == 6
    assert len(base.tree.edges) == 5
    assert sorted(d for _, d in base.tree.graph.degree())[-1] == 5
    assert base.witness is None
    assert base.orbit_count == 1
    assert base.stable is True
    assert len(base.class_map.classes) == 6
    assert base.edge_stabilizers["1.C"] == ()


def test_class_map_separates_branches(f2, f2_wall):
    """Test that points behind different translates land in different classes."""
    hc, action = f2_wall
    cm = build_p0_t0(hc, action).class_map

    assert cm.lookup(f2.parse("b")) == cm.lookup(f2.parse("b^-1*a"))
    assert cm.lookup(f2.parse("b")) != cm.lookup(f2.parse("a*b"))
    assert cm.lookup(f2.identity()) == cm.lookup(f2.parse("a^3"))
    assert cm.lookup(f2.parse("b^4")) is None


def test_graph_windows_need_an_action(f2_wall):
    """Test that a window without a splitting needs an explicit wall action."""
    hc, _ = f2_wall
    with pytest.raises(ValueError):
        build_p0_t0(hc)


def test_find_cut_between_two_rays(line_window):
    """Test that two rays are separated by a single edge."""
    hc = find_halfspace_cut(_halfspace(line_window, [0]), 1)

    assert hc.cut.boundary_size == 1
    assert min(len(hc.cut.side), len(line_window) - len(hc.cut.side)) == 1
    assert "boundary holds no wall edge" in hc.anomalies


def test_one_ended_window_has_no_cut(z2):
    """Test that a one-ended window is left uncut."""
    window = grow_ball(ball_oracle(z2), z2.identity(), 3)

    assert find_halfspace_cut(_halfspace(window, [0]), 1) is None


def test_multiedge_modify_rechecks_cuts():
    """Test that each wall edge is counted n times after modification."""
    window = from_networkx(nx.star_graph(5), wall_edges=[(0, 1), (0, 2)])
    cut = make_cut(window, {0})
    modified = multiedge_modify(window, 4, [cut])

    assert make_cut(modified, {0}).boundary_size == 11
    with pytest.raises(ValueError):
        multiedge_modify(window, 0)


def test_single_orbit_edge_cubes_to_a_path():
    """Test that one orbit edge with two classes becomes a path of three vertices."""
    data = TreeWindowData(("e",), (True,), {}, RIGHT)
    pw = order_pocset(data, [0, 1])
    tp = cube_to_t_prime(pw)

    assert len(pw.elements) == 4
    assert nx.is_isomorphic(tp.skeleton.graph, nx.path_graph(3))
    assert tp.tau_injective
    assert tp.phi_consistent


def test_line_of_orbit_edges():
    """Test P on three consecutive orbit edges whose far class holds the next edge."""
    n = 3
    toward = {(i, j): RIGHT if j > i else LEFT for i in range(n) for j in range(n) if i != j}
    anchor = {(i, j): 0 for i in range(n) for j in range(n) if j > i}
    data = TreeWindowData(tuple(f"e{i}" for i in range(n)), (True,) * n, toward, RIGHT, anchor)
    pw = order_pocset(data, [0, 1])
    tp = cube_to_t_prime(pw)

    assert len(pw.elements) == 12
    assert pw.pocset.transverse_pairs() == []
    assert len(tp.skeleton.vertices) == 7
    assert len(tp.skeleton.edges) == 6
    assert tp.tau_injective
    assert tp.phi_consistent


def test_tree_data_needs_every_side():
    """Test that tree data refuses missing nesting sides."""
    with pytest.raises(ValueError):
        TreeWindowData(("e0", "e1"), (True, True), {(0, 1): RIGHT}, RIGHT)


def test_plain_edges_facing_each_other():
    """Test two plain edges whose left sides hold each other."""
    toward = {(0, 1): LEFT, (1, 0): LEFT}
    data = TreeWindowData(("e0", "e1"), (False, False), toward, RIGHT)
    pw = order_pocset(data, [])

    assert len(pw.elements) == 4
    assert len(cube_to_t_prime(pw).skeleton.vertices) == 3


def test_iterate_chop_rounds(scenario):
    """Test the round limit check and the two-ended shortcut."""
    spec = scenario("bs12").splitting

    assert two_ended_edge_group(spec)
    with pytest.raises(ValueError):
        iterate_chop(spec, 0)
    report = iterate_chop(spec, 3, 1, 3)
    assert report.terminated
    assert report.rounds == ()
    assert report.notes[0].startswith("no chop needed")
    assert report.summary()[-1] == "terminated"


def test_refined_pocset_needs_a_splitting(f2_wall):
    """Test that P is only built over the base edge of a splitting."""
    hc, action = f2_wall
    base = build_p0_t0(hc, action)

    with pytest.raises(ValueError):
        build_p_order(base)
    with pytest.raises(ValueError):
        build_p_order(base, tree_radius=-1)


def test_multiedge_bookkeeping_on_random_cuts():
    """Test that random cuts grow by (n - 1) times their wall weight for n in 2..4."""
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(3, 9)
        g = nx.gnm_random_graph(n, rng.randint(n - 1, 2 * n), seed=rng.randrange(10 ** 6))
        walls = [e for e in g.edges if rng.random() < 0.4]
        window = from_networkx(g, wall_edges=walls)
        side = {v for v in range(n) if rng.random() < 0.5} or {0}
        cut = make_cut(window, side)
        factor = rng.choice([2, 3, 4])
        again = make_cut(multiedge_modify(window, factor, [cut]), side)

        assert again.boundary_size == cut.boundary_size + (factor - 1) * cut.wall_weight
        assert again.wall_weight == factor * cut.wall_weight


def test_class_stabilizers_of_a_star(f2, f2_wall):
    """Test that a fixes the axis class and no non-trivial translate fixes a branch class."""
    hc, action = f2_wall
    base = build_p0_t0(hc, action)
    cm = base.class_map
    axis = cm.lookup(f2.identity())
    branch = cm.lookup(f2.parse("b"))

    assert fixes_class(cm, f2.multiply, f2.parse("a"), axis)
    assert not fixes_class(cm, f2.multiply, f2.parse("b"), axis)
    assert not fixes_class(cm, f2.multiply, f2.parse("a"), branch)
    stabilizers = class_stabilizers(base)
    assert stabilizers
    assert all(ks == (f2.identity(),) for ks in stabilizers.values())


def test_round_properties_fail_one_at_a_time(f2_wall):
    """Test each property check against a tree that breaks it."""
    hc, action = f2_wall
    base = build_p0_t0(hc, action)
    tprime = cube_to_t_prime(order_pocset(TreeWindowData(("e",), (True,), {}, RIGHT), [0, 1]))

    star = round_properties(base, tprime)
    assert star == {"a": False, "b": True, "c": True, "d": False}

    nested = replace(base, witness=("a", "1.C"))
    assert round_properties(nested, tprime)["a"]

    fixed = replace(nested, edge_stabilizers={"1.C": ("a",)})
    assert not round_properties(fixed, tprime)["a"]

    point = replace(base, tree=cube(Pocset.from_pairs([], [], [])))
    assert round_properties(point, tprime)["a"]
    assert not round_properties(point, tprime)["b"]


def test_chopping_free_products_is_refused(scenario):
    """Test that a splitting over the trivial group is refused with a note instead of chopped."""
    report = iterate_chop(scenario("f2free").splitting, 3, 1, 3)

    assert not report.terminated
    assert report.rounds == ()
    assert report.notes[0].startswith("no chop: Za*Zb splits over the trivial group")
    assert report.summary()[-1] == "not terminated"


@pytest.mark.parametrize("name", ["example71_small", "example71"])
def test_artificial_split_chops_back_to_the_amalgam(scenario, name):
    """Test that the split over D chops back to A *_C B with one-ended halfspace windows."""
    loaded = scenario(name)
    report = iterate_chop(loaded.splitting, 3, 1, 4)

    assert report.terminated
    assert 1 <= len(report.rounds) <= 3
    first = report.rounds[0]
    assert first.side == "left"
    assert first.next_splitting == loaded.declared.name
    assert first.properties["b"]
    assert all("c'" not in label for ks in first.stabilizers.values() for label in ks)
    assert report.final_splitting == loaded.declared.name
    assert sorted(report.final_probes) == ["left", "right"]
    assert all(p.unbounded_count == 1 for p in report.final_probes.values())
