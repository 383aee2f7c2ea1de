import json
import random
import sys
from pathlib import Path

import networkx as nx
import pytest
from networkx.algorithms.isomorphism.tree_isomorphism import tree_isomorphism

sys.path.insert(0, str(Path(__file__).parent.parent))

from exceptions import BudgetError, DisconnectedInputError, PocsetAxiomError, SizeRefusalError
from pocsets import (
    Pocset,
    Ultrafilter,
    cube,
    geodesic_cover,
    is_tree_check,
    pocset_from_json,
    pocset_to_json,
    tree_halfspace_pocset,
    wallspace_pocset,
    width,
)


def _random_tree(rng, n):
    tree = nx.Graph()
    tree.add_node(0)
    for v in range(1, n):
        tree.add_edge(v, rng.randrange(v))
    return tree


def _free_pocset(k):
    labels = [f"{side}{i}" for i in range(k) for side in "+-"]
    star = [i + 1 if i % 2 == 0 else i - 1 for i in range(2 * k)]
    return Pocset.from_pairs(labels, star, [])


def test_tree_pocset_cubes_back_to_the_tree():
    """Test that cubing the halfspace pocset of a random tree recovers the tree."""
    rng = random.Random(11)
    for _ in range(100):
        tree = _random_tree(rng, rng.randint(2, 61))
        skeleton = cube(tree_halfspace_pocset(tree))

        assert len(skeleton.vertices) == len(tree)
        assert is_tree_check(skeleton)
        assert skeleton.dimension == 1
        assert tree_isomorphism(skeleton.graph, tree)


def test_pairwise_transverse_pocset_is_a_cube():
    """Test that k pairwise transverse pairs cube to the k-cube."""
    for k in (1, 2, 3, 4):
        skeleton = cube(_free_pocset(k))

        assert len(skeleton.vertices) == 2 ** k
        assert len(skeleton.edges) == k * 2 ** (k - 1)
        assert skeleton.dimension == k


def test_fixture_pocsets(fixtures_dir):
    """Test the shipped path and square pocsets."""
    path = cube(pocset_from_json(json.loads((fixtures_dir / "path_tree.json").read_text())))
    square = cube(pocset_from_json(json.loads((fixtures_dir / "square.json").read_text())))

    assert (len(path.vertices), len(path.edges), path.dimension) == (4, 3, 1)
    assert nx.is_isomorphic(path.graph, nx.path_graph(4))
    assert (len(square.vertices), len(square.edges), square.dimension) == (4, 4, 2)
    assert not is_tree_check(square)
    assert width(square.pocset) == 2


def test_json_closes_the_order(fixtures_dir):
    """Test that order pairs are closed under the involution and transitively."""
    pocset = pocset_from_json(json.loads((fixtures_dir / "path_tree.json").read_text()))
    index = {label: i for i, label in enumerate(pocset.labels)}

    assert pocset.lt(index["2>3"], index["0>1"])
    assert pocset.lt(index["1>0"], index["3>2"])
    assert len(pocset_to_json(pocset)["involution"]) == 3


def test_axiom_violations():
    """Test that broken involutions and orders are rejected."""
    with pytest.raises(PocsetAxiomError):
        Pocset.from_pairs(["a", "a*"], [1, 0], [(0, 1)])
    with pytest.raises(PocsetAxiomError):
        Pocset.from_pairs(["a", "b"], [0, 1], [])
    with pytest.raises(PocsetAxiomError):
        pocset_from_json({
            "elements": ["a", "a*", "b", "b*"],
            "involution": [["a", "a*"], ["b", "b*"]],
            "order": [["a", "b"], ["b", "a"]],
        })
    with pytest.raises(ValueError):
        pocset_from_json({"elements": ["a", "a*", "b"], "involution": [["a", "a*"]]})


def test_cube_limits():
    """Test the ultrafilter budget and the width size refusal."""
    with pytest.raises(BudgetError):
        cube(_free_pocset(3), budget=4)
    with pytest.raises(SizeRefusalError):
        width(_free_pocset(13))
    with pytest.raises(PocsetAxiomError):
        cube(_free_pocset(2), start=Ultrafilter(frozenset()))


def test_wallspace_points_are_ultrafilters():
    """Test that every point of a wallspace picks out an ultrafilter vertex."""
    points = [1, 2, 3, 4]
    pocset, lam = wallspace_pocset(points, [{1}, {1, 2}, {1, 2, 3}, {2, 3, 4}])
    skeleton = cube(pocset)

    assert len(pocset) == 6
    assert all(pocset.is_ultrafilter(u.mask) for u in lam.values())
    ids = [skeleton.vertex_id(lam[p]) for p in points]
    assert len(set(ids)) == 4
    assert geodesic_cover(skeleton, [ids[0], ids[-1]])
    with pytest.raises(ValueError):
        wallspace_pocset(points, [set(points)])


def test_non_trees_are_refused():
    """Test that halfspace pocsets need a finite tree."""
    with pytest.raises(DisconnectedInputError):
        tree_halfspace_pocset(nx.cycle_graph(4))
