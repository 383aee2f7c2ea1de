import sys
from pathlib import Path

import networkx as nx
import pytest
from sympy import ImmutableMatrix, Rational

sys.path.insert(0, str(Path(__file__).parent.parent))

from exceptions import ContainmentError, TrivialSplittingError
from graphs import NeighborOracle, grow_ball, probe_window
from groups import FreeGroup, ball_oracle
from splittings import (
    AMALGAM,
    CITE_ACYCLIC,
    CITE_CENTRAL,
    CITE_DOUBLE,
    LEFT,
    RIGHT,
    SplittingSpec,
    artificial_split,
    bass_serre_oracle,
    halfspace_profiles,
    halfspace_window,
    normalize,
    resolve_side,
    syntactic_checks,
    tree_of_spaces,
    tree_window,
    trivial_splitting,
    vertex_group_profile,
)
from subgroups import make_engine

# BS(1,2) acting on the line: a is x -> x + 1, t is x -> x / 2
_AFFINE = {
    "a": ImmutableMatrix([[1, 1], [0, 1]]),
    "t": ImmutableMatrix([[Rational(1, 2), 0], [0, 1]]),
}


def _matrix_of(G, g):
    m = ImmutableMatrix.eye(2)
    for index, sign in G.word(g):
        x = _AFFINE[G.names[index]]
        m = m * (x if sign > 0 else x.inv())
    return ImmutableMatrix(m)


def _matrix_ball(radius):
    gens = [m for x in _AFFINE.values() for m in (x, ImmutableMatrix(x.inv()))]
    oracle = NeighborOracle(neighbors=lambda m: [ImmutableMatrix(m * s) for s in gens])
    return grow_ball(oracle, ImmutableMatrix.eye(2), radius)


@pytest.fixture
def bs12(scenario):
    return scenario("bs12").splitting


@pytest.fixture
def free_amalgam(scenario):
    return scenario("f2free").splitting


def test_bs12_relation(bs12):
    """Test that t^-1*a*t normalizes to a^2."""
    G = bs12.group
    nf = normalize(bs12, "t^-1*a*t")

    assert nf.element == G.parse("a^2")
    assert str(nf) == "[A] a^2"
    assert G.parse("t*a^2*t^-1") == G.parse("a")
    assert not G.parse("t*a*t^-1").is_identity()


def test_bs12_ball_matches_affine_matrices(bs12):
    """Test that the normal-form Cayley ball is in bijection with the affine matrix ball."""
    G = bs12.group
    ball = grow_ball(ball_oracle(G), G.identity(), 4)
    matrices = _matrix_ball(4)

    images = {_matrix_of(G, g) for g in ball.keys}
    assert len(ball) == len(matrices)
    assert len(images) == len(ball)
    assert images == set(matrices.keys)


def test_inverse_and_identity_forms(bs12):
    """Test that elements times their inverses give the identity."""
    G = bs12.group
    for text in ["t*a*t^-1*a", "a^-1*t^-2*a", "t^3*a^5"]:
        g = G.parse(text)
        assert G.multiply(g, G.inverse(g)).is_identity()
        assert G.from_letters(G.word(g)) == g


def test_bs12_tree_window(bs12):
    """Test that the Bass-Serre tree window of BS(1,2) is a 3-regular tree."""
    window = tree_window(bs12, 2)

    assert nx.is_tree(window.graph)
    assert len(window) == 10
    assert dict(window.graph.degree())[0] == 3


def test_free_product_halfspace(free_amalgam):
    """Test that the left halfspace of Z*Z over the trivial group is infinitely ended."""
    hs = halfspace_window(free_amalgam, "left", 3)
    report = probe_window(hs.window, 1)

    assert hs.connected
    assert len(hs.window) == 27
    assert len(hs.wall_ids) == 1
    assert report.unbounded_count == 6
    assert report.stable


def test_halfspace_radius_must_be_positive(free_amalgam):
    """Test that halfspace windows refuse radius zero and unknown definitions."""
    with pytest.raises(ValueError):
        halfspace_window(free_amalgam, LEFT, 0)
    with pytest.raises(ValueError):
        halfspace_window(free_amalgam, LEFT, 2, definition="guess")


def test_resolve_side_aliases():
    """Test side names and vertex-group letters."""
    assert resolve_side("A") == LEFT
    assert resolve_side("right") == RIGHT
    assert resolve_side(1) == RIGHT
    with pytest.raises(ValueError):
        resolve_side("up")


def test_trivial_splitting_is_refused():
    """Test that a splitting whose edge group is a vertex group has no tree."""
    Za = FreeGroup(["a"], "Za")
    Zb = FreeGroup(["b"], "Zb")
    spec = SplittingSpec(
        name="Za*_Za Zb",
        kind=AMALGAM,
        left=Za,
        right=Zb,
        left_images=(Za.parse("a"),),
        right_images=(Zb.parse("b^2"),),
    )

    assert spec.is_trivial()
    with pytest.raises(TrivialSplittingError):
        tree_window(spec, 2)


def test_artificial_split_records_source(scenario):
    """Test that the artificial split keeps the declared splitting as its source."""
    loaded = scenario("example71_small")
    spec = loaded.splitting

    assert spec.source is loaded.declared
    assert spec.kind == AMALGAM
    assert spec.right is loaded.declared.right
    assert not spec.is_trivial()
    assert [str(g) for g in spec.right_images] == ["x", "c"]


def test_artificial_split_edge_cases(scenario):
    """Test the D = C shortcut and the containment check."""
    declared = scenario("example71_small").declared
    B = declared.right

    same = artificial_split(declared, make_engine(B, [B.parse("x")]))
    assert same.source is declared
    assert same.name.endswith("[D=C]")

    with pytest.raises(ContainmentError):
        artificial_split(declared, make_engine(B, [B.parse("c")]))


def test_syntactic_checks_central(scenario):
    """Test that the commuting stable letter pattern yields a cited conclusion."""
    report = syntactic_checks(scenario("example83").declared, 1, 2)

    assert report["patterns"] == {"central_stable_letter": True, "double": False}
    assert report["group_probe"]["available"] is False
    assert report["one_ended_basis"] == "declared"
    assert {"claim": "halfspaces are one-ended", "citation": CITE_CENTRAL} in report["conclusions"]
    assert "delta_witness" in report


def test_syntactic_checks_double(scenario):
    """Test that the double pattern is recognised across a renamed copy."""
    report = syntactic_checks(scenario("example84").declared, 1, 2)

    assert report["patterns"] == {"central_stable_letter": False, "double": True}
    assert {"claim": "halfspaces are one-ended", "citation": CITE_DOUBLE} in report["conclusions"]
    assert report["finitely_presented"] is True
    assert report["edge_group_multi_ended"] is False
    assert all(item["citation"] != CITE_ACYCLIC for item in report["conclusions"])


def test_double_across_a_multi_ended_edge_group(scenario):
    """Test that the double across Z^3 * F2 also quotes nonzero H^2(G,ZG) once two radii agree on several pieces."""
    report = syntactic_checks(scenario("example84").declared, 1, 3)

    assert report["edge_group_probe"]["unbounded_count"] >= 2
    assert report["edge_group_probe"]["previous_count"] >= 2
    assert report["edge_group_multi_ended"] is True
    assert report["finitely_presented"] is True
    assert {"claim": "H^2(G,ZG) != 0", "citation": CITE_ACYCLIC} in report["conclusions"]
    assert f"conclusion ({CITE_ACYCLIC}): H^2(G,ZG) != 0" in report["summary"]


def test_syntactic_checks_no_pattern(scenario):
    """Test that a surface amalgam matches neither pattern and concludes nothing."""
    report = syntactic_checks(scenario("surface_genus2").declared, 1, 2)

    assert report["patterns"] == {"central_stable_letter": False, "double": False}
    assert report["conclusions"] == []
    assert "matches neither pattern" in report["summary"]


def test_tree_degrees_flag_complete_transversals(bs12, free_amalgam):
    """Test that finite-index edge groups give a complete transversal and infinite-index ones do not."""
    _, complete = bass_serre_oracle(bs12)
    _, limited = bass_serre_oracle(free_amalgam)

    assert complete
    assert not limited


def test_vertex_group_profile(free_amalgam):
    """Test that the infinite cyclic vertex groups of F2 probe two-ended."""
    profile = vertex_group_profile(free_amalgam, 1, 3)

    assert sorted(profile["vertex_groups"]) == ["Za", "Zb"]
    assert all(g["unbounded_count"] == 2 for g in profile["vertex_groups"].values())
    assert profile["all_one_ended"] is False


def test_halfspace_profiles_list_every_construction(free_amalgam):
    """Test that each side is probed under every halfspace construction."""
    profile = halfspace_profiles(free_amalgam, 1, 3)

    assert sorted(profile["sides"]) == ["left", "right"]
    left = profile["sides"]["left"]
    assert {"normal_form", "orbit_map", "tree_of_spaces", "agree"} <= set(left)
    assert left["normal_form"]["unbounded_count"] == 6
    with pytest.raises(ValueError):
        tree_of_spaces(free_amalgam, 1)


def test_trivial_splitting_has_one_vertex(z2):
    """Test that the trivial splitting is refused by tree code and maps every point to one vertex."""
    spec = trivial_splitting(z2)
    space = tree_of_spaces(spec, 2)

    assert spec.is_trivial()
    assert spec.name == "Z2 (trivial)"
    assert len(space.window) == 13
    assert len(set(space.projection)) == 1
    with pytest.raises(TrivialSplittingError):
        bass_serre_oracle(spec)


def test_surface_halfspaces_are_one_ended(scenario):
    """Test that both halfspaces of the genus-2 surface amalgam probe one end."""
    spec = scenario("surface_genus2").splitting

    for side in (LEFT, RIGHT):
        report = probe_window(halfspace_window(spec, side, 4).window, 1)
        assert report.unbounded_count == 1
        assert report.stable


def test_artificial_left_halfspace_is_multi_ended(scenario):
    """Test that the A * Z_c side of the split over D probes several stable ends."""
    spec = scenario("example71").splitting
    report = probe_window(halfspace_window(spec, LEFT, 4).window, 1)

    assert report.unbounded_count >= 2
    assert report.stable
