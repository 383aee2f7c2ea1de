import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from exceptions import GroupMismatchError
from groups import (
    DirectProduct,
    FreeAbelianGroup,
    FreeGroup,
    FreeProduct,
    TrivialGroup,
    check_disjoint_names,
    format_letters,
    free_reduce,
    renamed,
    transport,
)


def test_parse_and_format_free_words(f2):
    """Test that free group words reduce and print in power notation."""
    g = f2.parse("a*a*b^-1*b*b^-1")

    assert f2.format(g) == "a^2*b^-1"
    assert str(f2.parse("a^2*b^-1")) == "a^2*b^-1"
    assert f2.parse("a*a^-1").is_identity()
    assert f2.format(f2.identity()) == "1"


def test_parse_rejects_unknown_generators(f2):
    """Test that words naming foreign generators are refused."""
    with pytest.raises(ValueError):
        f2.parse("a*c")
    with pytest.raises(ValueError):
        f2.parse("a^x")


def test_free_reduce_and_letters():
    """Test free reduction and run-length formatting of letters."""
    assert free_reduce([1, 2, -2, -1, 1]) == (1,)
    assert format_letters(["x", "y"], [(0, 1), (0, 1), (1, -1)]) == "x^2*y^-1"
    assert format_letters(["x"], []) == "1"


def test_free_abelian_canonical_order(z2):
    """Test that abelian words are printed in generator order."""
    assert z2.format(z2.parse("b*a")) == "a*b"
    assert z2.format(z2.parse("b^-2*a^3*b")) == "a^3*b^-1"
    assert z2.vector(z2.parse("b*a^-1")) == (-1, 1)


def test_shortlex_keys(f2):
    """Test that shortlex compares length first, then letter rank."""
    words = sorted((f2.parse(w) for w in ["b", "a^-1", "a", "a^2", "1"]), key=f2.shortlex_key)

    assert [f2.format(g) for g in words] == ["1", "a", "a^-1", "b", "a^2"]


def test_direct_product_embed_and_component():
    """Test that direct product factors commute and project back."""
    F = FreeGroup(["x", "y"], "F")
    Z = FreeAbelianGroup(["d"], "Z")
    P = DirectProduct([F, Z], "P")
    g = P.parse("d*x*d*y")

    assert P.format(g) == "x*y*d^2"
    assert P.component(g, 0) == F.parse("x*y")
    assert P.embed(1, Z.parse("d^2")) == P.parse("d^2")


def test_free_product_syllables():
    """Test that free product elements split into alternating syllables."""
    A = FreeAbelianGroup(["a", "b"], "A")
    C = FreeGroup(["c"], "C")
    G = FreeProduct([A, C], "G")
    g = G.parse("b*a*c*c^-1*a*c")

    syllables = G.syllables(g)
    assert [j for j, _ in syllables] == [0, 1]
    assert A.format(syllables[0][1]) == "a^2*b"
    assert G.format(g) == "a^2*b*c"
    assert G.embed(0, A.identity()).is_identity()


def test_trivial_group():
    """Test that the trivial group has only the identity."""
    T = TrivialGroup("T")

    assert T.identity().is_identity()
    assert T.format(T.parse("1")) == "1"
    assert T.generators() == []


def test_mixing_groups_is_refused(f2):
    """Test that elements of different groups cannot be multiplied."""
    other = FreeGroup(["a", "b"], "F2 copy")

    with pytest.raises(GroupMismatchError):
        f2.multiply(f2.parse("a"), other.parse("a"))


def test_renamed_copy_and_transport():
    """Test that renamed copies share forms and elements transport between them."""
    F = FreeGroup(["x", "y"], "F")
    P = DirectProduct([F, FreeAbelianGroup(["d"], "Z")], "P")
    Q = renamed(P, lambda n: n + "'")
    g = P.parse("x*y^-1*d")

    assert Q.names == ("x'", "y'", "d'")
    assert Q.name == "P'"
    assert Q.format(transport(g, Q)) == "x'*y'^-1*d'"
    with pytest.raises(GroupMismatchError):
        transport(g, F)


def test_generator_names_must_be_disjoint(f2, z2):
    """Test that two groups sharing a generator name are rejected."""
    with pytest.raises(ValueError):
        check_disjoint_names([f2, z2])
    with pytest.raises(ValueError):
        FreeGroup(["a", "a"])


def _random_element(rng, G, length):
    gens = G.generators()
    g = G.identity()
    for _ in range(length):
        s = rng.choice(gens)
        g = G.multiply(g, s if rng.random() < 0.5 else G.inverse(s))
    return g


@pytest.mark.parametrize("fixture", ["f2", "z2", "free_product", "direct_product", "bs12", "surface"])
def test_random_triples_associate(fixture, f2, z2, scenario):
    """Test that normal-form multiplication is associative on random triples."""
    groups = {
        "f2": f2,
        "z2": z2,
        "free_product": FreeProduct([FreeAbelianGroup(["x", "y"], "A"), FreeGroup(["c"], "C")], "G"),
        "direct_product": DirectProduct([FreeGroup(["p", "q"], "F"), FreeGroup(["r"], "Z")], "P"),
        "bs12": scenario("bs12").splitting.group,
        "surface": scenario("surface_genus2").splitting.group,
    }
    G = groups[fixture]
    rng = random.Random(13)
    for _ in range(100):
        g, h, k = (_random_element(rng, G, rng.randint(0, 6)) for _ in range(3))

        assert G.multiply(G.multiply(g, h), k) == G.multiply(g, G.multiply(h, k))
        assert G.multiply(g, G.inverse(g)).is_identity()


def test_supported_kinds_are_finitely_presented(scenario):
    """Test that products and split groups of supported kinds report a finite presentation."""
    P = DirectProduct([FreeGroup(["p"], "F"), FreeAbelianGroup(["d", "e"], "Z")], "P")

    assert TrivialGroup("T").has_finite_presentation()
    assert FreeProduct([P, FreeGroup(["c"], "C")], "G").has_finite_presentation()
    assert scenario("example71").splitting.group.has_finite_presentation()
