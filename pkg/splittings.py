"""
Amalgams and HNN extensions, their normal forms and Bass-Serre trees.

A SplittingSpec declares the vertex groups and the edge group (through its
images on both sides). SplitGroup realises the split group as a MarkedGroup
whose forms are normal forms:

    amalgam  A *_C B   (syllables, c)   syllables alternate sides, each a canonical
                                        left coset representative, c a C-element of A
    HNN      A *_C     (pairs, a)       pairs (r, e) read r t^e, with no pinch

Tree vertices and edges are labelled by the canonical prefixes of these forms,
so the whole tree is computed lazily from normal forms.
"""
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Any, Dict, FrozenSet, Hashable, List, Optional, Sequence, Tuple, Union

import networkx as nx
from mcp.server.fastmcp.utilities.logging import get_logger

from config import get_settings
from exceptions import CapabilityError, ContainmentError, GroupMismatchError, TrivialSplittingError
from graphs import BallGraph, EndReport, NeighborOracle, end_probe, grow_ball, normalize_edge, probe_window
from groups import (
    GroupElement,
    Letter,
    MarkedGroup,
    ball_oracle,
    check_disjoint_names,
    renamed,
    structure,
)
from subgroups import (
    FreeFactorEngine,
    ProductEngine,
    ReindexedEngine,
    SubgroupEngine,
    WholeEngine,
    make_engine,
)

logger = get_logger(__name__)

AMALGAM = "amalgam"
HNN = "hnn"
TRIVIAL = "trivial"

LEFT, RIGHT = 0, 1
SIDE_NAMES = ("left", "right")
_SIDE_ALIASES = {"left": LEFT, "a": LEFT, "0": LEFT, "right": RIGHT, "b": RIGHT, "t": RIGHT, "1": RIGHT}

CITE_CENTRAL = "cited: HNN extensions whose stable letter centralizes the edge group"
CITE_DOUBLE = "cited: doubles of a group across a subgroup"
CITE_ACYCLIC = "cited: one-ended halfspaces over a multi-ended edge group force nonzero H^2(G,ZG)"
CITE_VERTEX = "cited: one-ended vertex groups give one-ended halfspaces"
CITE_TWO_ENDED = "cited: splittings of one-ended groups over two-ended groups have one-ended halfspaces"


def resolve_side(side: Union[int, str]) -> int:
    """Accept 0/1, left/right, or the vertex-group letters A, B and T."""
    if isinstance(side, int) and side in (LEFT, RIGHT):
        return side
    key = str(side).strip().lower()
    if key not in _SIDE_ALIASES:
        raise ValueError(f"unknown side {side!r}; use left or right")
    return _SIDE_ALIASES[key]


def _evaluate(word: Sequence[Letter], images: Sequence[GroupElement], group: MarkedGroup) -> GroupElement:
    result = group.identity()
    for index, sign in word:
        x = images[index]
        result = group.multiply(result, x if sign > 0 else group.inverse(x))
    return result


@dataclass(frozen=True, eq=False)
class SplittingSpec:
    """
    An amalgam A *_C B or an HNN extension A *_C.

    left_images are the edge-group generators inside A. For amalgams,
    right_images are the same generators inside B; for HNN extensions they are
    their images under the edge isomorphism, again inside A.
    """
    name: str
    kind: str
    left: MarkedGroup
    right: Optional[MarkedGroup] = None
    left_images: Tuple[GroupElement, ...] = ()
    right_images: Tuple[GroupElement, ...] = ()
    stable_letter: str = "t"
    central: bool = False
    double: bool = False
    source: Optional["SplittingSpec"] = None
    hypotheses: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if self.kind not in (AMALGAM, HNN, TRIVIAL):
            raise ValueError(f"unknown splitting kind {self.kind!r}")
        if self.kind == TRIVIAL:
            return
        if len(self.left_images) != len(self.right_images):
            raise ValueError("edge group images must come in matching pairs")
        target = self.right if self.kind == AMALGAM else self.left
        if target is None:
            raise ValueError("an amalgam needs a right vertex group")
        for g in self.left_images:
            if g.group is not self.left:
                raise GroupMismatchError(g.group.name, self.left.name)
        for g in self.right_images:
            if g.group is not target:
                raise GroupMismatchError(g.group.name, target.name)
        if self.kind == AMALGAM:
            check_disjoint_names([self.left, self.right])
        elif self.stable_letter in self.left.names:
            raise ValueError(f"stable letter {self.stable_letter!r} clashes with a generator name")
        if self.central and not matches_central(self):
            raise ValueError("central flag needs an HNN extension whose edge map fixes every generator")
        if self.double and not matches_double(self):
            raise ValueError("double flag needs B to be a renamed copy of A with matching edge images")

    @cached_property
    def left_engine(self) -> SubgroupEngine:
        return make_engine(self.left, self.left_images)

    @cached_property
    def right_engine(self) -> SubgroupEngine:
        target = self.right if self.kind == AMALGAM else self.left
        return make_engine(target, self.right_images)

    @cached_property
    def group(self) -> MarkedGroup:
        if self.kind == TRIVIAL:
            return self.left
        return SplitGroup(self)

    def vertex_groups(self) -> List[MarkedGroup]:
        return [self.left] if self.kind != AMALGAM else [self.left, self.right]

    def engines_supported(self) -> Tuple[bool, str]:
        """Whether both edge-group engines can be built, with the refusal otherwise."""
        if self.kind == TRIVIAL:
            return True, ""
        try:
            self.left_engine
            self.right_engine
        except CapabilityError as e:
            return False, str(e)
        return True, ""

    def is_trivial(self) -> bool:
        """True for splittings with a global fixed vertex."""
        if self.kind == TRIVIAL:
            return True
        if self.kind == AMALGAM:
            return self.left_engine.is_whole() or self.right_engine.is_whole()
        return self.left_engine.is_whole() and self.right_engine.is_whole()

    def require_nontrivial(self) -> None:
        if self.is_trivial():
            raise TrivialSplittingError(f"{self.name} has an edge group equal to a vertex group")

    def edge_rank(self) -> int:
        return len([g for g in self.left_images if not g.is_identity()])


def trivial_splitting(group: MarkedGroup, name: str = "") -> SplittingSpec:
    """The splitting of group over itself: a tree with a single vertex."""
    return SplittingSpec(name=name or f"{group.name} (trivial)", kind=TRIVIAL, left=group)


def matches_central(spec: SplittingSpec) -> bool:
    """HNN extension whose edge isomorphism is the identity on generators."""
    if spec.kind != HNN:
        return False
    return [g.form for g in spec.left_images] == [g.form for g in spec.right_images]


def matches_double(spec: SplittingSpec) -> bool:
    """Amalgam of a group with a renamed copy of itself along matching subgroups."""
    if spec.kind != AMALGAM or spec.right is None:
        return False
    if structure(spec.left) != structure(spec.right):
        return False
    return [g.form for g in spec.left_images] == [g.form for g in spec.right_images]


@dataclass(frozen=True)
class TreeVertex:
    tag: str
    path: Tuple


@dataclass(frozen=True)
class TreeEdge:
    path: Tuple


class SplitGroup(MarkedGroup):
    """The fundamental group of a one-edge splitting, with normal forms."""

    kind = "splitting"

    def __init__(self, spec: SplittingSpec):
        self.spec = spec
        self.amalgam = spec.kind == AMALGAM
        if self.amalgam:
            names = spec.left.names + spec.right.names
            self.sides: Tuple[MarkedGroup, ...] = (spec.left, spec.right)
        else:
            names = spec.left.names + (spec.stable_letter,)
            self.sides = (spec.left,)
        super().__init__(names, spec.name)
        self.engines = (spec.left_engine, spec.right_engine)
        self._images = (spec.left_images, spec.right_images)
        self._offset = len(spec.left.names)
        self.tags = ("A", "B") if self.amalgam else ("V",)

    # normal-form steps

    def _across(self, c: GroupElement, side: int) -> GroupElement:
        """An edge-group element of sides[side] read in the other vertex group."""
        word = self.engines[side].express(c)
        return _evaluate(word, self._images[1 - side], self.sides[1 - side])

    def _twist(self, c: GroupElement, eps: int) -> GroupElement:
        # eps > 0: edge map on C; eps < 0: its inverse on the image subgroup
        src = 0 if eps > 0 else 1
        word = self.engines[src].express(c)
        return _evaluate(word, self._images[1 - src], self.sides[0])

    def _side_step(self, form, side: int, s: GroupElement):
        if not self.amalgam:
            pairs, a = form
            return (pairs, self.sides[0].mul_forms(a, s.form))
        syl, c = form
        X = self.sides[side]
        c_el = self.sides[0].element(c)
        c_x = c_el if side == 0 else self._across(c_el, 0)
        if syl and syl[-1][0] == side:
            z = X.multiply(X.multiply(X.element(syl[-1][1]), c_x), s)
            syl = syl[:-1]
        else:
            z = X.multiply(c_x, s)
        x = self.engines[side].left_rep(z)
        rest = X.multiply(X.inverse(x), z)
        if not x.is_identity():
            syl = syl + ((side, x.form),)
        trailing = rest if side == 0 else self._across(rest, 1)
        return (syl, trailing.form)

    def _stable_step(self, form, eps: int):
        pairs, a = form
        A = self.sides[0]
        a_el = A.element(a)
        engine = self.engines[0] if eps > 0 else self.engines[1]
        if pairs and pairs[-1][1] == -eps and engine.contains(a_el):
            r = A.element(pairs[-1][0])
            return (pairs[:-1], A.multiply(r, self._twist(a_el, eps)).form)
        r = engine.left_rep(a_el)
        c = A.multiply(A.inverse(r), a_el)
        return (pairs + ((r.form, eps),), self._twist(c, eps).form)

    def _pieces(self, form):
        """The form as a sequence of ('side', side, element) and ('t', eps) steps."""
        head, tail = form
        if self.amalgam:
            for side, x in head:
                yield ("side", side, self.sides[side].element(x))
        else:
            for r, eps in head:
                yield ("side", 0, self.sides[0].element(r))
                yield ("t", eps, None)
        yield ("side", 0, self.sides[0].element(tail))

    def _apply(self, form, piece):
        kind, arg, x = piece
        if kind == "t":
            return self._stable_step(form, arg)
        if x.is_identity():
            return form
        return self._side_step(form, arg, x)

    def identity_form(self):
        return ((), self.sides[0].identity_form())

    def mul_forms(self, f, g):
        for piece in self._pieces(g):
            f = self._apply(f, piece)
        return f

    def inv_form(self, f):
        out = self.identity_form()
        for kind, arg, x in reversed(list(self._pieces(f))):
            if kind == "t":
                out = self._stable_step(out, -arg)
            elif not x.is_identity():
                out = self._side_step(out, arg, self.sides[arg].inverse(x))
        return out

    def generator_form(self, index):
        if not self.amalgam and index == self._offset:
            return self._stable_step(self.identity_form(), 1)
        side = 0 if index < self._offset else 1
        local = index if side == 0 else index - self._offset
        return self._side_step(self.identity_form(), side, self.sides[side].generator(local))

    def word_of_form(self, f):
        letters: List[Letter] = []
        for kind, arg, x in self._pieces(f):
            if kind == "t":
                letters.append((self._offset, arg))
            else:
                shift = 0 if arg == 0 else self._offset
                letters.extend((i + shift, s) for i, s in self.sides[arg].word(x))
        return letters

    def is_torsion_free(self) -> bool:
        return all(X.is_torsion_free() for X in self.sides)

    def has_finite_presentation(self) -> bool:
        # the edge group is generated by finitely many listed images
        return all(X.has_finite_presentation() for X in self.sides)

    # vertex groups and edge group

    def embed(self, side: int, x: GroupElement) -> GroupElement:
        self.sides[side]._check(x)
        if x.is_identity():
            return self.identity()
        return self.element(self._side_step(self.identity_form(), side, x))

    def stable(self) -> GroupElement:
        if self.amalgam:
            raise ValueError("amalgams have no stable letter")
        return self.generator(self._offset)

    def side_generators(self, side: int) -> List[GroupElement]:
        return [self.embed(side, x) for x in self.sides[side].generators()]

    def edge_generators(self) -> List[GroupElement]:
        return [self.embed(0, c) for c in self.spec.left_images]

    def to_side(self, g: GroupElement, side: int) -> Optional[GroupElement]:
        """g as an element of the vertex group on side, or None when outside it."""
        self._check(g)
        head, tail = g.form
        c = self.sides[0].element(tail)
        if not self.amalgam:
            return None if head else c
        if not head:
            return c if side == 0 else self._across(c, 0)
        if len(head) == 1 and head[0][0] == side:
            X = self.sides[side]
            c_x = c if side == 0 else self._across(c, 0)
            return X.multiply(X.element(head[0][1]), c_x)
        return None

    def in_edge_group(self, g: GroupElement) -> bool:
        head, tail = g.form
        if head:
            return False
        return self.amalgam or self.engines[0].contains(self.sides[0].element(tail))

    def engine_for(self, generators: Sequence[GroupElement]) -> SubgroupEngine:
        for side in range(len(self.sides)):
            gens = self.side_generators(side)
            if set(gens) == set(generators):
                engine = VertexGroupEngine(self, side)
                if list(generators) == gens:
                    return engine
                return ReindexedEngine(engine, generators)
        raise CapabilityError("subgroup of a split group", "only vertex groups are recognised")

    # Bass-Serre tree

    def path_element(self, path: Tuple) -> GroupElement:
        return self.element((path, self.sides[0].identity_form()))

    def vertex_of(self, g: GroupElement, tag: str = "") -> TreeVertex:
        """The vertex g*X for the vertex group tagged A, B or V."""
        tag = tag or self.tags[0]
        head = g.form[0]
        if self.amalgam:
            side = self.tags.index(tag)
            if head and head[-1][0] == side:
                head = head[:-1]
        return TreeVertex(tag, head)

    def edge_of(self, g: GroupElement) -> TreeEdge:
        """The edge g*e0."""
        if self.amalgam:
            return TreeEdge(g.form[0])
        p = g.form[0]
        q = self.multiply(g, self.stable()).form[0]
        return TreeEdge(q if len(q) > len(p) else p)

    def base_edge(self) -> TreeEdge:
        if self.amalgam:
            return TreeEdge(())
        return TreeEdge(((self.sides[0].identity_form(), 1),))

    def basepoint(self) -> TreeVertex:
        return TreeVertex(self.tags[0], ())

    def edge_rep(self, e: TreeEdge) -> GroupElement:
        """Canonical g with g*e0 = e."""
        if self.amalgam:
            return self.path_element(e.path)
        if not e.path:
            raise ValueError("HNN edges are labelled by a nonempty path")
        parent, (x, eps) = e.path[:-1], e.path[-1]
        if eps > 0:
            return self.element((parent, x))
        return self.path_element(e.path)

    def edge_ends(self, e: TreeEdge) -> Tuple[TreeVertex, TreeVertex]:
        g = self.edge_rep(e)
        if self.amalgam:
            return self.vertex_of(g, "A"), self.vertex_of(g, "B")
        return self.vertex_of(g), self.vertex_of(self.multiply(g, self.stable()))

    def act(self, h: GroupElement, v: TreeVertex) -> TreeVertex:
        return self.vertex_of(self.multiply(h, self.path_element(v.path)), v.tag)

    def edge_act(self, h: GroupElement, e: TreeEdge) -> TreeEdge:
        return self.edge_of(self.multiply(h, self.edge_rep(e)))

    def vertex_side(self, v: TreeVertex) -> int:
        """Side of the base edge the vertex lies on."""
        if self.amalgam:
            if v.path:
                return v.path[0][0]
            return self.tags.index(v.tag)
        if v.path and v.path[0] == (self.sides[0].identity_form(), 1):
            return RIGHT
        return LEFT

    def element_sides(self, g: GroupElement) -> FrozenSet[int]:
        """Sides of the base edge whose normal-form halfspace contains g."""
        head = g.form[0]
        if self.in_edge_group(g):
            return frozenset((LEFT, RIGHT))
        if self.amalgam:
            return frozenset((head[0][0],))
        if head and head[0] == (self.sides[0].identity_form(), 1):
            return frozenset((RIGHT,))
        return frozenset((LEFT,))

    def format_vertex(self, v: TreeVertex) -> str:
        return f"{v.tag}:{self.format(self.path_element(v.path))}"

    def format_edge(self, e: TreeEdge) -> str:
        return f"e:{self.format(self.edge_rep(e))}"

    def cayley_generators(self) -> List[GroupElement]:
        """Marked generators plus the edge-group generators, so walls are connected."""
        out: List[GroupElement] = []
        for s in self.generators() + self.edge_generators():
            if not s.is_identity() and s not in out:
                out.append(s)
        return out


class VertexGroupEngine(SubgroupEngine):
    """
    A vertex group of a split group.

    The representative of the right coset X*g is the inverse of the tree-vertex
    prefix of g^-1; it is canonical but not shortlex-least.
    """

    kind = "vertex_group"

    def __init__(self, group: SplitGroup, side: int):
        super().__init__(group, group.side_generators(side))
        self.side = side

    def contains(self, g):
        return self.ambient.to_side(g, self.side) is not None

    def _coset_rep(self, g):
        G = self.ambient
        v = G.vertex_of(G.inverse(g), G.tags[self.side])
        return G.inverse(G.path_element(v.path))

    def _express(self, g):
        x = self.ambient.to_side(g, self.side)
        if x is None:
            raise ValueError(f"{g} is not in the vertex group")
        return self.ambient.sides[self.side].word(x)

    def is_whole(self):
        G = self.ambient
        return G.amalgam and G.engines[1 - self.side].is_whole()


@dataclass(frozen=True)
class NormalForm:
    element: GroupElement
    pieces: Tuple[str, ...]
    vertex: TreeVertex

    def __str__(self) -> str:
        return " . ".join(self.pieces) if self.pieces else "1"


def normalize(spec: SplittingSpec, word: Union[str, Sequence[Letter]]) -> NormalForm:
    """
    Normal form of a word in the generators of the split group.

    Args:
        spec: The splitting
        word: Either text such as "t*a^2*t^-1" or a sequence of (generator index, sign)

    Raises:
        CapabilityError: If an edge-group engine is unsupported
    """
    G = spec.group
    if not isinstance(G, SplitGroup):
        raise TrivialSplittingError(f"{spec.name} has no normal forms of its own")
    g = G.parse(word) if isinstance(word, str) else G.from_letters(word)
    pieces = []
    for kind, arg, x in G._pieces(g.form):
        if kind == "t":
            pieces.append(spec.stable_letter if arg > 0 else f"{spec.stable_letter}^-1")
        elif not x.is_identity():
            pieces.append(f"[{G.tags[arg] if G.amalgam else 'A'}] {x}")
    return NormalForm(g, tuple(pieces), G.vertex_of(g))


def project(spec: SplittingSpec, g: GroupElement) -> TreeVertex:
    """The orbit map g -> g*A."""
    return spec.group.vertex_of(g)


def coset_transversal(group: MarkedGroup, engine: SubgroupEngine, radius: int) -> Tuple[List[GroupElement], bool]:
    """
    Left-coset representatives met within the given radius of group.

    Returns:
        Sorted representatives (identity first) and whether the list is the full
        transversal, which holds when one more radius adds nothing.
    """
    ball = grow_ball(ball_oracle(group), group.identity(), radius + 1)
    inner, outer = set(), set()
    for key, d in zip(ball.keys, ball.depth):
        rep = engine.left_rep(key)
        outer.add(rep)
        if d <= radius:
            inner.add(rep)
    reps = sorted(inner, key=group.shortlex_key)
    return reps, inner == outer


def bass_serre_oracle(spec: SplittingSpec, coset_radius: int = 1) -> Tuple[NeighborOracle, bool]:
    """
    Lazy Bass-Serre tree.

    Neighbors of a vertex come from coset representatives met within
    coset_radius of the vertex group; the flag reports whether those
    representatives are the complete transversal (finite degree) or only a
    frontier-limited part of it.

    Raises:
        TrivialSplittingError: For splittings with a global fixed vertex
    """
    spec.require_nontrivial()
    G = spec.group
    reps, complete = [], True
    for side, engine in enumerate(G.engines):
        X = G.sides[0] if not G.amalgam else G.sides[side]
        r, full = coset_transversal(X, engine, coset_radius)
        reps.append(r)
        complete = complete and full
    if not complete:
        logger.info("tree degrees in %s are frontier-limited at coset radius %d", spec.name, coset_radius)

    def amalgam_neighbors(v: TreeVertex) -> List[TreeVertex]:
        side = G.tags.index(v.tag)
        other = G.tags[1 - side]
        out = []
        for x in reps[side]:
            label = v.path if x.is_identity() else v.path + ((side, x.form),)
            if label and label[-1][0] == 1 - side:
                label = label[:-1]
            out.append(TreeVertex(other, label))
        return out

    def hnn_neighbors(v: TreeVertex) -> List[TreeVertex]:
        p = v.path
        out = [TreeVertex("V", p[:-1])] if p else []
        for eps, side in ((1, 0), (-1, 1)):
            for x in reps[side]:
                if x.is_identity() and p and p[-1][1] == -eps:
                    continue
                out.append(TreeVertex("V", p + ((x.form, eps),)))
        return out

    neighbors = amalgam_neighbors if G.amalgam else hnn_neighbors
    return NeighborOracle(neighbors=neighbors, label=G.format_vertex), complete


def tree_window(spec: SplittingSpec, radius: int, coset_radius: int = 1, budget: Optional[int] = None) -> BallGraph:
    """Ball of the Bass-Serre tree around the basepoint."""
    oracle, _ = bass_serre_oracle(spec, coset_radius)
    return grow_ball(oracle, spec.group.basepoint(), radius, budget)


def _symmetric(group: MarkedGroup, gens: Sequence[GroupElement]) -> List[GroupElement]:
    out: List[GroupElement] = []
    for s in gens:
        for x in (s, group.inverse(s)):
            if not x.is_identity() and x not in out:
                out.append(x)
    return out


@lru_cache(maxsize=16)
def cayley_window(spec: SplittingSpec, radius: int, center: Optional[GroupElement] = None,
                  budget: Optional[int] = None) -> BallGraph:
    """
    Ball in the Cayley graph of the split group, with wall edges marked.

    Wall edges join two elements of the same edge-group coset.
    """
    G = spec.group
    if not isinstance(G, SplitGroup):
        return grow_ball(ball_oracle(G), G.identity() if center is None else center, radius, budget)
    gens = G.cayley_generators()
    ball = grow_ball(ball_oracle(G, gens), G.identity() if center is None else center, radius, budget)
    wall_gens = [s for s in _symmetric(G, gens) if G.in_edge_group(s)]
    walls = set()
    for u, key in enumerate(ball.keys):
        for s in wall_gens:
            v = ball.index.get(G.multiply(key, s))
            if v is not None and v != u:
                walls.add(normalize_edge(u, v))
    logger.info("cayley window of %s: radius %d, %d vertices, %d wall edges", spec.name, radius, len(ball), len(walls))
    return replace(ball, wall_edges=frozenset(walls))


@dataclass(frozen=True)
class HalfspaceBall:
    """One side of a wall as a Cayley window; spec and edge are None for windows built directly from a graph."""
    spec: Optional[SplittingSpec]
    edge: Optional[TreeEdge]
    side: int
    window: BallGraph
    wall_window: BallGraph
    connected: bool
    definition: str = "normal_form"

    @property
    def radius(self) -> int:
        return self.window.radius

    @property
    def side_name(self) -> str:
        return SIDE_NAMES[self.side]

    @cached_property
    def wall_ids(self) -> FrozenSet[int]:
        """Window ids of the wall vertices."""
        index = self.window.index
        return frozenset(index[k] for k in self.wall_window.keys)


HALFSPACE_DEFINITIONS = ("normal_form", "orbit_map")


def halfspace_window(
    spec: SplittingSpec,
    side: Union[int, str] = LEFT,
    radius: Optional[int] = None,
    edge: Optional[TreeEdge] = None,
    definition: str = "normal_form",
    budget: Optional[int] = None,
) -> HalfspaceBall:
    """
    Induced Cayley window on one halfspace of an edge.

    Args:
        spec: A non-trivial splitting
        side: Side of the edge (left holds the vertex g*A of the edge rep g)
        radius: Cayley radius around the edge representative (defaults to probe_radius)
        edge: Tree edge, defaults to the base edge
        definition: "normal_form" (first syllable decides) or "orbit_map"
            (preimage of the tree halfspace under g -> g*A, wall added)
    """
    side = resolve_side(side)
    if radius is None:
        radius = get_settings().probe_radius
    if radius < 1:
        raise ValueError("halfspace windows need radius >= 1")
    if definition not in HALFSPACE_DEFINITIONS:
        raise ValueError(f"unknown halfspace definition {definition!r}")
    G = spec.group
    if not isinstance(G, SplitGroup):
        raise TrivialSplittingError(f"{spec.name} has no edges")
    e = edge or G.base_edge()
    rep = G.edge_rep(e)
    rep_inv = G.inverse(rep)
    ball = cayley_window(spec, radius, rep, budget)

    ids, wall = [], []
    for i, key in enumerate(ball.keys):
        local = G.multiply(rep_inv, key)
        in_wall = G.in_edge_group(local)
        if definition == "normal_form":
            inside = side in G.element_sides(local)
        else:
            inside = in_wall or G.vertex_side(G.vertex_of(local)) == side
        if inside:
            ids.append(i)
        if in_wall:
            wall.append(i)
    window = ball.induced(ids)
    connected = len(window) > 0 and nx.is_connected(window.graph)
    if not connected:
        logger.warning("halfspace window %s/%s is disconnected at radius %d", spec.name, SIDE_NAMES[side], radius)
    return HalfspaceBall(spec, e, side, window, ball.induced(wall), connected, definition)


@dataclass(frozen=True)
class TreeOfSpaces:
    window: BallGraph
    projection: Tuple[Hashable, ...]
    walls: Tuple[FrozenSet[int], ...]
    disconnected: Tuple[str, ...] = ()


def tree_of_spaces(spec: SplittingSpec, radius: int, budget: Optional[int] = None) -> TreeOfSpaces:
    """
    A G-space X over the Bass-Serre tree, grown around the base edge midpoint.

    X has one copy of G per vertex group and one for the edge: (g, A) spans a
    Cayley graph of g*A, (g, M) of the wall g*C, and (g, A)-(g, M)-(g, B) join
    them (HNN: (g, V)-(g, M)-(g*t, V)). The projection sends (g, X) to the
    vertex g*X and (g, M) to the midpoint of the edge g*e0.
    """
    if radius < 2:
        raise ValueError("tree of spaces needs radius >= 2")
    G = spec.group
    if spec.kind == TRIVIAL:
        ball = grow_ball(ball_oracle(G), G.identity(), radius, budget)
        point = TreeVertex("V", ())
        return TreeOfSpaces(ball, tuple(point for _ in ball.keys), ())

    sym = [_symmetric(G, G.side_generators(side)) for side in range(len(G.sides))]
    sym_c = _symmetric(G, G.edge_generators())

    if G.amalgam:
        def neighbors(key):
            g, tag = key
            if tag == "M":
                return [(G.multiply(g, c), "M") for c in sym_c] + [(g, "A"), (g, "B")]
            side = G.tags.index(tag)
            return [(G.multiply(g, s), tag) for s in sym[side]] + [(g, "M")]
    else:
        t = G.stable()
        t_inv = G.inverse(t)

        def neighbors(key):
            g, tag = key
            if tag == "M":
                return [(G.multiply(g, c), "M") for c in sym_c] + [(g, "V"), (G.multiply(g, t), "V")]
            return [(G.multiply(g, s), "V") for s in sym[0]] + [(g, "M"), (G.multiply(g, t_inv), "M")]

    oracle = NeighborOracle(neighbors=neighbors, label=lambda key: f"{G.format(key[0])}|{key[1]}")
    ball = grow_ball(oracle, (G.identity(), "M"), radius, budget)

    projection = []
    cells: Dict[Hashable, List[int]] = {}
    wall_edges = set()
    for i, (g, tag) in enumerate(ball.keys):
        cell = G.edge_of(g) if tag == "M" else G.vertex_of(g, tag)
        projection.append(cell)
        cells.setdefault(cell, []).append(i)
    for (u, v) in ball.edges:
        if ball.keys[u][1] == "M" and ball.keys[v][1] == "M":
            wall_edges.add((u, v))

    walls = tuple(frozenset(ids) for cell, ids in cells.items() if isinstance(cell, TreeEdge))
    disconnected = []
    for cell, ids in cells.items():
        if len(ids) > 1 and not nx.is_connected(ball.graph.subgraph(ids)):
            label = G.format_edge(cell) if isinstance(cell, TreeEdge) else G.format_vertex(cell)
            disconnected.append(label)
    if disconnected:
        logger.info("tree of spaces %s: %d preimages disconnected in the window", spec.name, len(disconnected))
    window = replace(ball, wall_edges=frozenset(wall_edges))
    return TreeOfSpaces(window, tuple(projection), walls, tuple(sorted(disconnected)))


def space_halfspace(spec: SplittingSpec, space: TreeOfSpaces, side: Union[int, str]) -> BallGraph:
    """Preimage in X of one closed halfspace of the base edge."""
    side = resolve_side(side)
    G = spec.group
    base = G.base_edge()
    ids = []
    for i, cell in enumerate(space.projection):
        if isinstance(cell, TreeEdge):
            if cell == base:
                ids.append(i)
                continue
            cell = G.edge_ends(cell)[0]
        if G.vertex_side(cell) == side:
            ids.append(i)
    return space.window.induced(ids)


def halfspace_profiles(spec: SplittingSpec, r: Optional[int] = None, R: Optional[int] = None,
                       budget: Optional[int] = None) -> Dict[str, Any]:
    """
    End probes of both base-edge halfspaces under the three halfspace constructions.

    Matching counts corroborate that the constructions agree up to quasi-isometry.
    """
    settings = get_settings()
    r = settings.inner_radius if r is None else r
    R = settings.probe_radius if R is None else R
    spec.require_nontrivial()
    space = tree_of_spaces(spec, R, budget)
    sides = {}
    for side in (LEFT, RIGHT):
        row = {}
        for definition in HALFSPACE_DEFINITIONS:
            hs = halfspace_window(spec, side, R, definition=definition, budget=budget)
            row[definition] = report_json(probe_window(hs.window, r))
        row["tree_of_spaces"] = report_json(probe_window(space_halfspace(spec, space, side), r))
        counts = {row[k]["unbounded_count"] for k in row}
        row["agree"] = len(counts) == 1
        sides[SIDE_NAMES[side]] = row
    return {"splitting": spec.name, "inner_radius": r, "probe_radius": R, "sides": sides}


def report_json(report: EndReport) -> Dict[str, Any]:
    return {
        "unbounded_count": report.unbounded_count,
        "bounded_count": report.bounded_count,
        "stable": report.stable,
        "previous_count": report.previous_count,
        "summary": report.summary(),
    }


def vertex_group_profile(spec: SplittingSpec, r: Optional[int] = None, R: Optional[int] = None,
                         budget: Optional[int] = None) -> Dict[str, Any]:
    """End probes of the vertex groups in their own marked generators."""
    settings = get_settings()
    r = settings.inner_radius if r is None else r
    R = settings.probe_radius if R is None else R
    groups = {}
    for X in spec.vertex_groups():
        report = end_probe(ball_oracle(X), X.identity(), r, R, budget)
        groups[X.name] = report_json(report)
    one_ended = all(g["unbounded_count"] == 1 and g["stable"] for g in groups.values())
    return {"vertex_groups": groups, "all_one_ended": one_ended}


def _factor_of(B: MarkedGroup, engine: SubgroupEngine):
    """Find D as a whole direct or free factor of B: (D, embed D -> B, project B -> D)."""
    while isinstance(engine, ReindexedEngine):
        engine = engine.inner
    if isinstance(engine, WholeEngine):
        return B, (lambda x: x), (lambda g: g)
    if isinstance(engine, ProductEngine):
        live = [i for i, e in enumerate(engine.engines) if not e.is_trivial()]
        if len(live) == 1 and engine.engines[live[0]].is_whole():
            i = live[0]
            return B.factors[i], (lambda x: B.embed(i, x)), (lambda g: B.component(g, i))
    if isinstance(engine, FreeFactorEngine) and engine.inner.is_whole():
        i = engine.factor
        factor = B.factors[i]

        def project_free(g: GroupElement) -> GroupElement:
            syl = B.syllables(g)
            return syl[0][1] if syl else factor.identity()

        return factor, (lambda x: B.embed(i, x)), project_free
    raise CapabilityError("artificial split", "D must be a direct or free factor of B")


def artificial_split(spec: SplittingSpec, d_engine: SubgroupEngine, name: str = "") -> SplittingSpec:
    """
    Rewrite A *_C B as (A *_C D) *_D B for C <= D <= B.

    The copy of D inside the left vertex group gets primed generator names. D = C
    returns the input relabelled; D = B yields a splitting flagged trivial.

    Raises:
        ContainmentError: If some edge generator of C is not in D
    """
    if spec.kind != AMALGAM:
        raise ValueError("artificial splits start from an amalgam")
    if d_engine.ambient is not spec.right:
        raise GroupMismatchError(d_engine.ambient.name, spec.right.name)
    for c in spec.right_images:
        if not d_engine.contains(c):
            raise ContainmentError(f"edge generator {c} is not in D")
    if all(spec.right_engine.contains(d) for d in d_engine.generators):
        logger.info("artificial split of %s over D = C is the input", spec.name)
        return replace(spec, name=name or f"{spec.name}[D=C]", source=spec)

    factor, embed_d, project_d = _factor_of(spec.right, d_engine)
    d_copy = renamed(factor, lambda n: n + "'")
    inner = SplittingSpec(
        name=f"{spec.left.name}*{d_copy.name}",
        kind=AMALGAM,
        left=spec.left,
        right=d_copy,
        left_images=spec.left_images,
        right_images=tuple(GroupElement(d_copy, project_d(c).form) for c in spec.right_images),
    )
    L = inner.group
    outer = SplittingSpec(
        name=name or f"({inner.name})*{spec.right.name}",
        kind=AMALGAM,
        left=L,
        right=spec.right,
        left_images=tuple(L.embed(RIGHT, x) for x in d_copy.generators()),
        right_images=tuple(embed_d(x) for x in factor.generators()),
        source=spec,
        hypotheses=spec.hypotheses,
    )
    if outer.is_trivial():
        logger.warning("artificial split of %s over D = B has a trivial edge", spec.name)
    return outer


def delta_witness(spec: SplittingSpec, r: int, R: int, budget: Optional[int] = None) -> Dict[str, Any]:
    """
    The product set {1, t, t^2, ...} * C as a grid window.

    With a central stable letter the set spans a product of a ray and a Cayley
    graph of C inside one halfspace; its window is probed for ends.
    """
    if spec.kind != HNN:
        raise ValueError("the product-set witness needs an HNN extension")
    A = spec.left
    sym_c = _symmetric(A, list(spec.left_images))

    def neighbors(key):
        i, c = key
        out = [(i + 1, c)]
        if i > 0:
            out.append((i - 1, c))
        out.extend((i, A.multiply(c, x)) for x in sym_c)
        return out

    oracle = NeighborOracle(neighbors=neighbors, label=lambda key: f"{spec.stable_letter}^{key[0]}*{A.format(key[1])}")
    ball = grow_ball(oracle, (0, A.identity()), R, budget)
    report = probe_window(ball, r)
    return {
        "elements": len(ball),
        "max_power": max(i for i, _ in ball.keys),
        "edge_group_elements": len({c for _, c in ball.keys}),
        "probe": report_json(report),
    }


def syntactic_checks(spec: SplittingSpec, r: Optional[int] = None, R: Optional[int] = None,
                     budget: Optional[int] = None) -> Dict[str, Any]:
    """
    Recognise the commuting-stable-letter and double patterns and report cited conclusions.

    Conclusions are quoted claims, never computed facts: each carries a citation
    tag and states which hypotheses were probed and which were declared.
    """
    settings = get_settings()
    r = settings.inner_radius if r is None else r
    R = settings.probe_radius if R is None else R
    central = matches_central(spec)
    double = matches_double(spec)
    report: Dict[str, Any] = {
        "splitting": spec.name,
        "kind": spec.kind,
        "patterns": {"central_stable_letter": central, "double": double},
        "finitely_presented": all(X.has_finite_presentation() for X in spec.vertex_groups()),
        "conclusions": [],
    }

    supported, reason = spec.engines_supported()
    if supported and spec.kind != TRIVIAL:
        probe = end_probe(ball_oracle(spec.group, spec.group.cayley_generators()), spec.group.identity(), r, R, budget)
        report["group_probe"] = report_json(probe)
        probed_one_ended = probe.unbounded_count == 1 and probe.stable
    else:
        report["group_probe"] = {"available": False, "reason": reason}
        probed_one_ended = False
    if probed_one_ended:
        report["one_ended_basis"] = "probe"
    elif "one_ended" in spec.hypotheses:
        report["one_ended_basis"] = "declared"
    else:
        report["one_ended_basis"] = None

    if spec.kind != TRIVIAL and spec.left_images:
        edge_probe = end_probe(ball_oracle(spec.left, spec.left_images), spec.left.identity(), r, R, budget)
        report["edge_group_probe"] = report_json(edge_probe)
        # the count of a free or multi-ended edge group keeps growing, so ask for
        # two or more pieces at both radii instead of equal counts
        edge_multi_ended = edge_probe.unbounded_count >= 2 and (edge_probe.previous_count or 0) >= 2
        report["edge_group_multi_ended"] = edge_multi_ended
    else:
        edge_multi_ended = False
    report["vertex_group_probe"] = vertex_group_profile(spec, r, R, budget)

    if central:
        report["delta_witness"] = delta_witness(spec, r, R, budget)

    lines = []
    lines.append(f"central stable letter pattern: {'matched' if central else 'not matched'}")
    lines.append(f"double pattern: {'matched' if double else 'not matched'}")
    one_ended = report["one_ended_basis"] is not None
    if central or double:
        citation = CITE_CENTRAL if central else CITE_DOUBLE
        if one_ended:
            report["conclusions"].append({"claim": "halfspaces are one-ended", "citation": citation})
            if edge_multi_ended and report["finitely_presented"]:
                report["conclusions"].append({"claim": "H^2(G,ZG) != 0", "citation": CITE_ACYCLIC})
        else:
            lines.append("one-endedness of G neither probed nor declared; no conclusion")
    else:
        lines.append("matches neither pattern")
    if report["vertex_group_probe"]["all_one_ended"] and one_ended:
        report["conclusions"].append({"claim": "halfspaces are one-ended", "citation": CITE_VERTEX})
    for item in report["conclusions"]:
        lines.append(f"conclusion ({item['citation']}): {item['claim']}")
    report["summary"] = lines
    return report
