"""
Halfspace cuts and the chopping of a splitting along them.

A multi-ended halfspace window is cut by a minimal cut. The edge-group
translates of the cut boundary give a nested pocset P0 whose cubing is the tree
T0; the fibers of the map sending a point to its principal ultrafilter are the
classes of the halfspace. Tree edges together with the deep classes give the
pocset P, whose cubing is the refined tree T'. Every claim is checked inside
finite windows only.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, FrozenSet, Hashable, List, Optional, Sequence, Tuple

import networkx as nx
from mcp.server.fastmcp.utilities.logging import get_logger

from config import get_settings
from exceptions import CapabilityError, DisconnectedInputError, PocsetAxiomError, WindowInstabilityError
from graphs import BallGraph, Cut, EndReport, grow_ball, make_cut, min_vertex_set_cut, normalize_edge, probe_window, shortlex_key
from groups import ball_oracle
from pocsets import CubeComplexSkeleton, Pocset, Ultrafilter, cube, inclusion_pocset, is_tree_check
from splittings import (
    AMALGAM,
    CITE_TWO_ENDED,
    LEFT,
    RIGHT,
    SIDE_NAMES,
    TRIVIAL,
    HalfspaceBall,
    SplitGroup,
    SplittingSpec,
    TreeEdge,
    cayley_window,
    halfspace_window,
)

logger = get_logger(__name__)

PLAIN, CLASS, COCLASS = "plain", "class", "coclass"

CLASS_SAMPLE = 64


# halfspace cuts

@dataclass(frozen=True)
class HalfspaceCut:
    """A minimal cut of a halfspace window and the anomalies seen on it."""
    halfspace: HalfspaceBall
    cut: Cut
    report: EndReport
    anomalies: Tuple[str, ...] = ()
    alternatives: Tuple[Cut, ...] = field(default=(), compare=False, repr=False)

    @property
    def wall_weight(self) -> int:
        return self.cut.wall_weight

    def oriented_boundary(self) -> List[Tuple[int, int]]:
        """Boundary edges as (inside, outside) window ids."""
        side = self.cut.side
        return [(u, v) if u in side else (v, u) for u, v, _ in self.cut.boundary]

    def with_cut(self, cut: Cut) -> "HalfspaceCut":
        return replace(self, cut=cut, anomalies=_cut_anomalies(self.halfspace, cut))


def _name(hs: HalfspaceBall) -> str:
    return f"{hs.spec.name}/{hs.side_name}" if hs.spec is not None else "window"


def _cut_anomalies(hs: HalfspaceBall, cut: Cut) -> Tuple[str, ...]:
    frontier = hs.window.frontier
    wall = hs.wall_ids
    out = []
    if cut.wall_weight == 0:
        out.append("boundary holds no wall edge")
    if not (wall & cut.side & frontier) or not ((wall - cut.side) & frontier):
        out.append("wall does not reach the frontier on both sides of the cut")
    return tuple(out)


def _acceptable(window: BallGraph, cut: Cut) -> bool:
    frontier = window.frontier
    return cut.connected and bool(cut.side & frontier) and bool(frontier - cut.side)


def find_halfspace_cut(hs: HalfspaceBall, r: Optional[int] = None, multiedge: Optional[int] = None) -> Optional[HalfspaceCut]:
    """
    Minimal cut separating two unbounded pieces of a halfspace window.

    Every pair of frontier pieces is separated by a max-flow cut; among the cuts
    with both sides connected and unbounded, the least boundary wins, then the
    least wall weight, then the shortlex-least side.

    Args:
        hs: The halfspace window
        r: Inner probe radius (defaults to inner_radius)
        multiedge: When given, wall edges count with this multiplicity while cuts are compared

    Returns:
        The chosen cut, or None when the window probes one-ended

    Raises:
        WindowInstabilityError: If no candidate cut has both sides connected and unbounded
    """
    if r is None:
        r = get_settings().inner_radius
    report = probe_window(hs.window, r)
    if report.unbounded_count < 2:
        logger.info("halfspace %s probes %s; nothing to cut", _name(hs), report.summary())
        return None
    window = hs.window
    work = window if multiedge is None else multiedge_modify(window, multiedge)
    frontier = window.frontier
    pieces = [comp & frontier for comp in report.components]

    found: Dict[FrozenSet[int], Tuple[Any, Cut]] = {}
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            try:
                measured = min_vertex_set_cut(work, pieces[i], pieces[j])
            except DisconnectedInputError:
                continue
            cut = measured if multiedge is None else make_cut(window, measured.side)
            if cut.side in found or not _acceptable(window, cut):
                continue
            key = (measured.boundary_size, measured.wall_weight,
                   [shortlex_key(s) for s in window.side_labels(cut.side)])
            found[cut.side] = (key, cut)
    if not found:
        raise WindowInstabilityError(
            f"no cut of {_name(hs)} has both sides connected and unbounded at radius {window.radius}"
        )
    ranked = [cut for _, cut in sorted(found.values(), key=lambda item: item[0])]
    best = ranked[0]
    anomalies = _cut_anomalies(hs, best)
    for note in anomalies:
        logger.warning("cut of %s: %s; the window may be too small", _name(hs), note)
    logger.info("cut of %s: |boundary| %d, wall weight %d, %d candidates",
                _name(hs), best.boundary_size, best.wall_weight, len(ranked))
    return HalfspaceCut(hs, best, report, anomalies, tuple(ranked[1:]))


def multiedge_modify(window: BallGraph, n: int, cuts: Sequence[Cut] = ()) -> BallGraph:
    """
    Replace every wall edge of the window by n parallel edges.

    Each cut passed in is measured again on the new window; its boundary must
    grow by exactly (n - 1) times its wall weight.

    Raises:
        ValueError: If n < 1
    """
    modified = window.with_wall_multiplicity(n)
    for cut in cuts:
        again = make_cut(modified, cut.side)
        expected = cut.boundary_size + (n - 1) * cut.wall_weight
        if again.boundary_size != expected or again.wall_weight != n * cut.wall_weight:
            raise AssertionError(
                f"multi-edge bookkeeping broke: boundary {again.boundary_size}, expected {expected}"
            )
    return modified


# the translate pocset P0 and the tree T0

@dataclass(frozen=True)
class WallAction:
    """Finitely many wall-group elements acting on window keys; elements[0] is the identity."""
    elements: Tuple[Hashable, ...]
    act: Callable[[Hashable, Hashable], Hashable]
    inverse: Callable[[Hashable], Hashable]
    label: Callable[[Hashable], str] = str
    generators: Tuple[Hashable, ...] = ()

    @classmethod
    def trivial(cls) -> "WallAction":
        return cls((None,), lambda k, z: z, lambda k: k, lambda k: "1")


def wall_action(spec: SplittingSpec, length: Optional[int] = None, budget: Optional[int] = None) -> WallAction:
    """Edge-group elements of word length at most length, acting by left multiplication."""
    if length is None:
        length = get_settings().translate_length
    if length < 0:
        raise ValueError("translate length must be non-negative")
    G = spec.group
    gens = [s for s in G.edge_generators() if not s.is_identity()]
    ball = grow_ball(ball_oracle(G, gens), G.identity(), length, budget)
    return WallAction(tuple(ball.keys), G.multiply, G.inverse, G.format, tuple(gens))


@dataclass(frozen=True)
class Translate:
    element: Hashable
    label: str
    edges: Tuple[Tuple[int, int], ...]
    side: FrozenSet[int]


@dataclass(frozen=True)
class ClassMap:
    """Classes of a halfspace window: points no listed translate separates."""
    window: BallGraph
    translates: Tuple[str, ...]
    class_of: Tuple[int, ...]
    deep: FrozenSet[int]
    representatives: Dict[int, int] = field(compare=False)

    @property
    def classes(self) -> List[int]:
        return sorted(self.representatives)

    def lookup(self, key: Hashable) -> Optional[int]:
        v = self.window.index.get(key)
        return None if v is None else self.class_of[v]

    def members(self, cls: int) -> List[int]:
        return [v for v, c in enumerate(self.class_of) if c == cls]


@dataclass(frozen=True)
class ChopBase:
    cut: HalfspaceCut
    action: WallAction
    translates: Tuple[Translate, ...]
    pocset: Pocset
    tree: CubeComplexSkeleton
    class_map: ClassMap
    witness: Optional[Tuple[str, str]]
    orbit_count: int
    edge_stabilizers: Dict[str, Tuple[str, ...]] = field(compare=False)
    stable: Optional[bool] = None


def _translate_side(window: BallGraph, image: List[Tuple[int, int]], k: Hashable,
                    action: WallAction, base_side: FrozenSet[int]) -> Optional[FrozenSet[int]]:
    inside = {a for a, _ in image}
    outside = {b for _, b in image}
    view = nx.restricted_view(window.graph, [], image)
    k_inv = action.inverse(k)
    side = set()
    for comp in nx.connected_components(view):
        has_in, has_out = bool(comp & inside), bool(comp & outside)
        if has_in and has_out:
            return None
        if has_in:
            side |= comp
        elif not has_out:
            # a piece cut off from both ends follows its preimage
            votes = [window.index.get(action.act(k_inv, window.keys[p])) for p in comp]
            hits = [p in base_side for p in votes if p is not None]
            if hits and 2 * sum(hits) > len(hits):
                side |= comp
    return frozenset(side)


def _translates(window: BallGraph, boundary: List[Tuple[int, int]], side: FrozenSet[int],
                action: WallAction) -> List[Translate]:
    keys, index = window.keys, window.index
    out: List[Translate] = []
    seen_edges, seen_sides = set(), set()
    everything = frozenset(range(len(window)))
    for k in action.elements:
        image = []
        for u, v in boundary:
            a, b = index.get(action.act(k, keys[u])), index.get(action.act(k, keys[v]))
            if a is None or b is None:
                break
            image.append((a, b))
        else:
            key = frozenset(normalize_edge(a, b) for a, b in image)
            if key in seen_edges:
                continue
            seen_edges.add(key)
            k_side = _translate_side(window, image, k, action, side)
            if k_side is None or not k_side or k_side == everything:
                continue
            if k_side in seen_sides or everything - k_side in seen_sides:
                continue
            seen_sides.add(k_side)
            out.append(Translate(k, action.label(k), tuple(sorted(image)), k_side))
    return out


def _class_map(window: BallGraph, wall: FrozenSet[int], translates: Sequence[Translate],
               tree: CubeComplexSkeleton) -> ClassMap:
    class_of = []
    for v in range(len(window)):
        chosen = frozenset(2 * t if v in tr.side else 2 * t + 1 for t, tr in enumerate(translates))
        vertex = tree.index.get(chosen)
        if vertex is None:
            raise PocsetAxiomError("a window point has no vertex in T0", (window.labels[v],))
        class_of.append(vertex)
    near = set(wall)
    for w in wall:
        near.update(window.neighbors(w))
    deep = frozenset(class_of[v] for v in window.frontier if v not in near)
    representatives: Dict[int, int] = {}
    for v, c in enumerate(class_of):
        best = representatives.get(c)
        if best is None or (window.depth[v], shortlex_key(window.labels[v])) < (
                window.depth[best], shortlex_key(window.labels[best])):
            representatives[c] = v
    return ClassMap(window, tuple(t.label for t in translates), tuple(class_of), deep, representatives)


def _translate_pocset(translates: Sequence[Translate], size: int) -> Pocset:
    everything = frozenset(range(size))
    labels, sets = [], []
    for t in translates:
        labels.extend([f"{t.label}.C", f"{t.label}.C*"])
        sets.extend([t.side, everything - t.side])
    pocset = inclusion_pocset(labels, sets, window=True)
    crossing = pocset.transverse_pairs()
    if crossing:
        i, j = crossing[0]
        raise PocsetAxiomError("translates of the cut cross inside the window", (labels[i], labels[j]))
    return pocset


def _partition(window: BallGraph, translates: Sequence[Translate], radius: int) -> Dict[Hashable, Tuple[bool, ...]]:
    return {
        window.keys[v]: tuple(v in t.side for t in translates)
        for v in range(len(window)) if window.depth[v] <= radius
    }


def _same_partition(a: Dict[Hashable, Hashable], b: Dict[Hashable, Hashable]) -> bool:
    forward, backward = {}, {}
    for key, x in a.items():
        y = b.get(key)
        if forward.setdefault(x, y) != y or backward.setdefault(y, x) != x:
            return False
    return True


def build_p0_t0(hc: HalfspaceCut, action: Optional[WallAction] = None, budget: Optional[int] = None) -> ChopBase:
    """
    Translates of the cut, their pocset P0, its cubing T0 and the class map.

    Args:
        hc: The halfspace cut
        action: Wall-group elements to translate by (defaults to wall_action of the splitting)
        budget: Vertex budget for the cubing

    Returns:
        The ChopBase; witness is (g, D) with g.D strictly inside D when one is seen

    Raises:
        PocsetAxiomError: If two translates cross in the window or T0 is not a tree
    """
    hs = hc.halfspace
    if action is None:
        if hs.spec is None:
            raise ValueError("graph windows need an explicit wall action")
        action = wall_action(hs.spec, budget=budget)
    window = hs.window
    boundary = hc.oriented_boundary()
    translates = _translates(window, boundary, hc.cut.side, action)
    pocset = _translate_pocset(translates, len(window))
    tree = cube(pocset, budget=budget)
    if not is_tree_check(tree):
        raise PocsetAxiomError("cubing of the translates is not a tree")
    class_map = _class_map(window, hs.wall_ids, translates, tree)

    keys, index = window.keys, window.index
    by_edges = {t.edges: n for n, t in enumerate(translates)}

    def image(n: int, k: Hashable) -> Optional[int]:
        moved = []
        for a, b in translates[n].edges:
            x, y = index.get(action.act(k, keys[a])), index.get(action.act(k, keys[b]))
            if x is None or y is None:
                return None
            moved.append((x, y))
        return by_edges.get(tuple(sorted(moved)))

    witness = None
    orbits = nx.Graph()
    orbits.add_nodes_from(range(len(translates)))
    stabilizers: Dict[str, Tuple[str, ...]] = {}
    for n, t in enumerate(translates):
        fixing = []
        for k in action.elements:
            m = image(n, k)
            if m is None:
                continue
            orbits.add_edge(n, m)
            if m == n and k != action.elements[0]:
                fixing.append(action.label(k))
            if witness is None and m != n and translates[m].side < t.side:
                witness = (action.label(k), f"{t.label}.C")
        stabilizers[f"{t.label}.C"] = tuple(fixing)
    orbit_count = nx.number_connected_components(orbits) if translates else 0

    stable = None
    if window.radius >= 2:
        inner = window.truncate(window.radius - 1)
        old_to_new = {key: i for i, key in enumerate(inner.keys)}
        inner_side = frozenset(old_to_new[window.keys[v]] for v in hc.cut.side if window.keys[v] in old_to_new)
        inner_cut = make_cut(inner, inner_side)
        inner_boundary = [(u, v) if u in inner_side else (v, u) for u, v, _ in inner_cut.boundary]
        inner_translates = _translates(inner, inner_boundary, inner_side, action)
        core = window.radius - 2
        stable = _same_partition(_partition(window, translates, core), _partition(inner, inner_translates, core))
        if not stable:
            logger.warning("class map of %s changes between radii %d and %d", _name(hs), window.radius - 1, window.radius)

    logger.info("P0 of %s: %d translates, T0 with %d vertices, %d classes (%d deep)",
                _name(hs), len(translates), len(tree.vertices), len(class_map.representatives), len(class_map.deep))
    return ChopBase(hc, action, tuple(translates), pocset, tree, class_map, witness, orbit_count, stabilizers, stable)


# the pocset P

@dataclass(frozen=True)
class PElement:
    kind: str
    edge: int
    side: int
    cls: Optional[int] = None


@dataclass(frozen=True)
class TreeWindowData:
    """
    Nesting data of finitely many tree edges.

    toward[(i, j)] is the side of edge i holding edge j, in edge i's own
    orientation. Orbit edges carry the translated halfspace on h_side, and
    anchor[(i, j)] is the class of that halfspace holding the far side of edge j
    whenever edge j lies inside it.
    """
    labels: Tuple[str, ...]
    orbit: Tuple[bool, ...]
    toward: Dict[Tuple[int, int], int] = field(compare=False)
    h_side: int = LEFT
    anchor: Dict[Tuple[int, int], Optional[int]] = field(default_factory=dict, compare=False)
    edges: Tuple[Hashable, ...] = ()
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.labels)
        if len(self.orbit) != n:
            raise ValueError("every edge needs an orbit flag")
        for i in range(n):
            for j in range(n):
                if i != j and self.toward.get((i, j)) not in (LEFT, RIGHT):
                    raise ValueError(f"missing side of {self.labels[i]} toward {self.labels[j]}")

    def holds(self, i: int, j: int) -> bool:
        """Whether the translated halfspace of orbit edge i contains edge j."""
        return self.orbit[i] and self.toward[(i, j)] == self.h_side


@dataclass(frozen=True)
class PWindow:
    data: TreeWindowData
    classes: Tuple[int, ...]
    elements: Tuple[PElement, ...]
    pocset: Pocset
    anomalies: Tuple[str, ...] = ()

    def find(self, kind: str, edge: int, cls: Optional[int] = None, side: Optional[int] = None) -> int:
        for k, e in enumerate(self.elements):
            if e.kind == kind and e.edge == edge and e.cls == cls and (side is None or e.side == side):
                return k
        raise KeyError((kind, edge, cls, side))


def _pair_masks(data: TreeWindowData, classes: Sequence[int], elements: Sequence[PElement],
                i: int, j: int, members: Dict[int, List[int]]) -> Dict[int, int]:
    """Atom masks of the elements on edges i and j, restricted to the region of these two edges."""
    atoms: Dict[Tuple, int] = {}

    def add(name: Tuple) -> int:
        atoms[name] = len(atoms)
        return 1 << atoms[name]

    core = add(("core",))
    far: Dict[int, Dict[Any, int]] = {}
    local: Dict[int, Dict[int, int]] = {}
    for a, b in ((i, j), (j, i)):
        holds = data.holds(a, b)
        anchor = data.anchor.get((a, b)) if holds else None
        if data.orbit[a] and not holds:
            far[a] = {x: add(("far", a, x)) for x in classes}
        else:
            far[a] = {None: add(("far", a))}
        local[a] = {x: add(("near", a, x)) for x in classes if x != anchor} if holds else {}
    full = (1 << len(atoms)) - 1

    out = {}
    for a, b in ((i, j), (j, i)):
        far_a = sum(far[a].values())
        anchor = data.anchor.get((a, b)) if data.holds(a, b) else None
        for k in members[a]:
            e = elements[k]
            if e.kind == PLAIN:
                out[k] = far_a if e.side != data.toward[(a, b)] else full & ~far_a
                continue
            if data.holds(a, b):
                if e.cls == anchor:
                    mask = sum(far[b].values()) | core | sum(local[b].values())
                else:
                    mask = local[a][e.cls]
            else:
                mask = far[a][e.cls]
            out[k] = mask if e.kind == CLASS else full & ~mask
    return out


def _halfspace_le(data: TreeWindowData, i: int, s: int, j: int, t: int) -> bool:
    """Tree halfspace (i, s) inside (j, t) for distinct edges."""
    return s != data.toward[(i, j)] and t == data.toward[(j, i)]


def _check_rows(pocset: Pocset) -> None:
    reps = [i for i, _ in pocset.pairs()]
    for n, a in enumerate(reps):
        for b in reps[n + 1:]:
            sa, sb = pocset.star[a], pocset.star[b]
            rows = [pocset.le(a, b), pocset.le(a, sb), pocset.le(sa, b), pocset.le(sa, sb)]
            if sum(rows) != 1:
                raise PocsetAxiomError(f"{sum(rows)} of the four nesting relations hold",
                                       (pocset.labels[a], pocset.labels[b]))


def order_pocset(data: TreeWindowData, classes: Sequence[int]) -> PWindow:
    """
    The pocset P on a window of tree edges.

    Orbit edges give one pair per class, ([x], h) and ([x]*, h*); other edges give
    their two tree halfspaces. Two elements on different edges are compared
    through the atoms of the two-edge region: strict inclusion of atoms, or equal
    atoms and nested tree halfspaces. On one edge, ([x], h) <= ([y]*, h*) exactly
    when x != y.

    Raises:
        PocsetAxiomError: If the order is not a partial order, has transverse pairs
            or breaks the exactly-one-relation property
    """
    classes = tuple(sorted(set(classes)))
    elements: List[PElement] = []
    labels: List[str] = []
    for i, label in enumerate(data.labels):
        if data.orbit[i]:
            for x in classes:
                elements.extend([PElement(CLASS, i, data.h_side, x), PElement(COCLASS, i, 1 - data.h_side, x)])
                labels.extend([f"([{x}],{label})", f"([{x}]*,{label})"])
        else:
            elements.extend([PElement(PLAIN, i, LEFT), PElement(PLAIN, i, RIGHT)])
            labels.extend([f"{label}:{SIDE_NAMES[LEFT]}", f"{label}:{SIDE_NAMES[RIGHT]}"])
    star = [k + 1 if k % 2 == 0 else k - 1 for k in range(len(elements))]
    members: Dict[int, List[int]] = {i: [] for i in range(len(data.labels))}
    for k, e in enumerate(elements):
        members[e.edge].append(k)

    order = []
    for i, ks in members.items():
        for a in ks:
            for b in ks:
                ea, eb = elements[a], elements[b]
                if ea.kind == CLASS and eb.kind == COCLASS and ea.cls != eb.cls:
                    order.append((a, b))
    n = len(data.labels)
    for i in range(n):
        for j in range(i + 1, n):
            masks = _pair_masks(data, classes, elements, i, j, members)
            for a in members[i]:
                for b in members[j]:
                    for x, y in ((a, b), (b, a)):
                        mx, my = masks[x], masks[y]
                        if mx & ~my:
                            continue
                        ex, ey = elements[x], elements[y]
                        if mx != my or _halfspace_le(data, ex.edge, ex.side, ey.edge, ey.side):
                            order.append((x, y))

    pocset = Pocset.from_pairs(labels, star, order, window=True)
    pocset.check_partial_order()
    crossing = pocset.transverse_pairs()
    if crossing:
        a, b = crossing[0]
        raise PocsetAxiomError("P has transverse elements", (labels[a], labels[b]))
    _check_rows(pocset)
    logger.info("P window: %d edges, %d classes, %d elements", n, len(classes), len(elements))
    return PWindow(data, classes, tuple(elements), pocset, data.notes)


def window_edges(spec: SplittingSpec, radius: int) -> List[TreeEdge]:
    """Tree edges g*e0 for g in the Cayley ball, base edge first."""
    G = spec.group
    base = G.base_edge()
    found = {G.edge_of(g) for g in cayley_window(spec, radius).keys} - {base}
    return [base] + sorted(found, key=lambda e: G.shortlex_key(G.edge_rep(e)))


def tree_window_data(base: ChopBase, radius: int) -> TreeWindowData:
    """Nesting data and class anchors of the tree edges near the base edge."""
    hs = base.cut.halfspace
    if hs.spec is None:
        raise ValueError("tree data needs a splitting")
    spec, G = hs.spec, hs.spec.group
    if hs.edge != G.base_edge():
        raise ValueError("chopping runs on the base edge")
    edges = window_edges(spec, radius)
    reps = [G.edge_rep(e) for e in edges]
    invs = [G.inverse(g) for g in reps]
    labels = tuple(G.format_edge(e) for e in edges)
    toward, anchor, notes = {}, {}, []
    for i in range(len(edges)):
        for j in range(len(edges)):
            if i == j:
                continue
            toward[(i, j)] = G.vertex_side(G.act(invs[i], G.edge_ends(edges[j])[0]))
            if toward[(i, j)] == hs.side:
                cls = base.class_map.lookup(G.multiply(invs[i], reps[j]))
                if cls is None:
                    notes.append(f"{labels[j]} is outside the halfspace window of {labels[i]}")
                elif cls not in base.class_map.deep:
                    notes.append(f"{labels[j]} lands in shallow class {cls} of {labels[i]}")
                anchor[(i, j)] = cls
    return TreeWindowData(labels, tuple(True for _ in edges), toward, hs.side, anchor, tuple(edges), tuple(notes))


def build_p_order(base: ChopBase, tree_radius: Optional[int] = None, strict: bool = False) -> PWindow:
    """
    The pocset P on the tree edges within tree_radius of the base edge.

    Raises:
        WindowInstabilityError: If strict and the class map changed between radii
    """
    if tree_radius is None:
        tree_radius = get_settings().tree_radius
    if tree_radius < 0:
        raise ValueError("tree radius must be non-negative")
    if base.stable is False and strict:
        raise WindowInstabilityError("class map changes between probe radii")
    data = tree_window_data(base, tree_radius)
    pw = order_pocset(data, sorted(base.class_map.deep))
    if base.stable is False:
        pw = replace(pw, anomalies=pw.anomalies + ("class map changes between probe radii",))
    return pw


# the tree T'

@dataclass(frozen=True)
class TPrime:
    skeleton: CubeComplexSkeleton
    tau: Tuple[Tuple[Hashable, str], ...]
    tau_injective: bool
    phi: Tuple[Tuple[int, ...], ...]
    phi_consistent: bool
    phi_vertices: Tuple[Optional[str], ...] = ()
    hyperbolic: Optional[Dict[str, str]] = None


def _phi(pw: PWindow, vertex: Ultrafilter) -> Tuple[int, ...]:
    data = pw.data
    sides = []
    for i in range(len(data.labels)):
        if data.orbit[i]:
            inside = any(k in vertex.chosen for k, e in enumerate(pw.elements) if e.edge == i and e.kind == CLASS)
            sides.append(data.h_side if inside else 1 - data.h_side)
        else:
            sides.append(LEFT if pw.find(PLAIN, i, side=LEFT) in vertex.chosen else RIGHT)
    return tuple(sides)


def _consistent(data: TreeWindowData, sides: Tuple[int, ...]) -> bool:
    """No two chosen tree halfspaces are disjoint."""
    n = len(sides)
    for i in range(n):
        for j in range(i + 1, n):
            if sides[i] != data.toward[(i, j)] and sides[j] != data.toward[(j, i)]:
                return False
    return True


def _locate(base: ChopBase, data: TreeWindowData, sides: Tuple[int, ...]) -> Optional[str]:
    G = base.cut.halfspace.spec.group
    invs = [G.inverse(G.edge_rep(e)) for e in data.edges]
    candidates = []
    for e in data.edges:
        for v in G.edge_ends(e):
            if v not in candidates:
                candidates.append(v)
    for v in candidates:
        if all(G.vertex_side(G.act(invs[i], v)) == s for i, s in enumerate(sides)):
            return G.format_vertex(v)
    return None


def _hyperbolic_witness(pw: PWindow, base: ChopBase) -> Optional[Dict[str, str]]:
    """g in the stabilizer of the near vertex, outside the edge group, moving some ([x], h0) strictly inside itself."""
    hs = base.cut.halfspace
    G = hs.spec.group
    data = pw.data
    position = {e: i for i, e in enumerate(data.edges)}
    reps = [G.edge_rep(e) for e in data.edges]
    if G.amalgam or hs.side == LEFT:
        gens = G.side_generators(hs.side if G.amalgam else 0)
    else:
        t = G.stable()
        gens = [G.multiply(G.multiply(t, x), G.inverse(t)) for x in G.side_generators(0)]
    candidates = [g for s in gens for g in (s, G.inverse(s)) if not G.in_edge_group(g)]
    class_index = {(e.edge, e.cls): k for k, e in enumerate(pw.elements) if e.kind == CLASS}
    cm = base.class_map
    for g in candidates:
        for k in base.action.elements:
            w = G.multiply(g, k)
            j = position.get(G.edge_of(w))
            if j is None or j == 0:
                continue
            inner = G.multiply(G.inverse(reps[j]), w)
            for x in pw.classes:
                z = cm.window.keys[cm.representatives[x]]
                a = class_index.get((0, x))
                b = class_index.get((j, cm.lookup(G.multiply(inner, z))))
                if a is not None and b is not None and pw.pocset.lt(b, a):
                    return {
                        "element": G.format(w),
                        "moves": pw.pocset.labels[a],
                        "onto": pw.pocset.labels[b],
                    }
    return None


def cube_to_t_prime(pw: PWindow, base: Optional[ChopBase] = None, budget: Optional[int] = None) -> TPrime:
    """
    Cube P to the tree T' and compute the maps tau and phi on the window.

    tau sends an edge of T' crossing ([x], g*h0) to (x, g*e0), and one crossing
    a plain halfspace of e to ("single", e). phi sends a vertex to one tree
    halfspace per window edge: the side named by a plain element, h when some
    class element is chosen, h* otherwise.

    Raises:
        PocsetAxiomError: If the cubing is not a tree
    """
    skeleton = cube(pw.pocset, budget=budget)
    if not is_tree_check(skeleton):
        raise PocsetAxiomError("cubing of P is not a tree")
    labels = pw.data.labels
    tau = []
    for _, _, k in skeleton.edges:
        e = pw.elements[k]
        tau.append(("single", labels[e.edge]) if e.kind == PLAIN else (e.cls, labels[e.edge]))
    phi = tuple(_phi(pw, v) for v in skeleton.vertices)
    consistent = all(_consistent(pw.data, sides) for sides in phi)
    located: Tuple[Optional[str], ...] = ()
    hyperbolic = None
    if base is not None and base.cut.halfspace.spec is not None and pw.data.edges:
        located = tuple(_locate(base, pw.data, sides) for sides in phi)
        hyperbolic = _hyperbolic_witness(pw, base)
    if not consistent:
        logger.warning("phi picks disjoint tree halfspaces at some vertex of T'")
    return TPrime(skeleton, tuple(tau), len(set(tau)) == len(tau), phi, consistent, located, hyperbolic)


# rounds

def two_ended_edge_group(spec: SplittingSpec) -> bool:
    """The edge group is infinite cyclic: one non-trivial generator in torsion-free vertex groups."""
    if spec.kind == TRIVIAL:
        return False
    gens = [g for g in spec.left_images if not g.is_identity()]
    return len(gens) == 1 and all(X.is_torsion_free() for X in spec.vertex_groups())


def probe_sides(spec: SplittingSpec, r: int, R: int, budget: Optional[int] = None) -> Dict[str, EndReport]:
    return {
        SIDE_NAMES[side]: probe_window(halfspace_window(spec, side, R, budget=budget).window, r)
        for side in (LEFT, RIGHT)
    }


def _class_sample(cm: ClassMap, x: int) -> List[int]:
    members = cm.members(x)
    members.sort(key=lambda v: (cm.window.depth[v], shortlex_key(cm.window.labels[v])))
    return members[:CLASS_SAMPLE]


def fixes_class(cm: ClassMap, act: Callable[[Hashable, Hashable], Hashable], k: Hashable, x: int,
                sample: Optional[Sequence[int]] = None) -> bool:
    """
    Whether k maps class x into itself inside the window.

    The shallowest members of the class are moved by k; those landing in the
    window must land in x by a strict majority, and at least one must land.
    """
    if sample is None:
        sample = _class_sample(cm, x)
    landed = [cm.lookup(act(k, cm.window.keys[v])) for v in sample]
    inside = [c for c in landed if c is not None]
    return bool(inside) and 2 * sum(1 for c in inside if c == x) > len(inside)


def class_stabilizers(base: ChopBase) -> Dict[int, Tuple[Hashable, ...]]:
    """Window elements of the edge group fixing each deep class."""
    cm, action = base.class_map, base.action
    out = {}
    for x in sorted(cm.deep):
        sample = _class_sample(cm, x)
        out[x] = tuple(k for k in action.elements if fixes_class(cm, action.act, k, x, sample))
    return out


def inner_splitting(spec: SplittingSpec) -> Optional[SplittingSpec]:
    """The amalgam A *_E D' forming the left vertex group when spec is (A *_E D') *_D' B."""
    L = spec.left
    if spec.kind != AMALGAM or not isinstance(L, SplitGroup) or L.spec.kind != AMALGAM:
        return None
    if set(spec.left_images) != {L.embed(RIGHT, d) for d in L.spec.right.generators()}:
        return None
    return L.spec


def collapse_inner(spec: SplittingSpec, inner: SplittingSpec) -> SplittingSpec:
    """A *_E B out of (A *_E D') *_D' B, carrying E across D' into B."""
    source = spec.source
    if source is not None and source.left is inner.left and source.right is spec.right:
        return source
    G, L = spec.group, spec.left
    images = []
    for d in inner.right_images:
        b = G.to_side(G.embed(LEFT, L.embed(RIGHT, d)), RIGHT)
        if b is None:
            raise ValueError(f"{d} does not cross the edge of {spec.name}")
        images.append(b)
    return SplittingSpec(
        name=f"{inner.left.name}*{spec.right.name}",
        kind=AMALGAM,
        left=inner.left,
        right=spec.right,
        left_images=inner.left_images,
        right_images=tuple(images),
        hypotheses=spec.hypotheses,
    )


def _next_splitting(spec: SplittingSpec, base: ChopBase,
                    stabilizers: Dict[int, Tuple[Hashable, ...]]) -> Tuple[Optional[SplittingSpec], str]:
    """
    The splitting the chopped tree T' points to, read off the class stabilizers.

    When the left vertex group is itself an amalgam A *_E D' over the current
    edge group D', a deep class fixed by E and by nothing outside E gives the
    splitting A *_E B. Membership in E is decided by the engine of E inside D'.
    """
    inner = inner_splitting(spec)
    if inner is None:
        return None, "the edge group is not a factor of a split vertex group"
    G, L, cm = spec.group, spec.left, base.class_map
    try:
        engine = inner.right_engine
    except CapabilityError as e:
        return None, f"no engine for the inner edge group: {e}"
    e_gens = [G.embed(LEFT, L.embed(RIGHT, d)) for d in inner.right_images]

    def in_inner_edge(k) -> bool:
        l = G.to_side(k, LEFT)
        d = None if l is None else L.to_side(l, RIGHT)
        return d is not None and engine.contains(d)

    for x, ks in stabilizers.items():
        if not all(in_inner_edge(k) for k in ks):
            continue
        if all(fixes_class(cm, G.multiply, c, x) for c in e_gens):
            following = collapse_inner(spec, inner)
            return following, f"class {x} is stabilized exactly by the edge group of {following.name}"
    return None, "no class stabilizer matches a recognised subgroup"


def round_properties(base: ChopBase, tprime: TPrime) -> Dict[str, bool]:
    """
    Window checks of the four properties a chop round should have.

    (a) T0 is a single vertex, or the edge group acts without a fixed point (some
        translate nests strictly inside another) and every T0 edge stabilizer is
        finite; the groups here are torsion-free, so finite means trivial.
    (b) T0 is not a single vertex.
    (c) tau is injective on the edges of T'.
    (d) some element of the near vertex group acts on T' without a fixed point.
    """
    single = len(base.tree.vertices) == 1
    finite = all(not fixing for fixing in base.edge_stabilizers.values())
    return {
        "a": single or (base.witness is not None and finite),
        "b": not single,
        "c": tprime.tau_injective,
        "d": tprime.hyperbolic is not None,
    }


@dataclass(frozen=True)
class ChopRound:
    index: int
    splitting: str
    side: str
    probes: Dict[str, EndReport] = field(compare=False)
    cut: HalfspaceCut
    base: ChopBase
    order: PWindow
    tree: TPrime
    stabilizers: Dict[int, Tuple[str, ...]] = field(compare=False)
    properties: Dict[str, bool] = field(compare=False)
    next_splitting: Optional[str]
    note: str = ""
    rejected: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ChopReport:
    splitting: str
    inner_radius: int
    probe_radius: int
    rounds: Tuple[ChopRound, ...]
    terminated: bool
    final_splitting: str
    final_probes: Dict[str, EndReport] = field(compare=False)
    notes: Tuple[str, ...] = ()

    def summary(self) -> List[str]:
        lines = list(self.notes)
        for rnd in self.rounds:
            marks = ", ".join(f"({k}) {'pass' if v else 'fail'}" for k, v in rnd.properties.items())
            lines.append(
                f"round {rnd.index}: {rnd.splitting} {rnd.side}: |boundary| {rnd.cut.cut.boundary_size}, "
                f"wall weight {rnd.cut.wall_weight}; T0 {len(rnd.base.tree.vertices)} vertices, "
                f"{len(rnd.base.class_map.deep)} deep classes; T' {len(rnd.tree.skeleton.vertices)} vertices; {marks}"
            )
        for side, report in self.final_probes.items():
            lines.append(f"final {self.final_splitting} {side}: {report.summary()}")
        lines.append("terminated" if self.terminated else "not terminated")
        return lines


def chop_round(spec: SplittingSpec, side: int, index: int, probes: Dict[str, EndReport], r: int, R: int,
               budget: Optional[int] = None, tree_radius: Optional[int] = None,
               translate_length: Optional[int] = None) -> Tuple[ChopRound, Optional[SplittingSpec]]:
    """One probe-cut-chop round on one multi-ended side."""
    hs = halfspace_window(spec, side, R, budget=budget)
    hc = find_halfspace_cut(hs, r)
    if hc is None:
        raise WindowInstabilityError(f"{spec.name}/{SIDE_NAMES[side]} stopped probing multi-ended")
    action = wall_action(spec, translate_length, budget)
    base, rejected = None, []
    for cut in (hc.cut,) + hc.alternatives:
        try:
            base = build_p0_t0(hc.with_cut(cut), action, budget)
            break
        except PocsetAxiomError as e:
            rejected.append(str(e))
            logger.info("candidate cut of %s rejected: %s", spec.name, e)
    if base is None:
        raise WindowInstabilityError(f"no candidate cut of {spec.name} is nested inside the window")
    order = build_p_order(base, tree_radius)
    tprime = cube_to_t_prime(order, base, budget)
    stabilizers = class_stabilizers(base)
    following, note = _next_splitting(spec, base, stabilizers)
    properties = round_properties(base, tprime)
    labelled = {x: tuple(action.label(k) for k in ks) for x, ks in stabilizers.items()}
    logger.info("chop round %d on %s/%s: %s", index, spec.name, SIDE_NAMES[side], note)
    rnd = ChopRound(index, spec.name, SIDE_NAMES[side], probes, base.cut, base, order, tprime, labelled,
                    properties, following.name if following is not None else None, note, tuple(rejected))
    return rnd, following


def iterate_chop(spec: SplittingSpec, max_rounds: int, r: Optional[int] = None, R: Optional[int] = None,
                 budget: Optional[int] = None, tree_radius: Optional[int] = None,
                 translate_length: Optional[int] = None) -> ChopReport:
    """
    Chop until every halfspace window probes one-ended or the rounds run out.

    Splittings over the trivial group are refused with a note, since G is then a
    free product and not one-ended. Splittings over an infinite cyclic edge group
    stop at once with a cited conclusion. After a round, the next one runs on the
    splitting read off the class stabilizers, see _next_splitting.

    Raises:
        ValueError: If max_rounds < 1
        TrivialSplittingError: For trivial splittings
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    settings = get_settings()
    r = settings.inner_radius if r is None else r
    R = settings.probe_radius if R is None else R
    spec.require_nontrivial()

    rounds: List[ChopRound] = []
    notes: List[str] = []
    current = spec

    def finish(terminated: bool, probes: Dict[str, EndReport]) -> ChopReport:
        return ChopReport(spec.name, r, R, tuple(rounds), terminated, current.name, probes, tuple(notes))

    while True:
        if current.edge_rank() == 0:
            notes.append(f"no chop: {current.name} splits over the trivial group, so G is a free product "
                         "and not one-ended; chopping needs a one-ended group")
            return finish(False, {})
        if two_ended_edge_group(current):
            notes.append(f"no chop needed: {current.name} splits over a two-ended group ({CITE_TWO_ENDED})")
            return finish(True, {})
        probes = probe_sides(current, r, R, budget)
        multi = [side for side in (LEFT, RIGHT) if probes[SIDE_NAMES[side]].unbounded_count >= 2]
        if not multi:
            if not rounds:
                notes.append("no chop needed: every halfspace window probes one-ended")
            return finish(True, probes)
        if len(rounds) == max_rounds:
            notes.append(f"round limit {max_rounds} reached with multi-ended halfspaces left")
            return finish(False, probes)
        rnd, following = chop_round(current, multi[0], len(rounds) + 1, probes, r, R, budget,
                                    tree_radius, translate_length)
        rounds.append(rnd)
        if following is None:
            notes.append(f"stopped after round {rnd.index}: {rnd.note}")
            return finish(False, probes)
        current = following
