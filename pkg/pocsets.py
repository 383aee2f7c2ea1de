"""
Pocsets, their ultrafilters and the 1-skeleton of the cubing.

Elements are indexed 0..n-1. The order is stored as bitmasks: up[i] holds every
j with i <= j (i included). Ultrafilters are bitmasks too, and vertices of a
skeleton are sorted by their characteristic bit vector.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
from mcp.server.fastmcp.utilities.logging import get_logger

from config import get_settings
from exceptions import BudgetError, DisconnectedInputError, PocsetAxiomError, SizeRefusalError

logger = get_logger(__name__)

WIDTH_LIMIT = 24


def _bits(mask: int) -> Iterable[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


@dataclass(frozen=True)
class Pocset:
    labels: Tuple[str, ...]
    star: Tuple[int, ...]
    up: Tuple[int, ...]
    window: bool = False

    def __post_init__(self):
        n = len(self.labels)
        if len(self.star) != n or len(self.up) != n:
            raise ValueError("labels, involution and order must have the same length")
        for i, j in enumerate(self.star):
            if j == i:
                raise PocsetAxiomError("involution has a fixed point", (self.labels[i],))
            if self.star[j] != i:
                raise PocsetAxiomError("involution is not an involution", (self.labels[i], self.labels[j]))
        for i in range(n):
            if not self.up[i] >> i & 1:
                raise PocsetAxiomError("order is not reflexive", (self.labels[i],))
            j = self.star[i]
            if self.le(i, j) or self.le(j, i):
                raise PocsetAxiomError("an element is comparable to its star", (self.labels[i], self.labels[j]))
        for i in range(n):
            for j in _bits(self.up[i]):
                if not self.le(self.star[j], self.star[i]):
                    raise PocsetAxiomError("involution is not order-reversing", (self.labels[i], self.labels[j]))

    @classmethod
    def from_pairs(cls, labels: Sequence[str], star: Sequence[int], order: Iterable[Tuple[int, int]],
                   window: bool = False) -> "Pocset":
        """Build from strict pairs (i, j) meaning i < j."""
        up = [1 << i for i in range(len(labels))]
        for i, j in order:
            up[i] |= 1 << j
        return cls(tuple(labels), tuple(star), tuple(up), window)

    def __len__(self) -> int:
        return len(self.labels)

    def le(self, i: int, j: int) -> bool:
        return bool(self.up[i] >> j & 1)

    def lt(self, i: int, j: int) -> bool:
        return i != j and self.le(i, j)

    def order_pairs(self) -> List[Tuple[int, int]]:
        return [(i, j) for i in range(len(self)) for j in _bits(self.up[i]) if j != i]

    def pairs(self) -> List[Tuple[int, int]]:
        """One (element, star) per involution pair, smaller index first."""
        return [(i, j) for i, j in enumerate(self.star) if i < j]

    def nested(self, i: int, j: int) -> bool:
        a, b = self.star[i], self.star[j]
        return self.le(i, j) or self.le(i, b) or self.le(a, j) or self.le(a, b)

    def transverse(self, i: int, j: int) -> bool:
        if j in (i, self.star[i]):
            return False
        return not self.nested(i, j)

    def transverse_pairs(self) -> List[Tuple[int, int]]:
        reps = [i for i, _ in self.pairs()]
        return [(i, j) for k, i in enumerate(reps) for j in reps[k + 1:] if self.transverse(i, j)]

    def check_partial_order(self) -> None:
        """Antisymmetry and transitivity over the whole element set."""
        n = len(self)
        for i in range(n):
            for j in _bits(self.up[i]):
                if j != i and self.le(j, i):
                    raise PocsetAxiomError("order is not antisymmetric", (self.labels[i], self.labels[j]))
                if self.up[j] & ~self.up[i]:
                    k = next(_bits(self.up[j] & ~self.up[i]))
                    raise PocsetAxiomError("order is not transitive", (self.labels[i], self.labels[j], self.labels[k]))

    def is_ultrafilter(self, mask: int) -> bool:
        for i, j in self.pairs():
            if (mask >> i & 1) == (mask >> j & 1):
                return False
        return all(self.up[i] & ~mask == 0 for i in _bits(mask))


@dataclass(frozen=True)
class Ultrafilter:
    chosen: FrozenSet[int]

    @property
    def mask(self) -> int:
        return sum(1 << i for i in self.chosen)

    def bit_key(self, n: int) -> Tuple[int, ...]:
        return tuple(1 if i in self.chosen else 0 for i in range(n))


def _transverse_graph(pocset: Pocset) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(i for i, _ in pocset.pairs())
    g.add_edges_from(pocset.transverse_pairs())
    return g


def _clique_number(pocset: Pocset) -> int:
    if not len(pocset):
        return 0
    return max(len(c) for c in nx.find_cliques(_transverse_graph(pocset)))


def width(pocset: Pocset) -> int:
    """
    Maximum number of pairwise transverse elements.

    Raises:
        SizeRefusalError: For pocsets with more than WIDTH_LIMIT elements
    """
    if len(pocset) > WIDTH_LIMIT:
        raise SizeRefusalError("exact width", len(pocset), WIDTH_LIMIT)
    return _clique_number(pocset)


@dataclass(frozen=True)
class CubeComplexSkeleton:
    pocset: Pocset
    vertices: Tuple[Ultrafilter, ...]
    edges: Tuple[Tuple[int, int, int], ...]
    dimension: int
    window: bool = False

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self.vertices)))
        for u, v, element in self.edges:
            g.add_edge(u, v, element=element)
        return g

    @cached_property
    def index(self) -> Dict[FrozenSet[int], int]:
        return {v.chosen: i for i, v in enumerate(self.vertices)}

    def vertex_id(self, u: Ultrafilter) -> int:
        return self.index[u.chosen]

    def label(self, v: int) -> str:
        """The minimal elements of the ultrafilter, which determine it."""
        chosen = self.vertices[v].chosen
        mins = [i for i in chosen if not any(j != i and self.pocset.le(j, i) for j in chosen)]
        return "{" + ",".join(sorted(self.pocset.labels[i] for i in mins)) + "}"


def _first_ultrafilter(pocset: Pocset) -> int:
    """Backtracking search for one ultrafilter, propagating up-closures."""
    pairs = pocset.pairs()

    def forced(mask: int, i: int) -> Optional[int]:
        new = mask | pocset.up[i]
        for j in _bits(pocset.up[i]):
            if new >> pocset.star[j] & 1:
                return None
        return new

    def search(k: int, mask: int) -> Optional[int]:
        while k < len(pairs) and (mask >> pairs[k][0] & 1 or mask >> pairs[k][1] & 1):
            k += 1
        if k == len(pairs):
            return mask
        for choice in pairs[k]:
            new = forced(mask, choice)
            if new is not None:
                found = search(k + 1, new)
                if found is not None:
                    return found
        return None

    found = search(0, 0)
    if found is None:
        raise PocsetAxiomError("no consistent complete choice exists")
    return found


def cube(pocset: Pocset, start: Optional[Ultrafilter] = None, budget: Optional[int] = None) -> CubeComplexSkeleton:
    """
    1-skeleton of the cubing: all ultrafilters, joined when they differ in one pair.

    Ultrafilters are reached from a first one by flipping minimal elements, which
    walks the whole (connected) skeleton of a finite pocset.

    Raises:
        BudgetError: If more than budget ultrafilters are found
    """
    if budget is None:
        budget = get_settings().budget
    n = len(pocset)
    first = start.mask if start is not None else _first_ultrafilter(pocset)
    if not pocset.is_ultrafilter(first):
        raise PocsetAxiomError("start is not an ultrafilter")
    seen = {first: 0}
    order = [first]
    raw_edges = []
    for mask in order:
        for i in _bits(mask):
            flipped = (mask & ~(1 << i)) | (1 << pocset.star[i])
            if not all(pocset.up[j] & ~flipped == 0 for j in _bits(flipped)):
                continue
            if flipped not in seen:
                seen[flipped] = len(order)
                order.append(flipped)
                if len(order) > budget:
                    logger.warning("cubing hit the ultrafilter budget")
                    raise BudgetError("ultrafilters", budget)
            a, b = seen[mask], seen[flipped]
            if a < b:
                raw_edges.append((a, b, i))

    def key(mask: int) -> Tuple[int, ...]:
        return tuple(mask >> i & 1 for i in range(n))

    ranked = sorted(range(len(order)), key=lambda k: key(order[k]))
    renum = {old: new for new, old in enumerate(ranked)}
    vertices = tuple(Ultrafilter(frozenset(_bits(order[k]))) for k in ranked)
    edges = []
    for a, b, i in raw_edges:
        u, v = renum[a], renum[b]
        # element recorded is the one chosen at the first endpoint
        edges.append((u, v, i) if u < v else (v, u, pocset.star[i]))
    edges.sort()
    dimension = _clique_number(pocset)
    logger.info("cubing: %d elements, %d vertices, %d edges, dimension %d", n, len(vertices), len(edges), dimension)
    return CubeComplexSkeleton(pocset, vertices, tuple(edges), dimension, pocset.window)


def is_tree_check(skeleton: CubeComplexSkeleton) -> bool:
    """True iff the skeleton is acyclic (it is connected by construction)."""
    g = skeleton.graph
    if not len(g):
        return False
    if not nx.is_connected(g):
        raise DisconnectedInputError("cube skeleton is not connected")
    return nx.is_tree(g)


def inclusion_pocset(labels: Sequence[str], sets: Sequence[FrozenSet[Hashable]], window: bool = False) -> Pocset:
    """Pocset of sets closed under complement, ordered by inclusion; sets[2k+1] is the complement of sets[2k]."""
    n = len(sets)
    star = [i + 1 if i % 2 == 0 else i - 1 for i in range(n)]
    order = [(i, j) for i in range(n) for j in range(n) if i != j and sets[i] <= sets[j]]
    return Pocset.from_pairs(labels, star, order, window)


def wallspace_pocset(points: Sequence[Hashable], walls: Sequence[Iterable[Hashable]],
                     window: bool = False) -> Tuple[Pocset, Dict[Hashable, Ultrafilter]]:
    """
    Halfspaces of a wallspace and the map sending a point to the halfspaces holding it.

    Args:
        points: The finite point set
        walls: One side of each wall; complements are added and repeats dropped

    Returns:
        The pocset and lambda: point -> Ultrafilter
    """
    universe = frozenset(points)
    seen = set()
    labels: List[str] = []
    sets: List[FrozenSet[Hashable]] = []
    for k, wall in enumerate(walls):
        side = frozenset(wall)
        if not side or side == universe or not side <= universe:
            raise ValueError(f"wall {k} must be a nonempty proper subset of the points")
        if side in seen or universe - side in seen:
            continue
        seen.add(side)
        labels.extend([f"W{k}", f"W{k}*"])
        sets.extend([side, universe - side])
    pocset = inclusion_pocset(labels, sets, window)
    lam = {p: Ultrafilter(frozenset(i for i, s in enumerate(sets) if p in s)) for p in points}
    return pocset, lam


def tree_halfspace_pocset(tree: nx.Graph) -> Pocset:
    """
    Halfspaces of a finite tree; element u>v is the side of edge uv holding v.

    Raises:
        DisconnectedInputError: If the input is not a tree
    """
    if not len(tree) or not nx.is_tree(tree):
        raise DisconnectedInputError("halfspace pocsets need a finite tree")
    labels, sets = [], []
    for u, v in sorted(tuple(sorted(e, key=str)) for e in tree.edges):
        cut = tree.copy()
        cut.remove_edge(u, v)
        near_v = frozenset(nx.node_connected_component(cut, v))
        labels.extend([f"{u}>{v}", f"{v}>{u}"])
        sets.extend([near_v, frozenset(tree.nodes) - near_v])
    return inclusion_pocset(labels, sets)


def geodesic_cover(skeleton: CubeComplexSkeleton, anchors: Iterable[int]) -> bool:
    """Whether every vertex lies on a geodesic between two anchor vertices."""
    g = skeleton.graph
    anchors = sorted(set(anchors))
    dist = {a: nx.single_source_shortest_path_length(g, a) for a in anchors}
    for v in g.nodes:
        if not any(dist[a][v] + dist[b][v] == dist[a][b] for a in anchors for b in anchors):
            return False
    return True


def pocset_to_json(pocset: Pocset) -> Dict[str, Any]:
    return {
        "elements": list(pocset.labels),
        "order": [[i, j] for i, j in pocset.order_pairs()],
        "involution": [[i, j] for i, j in pocset.pairs()],
        "window": pocset.window,
    }


def pocset_from_json(data: Dict[str, Any]) -> Pocset:
    """
    Read a pocset triple; order pairs may be given as indices or labels.

    The order is closed under the involution and transitively before validation.
    """
    labels = [str(x) for x in data["elements"]]
    index = {label: i for i, label in enumerate(labels)}

    def idx(x) -> int:
        return x if isinstance(x, int) else index[str(x)]

    star = [-1] * len(labels)
    for a, b in data["involution"]:
        star[idx(a)], star[idx(b)] = idx(b), idx(a)
    if -1 in star:
        raise ValueError(f"element {labels[star.index(-1)]} has no partner")
    g = nx.DiGraph()
    g.add_nodes_from(range(len(labels)))
    for a, b in data.get("order", []):
        i, j = idx(a), idx(b)
        g.add_edge(i, j)
        g.add_edge(star[j], star[i])
    closure = nx.transitive_closure(g, reflexive=None)
    pocset = Pocset.from_pairs(labels, star, closure.edges, bool(data.get("window", False)))
    pocset.check_partial_order()
    return pocset
