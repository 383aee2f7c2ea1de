"""
Finite windows onto locally finite graphs.

A window is grown from a neighbor oracle by breadth-first search and stored as a
BallGraph: integer vertex ids in discovery order, canonical labels, an edge multiset
and the BFS depth of every vertex. End probes, minimum cuts and the exhaustive cut
oracle all work on windows.
"""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
from networkx.algorithms.flow import edmonds_karp
from mcp.server.fastmcp.utilities.logging import get_logger

from config import get_settings
from exceptions import BudgetError, DisconnectedInputError, SizeRefusalError

logger = get_logger(__name__)

BRUTEFORCE_LIMIT = 16

Edge = Tuple[int, int]


def shortlex_key(label: str) -> Tuple[int, str]:
    """Sort key used for every canonical tie-break on labels."""
    return (len(label), label)


@dataclass(frozen=True)
class NeighborOracle:
    """A locally finite graph given by a neighbor function and a labelling."""
    neighbors: Callable[[Hashable], Sequence[Hashable]]
    label: Callable[[Hashable], str] = str


@dataclass(frozen=True)
class BallGraph:
    keys: Tuple[Hashable, ...]
    labels: Tuple[str, ...]
    edges: Mapping[Edge, int]
    depth: Tuple[int, ...]
    radius: int
    wall_edges: FrozenSet[Edge] = frozenset()

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("window labels must be pairwise distinct")
        for (u, v), mult in self.edges.items():
            if u == v:
                raise ValueError(f"self-loop at {self.labels[u]}")
            if not (0 <= u < v < len(self.keys)):
                raise ValueError(f"edge {(u, v)} is not normalized")
            if mult < 1:
                raise ValueError("edge multiplicity must be positive")

    @property
    def vertices(self) -> List[int]:
        return list(range(len(self.keys)))

    @cached_property
    def frontier(self) -> FrozenSet[int]:
        return frozenset(v for v, d in enumerate(self.depth) if d == self.radius)

    @cached_property
    def index(self) -> Dict[Hashable, int]:
        return {key: i for i, key in enumerate(self.keys)}

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self.keys)))
        for (u, v), mult in self.edges.items():
            g.add_edge(u, v, capacity=mult)
        return g

    def __len__(self) -> int:
        return len(self.keys)

    def neighbors(self, v: int) -> Iterable[int]:
        return self.graph.neighbors(v)

    def induced(self, ids: Iterable[int], radius: Optional[int] = None) -> "BallGraph":
        """Induced sub-window on ids, renumbered in the original order."""
        keep = sorted(set(ids))
        renum = {old: new for new, old in enumerate(keep)}
        edges = {}
        for (u, v), mult in self.edges.items():
            if u in renum and v in renum:
                edges[(renum[u], renum[v])] = mult
        walls = frozenset(
            (renum[u], renum[v]) for (u, v) in self.wall_edges if u in renum and v in renum
        )
        return BallGraph(
            keys=tuple(self.keys[i] for i in keep),
            labels=tuple(self.labels[i] for i in keep),
            edges=edges,
            depth=tuple(self.depth[i] for i in keep),
            radius=self.radius if radius is None else radius,
            wall_edges=walls,
        )

    def truncate(self, radius: int) -> "BallGraph":
        """The same window cut back to a smaller radius."""
        if radius > self.radius:
            raise ValueError("cannot truncate to a larger radius")
        return self.induced((v for v, d in enumerate(self.depth) if d <= radius), radius=radius)

    def with_wall_multiplicity(self, n: int) -> "BallGraph":
        """Replace each wall edge by n parallel copies."""
        if n < 1:
            raise ValueError("multiplicity factor must be at least 1")
        edges = {e: (m * n if e in self.wall_edges else m) for e, m in self.edges.items()}
        return BallGraph(self.keys, self.labels, edges, self.depth, self.radius, self.wall_edges)

    def side_labels(self, side: Iterable[int]) -> List[str]:
        return sorted((self.labels[v] for v in side), key=shortlex_key)


def normalize_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Cut:
    side: FrozenSet[int]
    boundary: Tuple[Tuple[int, int, int], ...]
    wall_weight: int
    connected: bool = True

    @property
    def boundary_size(self) -> int:
        return sum(m for _, _, m in self.boundary)


@dataclass(frozen=True)
class EndReport:
    inner_radius: int
    probe_radius: int
    unbounded_count: int
    bounded_count: int
    stable: bool
    previous_count: Optional[int] = None
    components: Tuple[FrozenSet[int], ...] = field(default=(), compare=False, repr=False)

    def summary(self) -> str:
        noun = "component" if self.unbounded_count == 1 else "components"
        state = "stable" if self.stable else "unstable"
        return f"{self.unbounded_count} unbounded {noun} ({state})"


def grow_ball(
    oracle: NeighborOracle,
    center: Hashable,
    radius: int,
    budget: Optional[int] = None,
) -> BallGraph:
    """
    Grow the induced ball of the given radius around center.

    Args:
        oracle: Neighbor oracle of the ambient graph
        center: Vertex to grow from
        radius: Non-negative BFS radius
        budget: Maximum number of vertices (defaults to the configured budget)

    Returns:
        The BFS-exact ball, vertices in discovery order

    Raises:
        BudgetError: If the ball holds more vertices than the budget
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if budget is None:
        budget = get_settings().budget

    index: Dict[Hashable, int] = {center: 0}
    keys: List[Hashable] = [center]
    depth: List[int] = [0]
    layer = [center]
    for d in range(radius):
        nxt = []
        for key in layer:
            for nb in oracle.neighbors(key):
                if nb not in index:
                    index[nb] = len(keys)
                    keys.append(nb)
                    depth.append(d + 1)
                    nxt.append(nb)
                    if len(keys) > budget:
                        logger.warning("ball growth hit the vertex budget at depth %d", d + 1)
                        raise BudgetError("ball vertices", budget)
        layer = nxt

    edges: Dict[Edge, int] = {}
    for u, key in enumerate(keys):
        for nb in oracle.neighbors(key):
            v = index.get(nb)
            if v is None or v == u:
                continue
            if u < v:
                edges[(u, v)] = edges.get((u, v), 0) + 1

    labels = tuple(oracle.label(k) for k in keys)
    logger.info("grew ball of radius %d with %d vertices", radius, len(keys))
    return BallGraph(tuple(keys), labels, edges, tuple(depth), radius)


def probe_window(ball: BallGraph, r: int) -> EndReport:
    """
    Count the pieces of the window outside the inner ball.

    A component of ball minus B(r) counts as unbounded when it meets the frontier.
    The count is repeated one radius lower to decide stability.
    """
    R = ball.radius
    if not (0 <= r < R):
        raise ValueError("need 0 <= r < R")

    def count(radius: int) -> Tuple[int, int, Tuple[FrozenSet[int], ...]]:
        outer = [v for v, d in enumerate(ball.depth) if r < d <= radius]
        sub = ball.graph.subgraph(outer)
        unbounded, bounded, comps = 0, 0, []
        for comp in nx.connected_components(sub):
            if any(ball.depth[v] == radius for v in comp):
                unbounded += 1
                comps.append(frozenset(comp))
            else:
                bounded += 1
        comps.sort(key=lambda c: min(c))
        return unbounded, bounded, tuple(comps)

    unbounded, bounded, comps = count(R)
    previous = count(R - 1)[0] if R - 1 > r else None
    stable = previous is not None and previous == unbounded and R >= r + 2
    return EndReport(r, R, unbounded, bounded, stable, previous, comps)


def end_probe(
    oracle: NeighborOracle,
    center: Hashable,
    r: int,
    R: int,
    budget: Optional[int] = None,
) -> EndReport:
    """Grow B(R) and classify the components of B(R) minus B(r)."""
    if not (R > r >= 0):
        raise ValueError("need R > r >= 0")
    return probe_window(grow_ball(oracle, center, R, budget), r)


def boundary_of(ball: BallGraph, side: FrozenSet[int]) -> Tuple[Tuple[int, int, int], ...]:
    return tuple(
        (u, v, m) for (u, v), m in sorted(ball.edges.items()) if (u in side) != (v in side)
    )


def make_cut(ball: BallGraph, side: Iterable[int]) -> Cut:
    """Wrap a vertex set as a Cut, recording boundary, wall weight and side connectivity."""
    side = frozenset(side)
    boundary = boundary_of(ball, side)
    wall = sum(m for u, v, m in boundary if (u, v) in ball.wall_edges)
    rest = [v for v in range(len(ball)) if v not in side]
    connected = (
        bool(side) and bool(rest)
        and nx.is_connected(ball.graph.subgraph(side))
        and nx.is_connected(ball.graph.subgraph(rest))
    )
    return Cut(side, boundary, wall, connected)


def _tidy_side(ball: BallGraph, side: FrozenSet[int], sources: FrozenSet[int], sinks: FrozenSet[int]) -> FrozenSet[int]:
    # moving stray components across never enlarges the boundary
    g = ball.graph
    keep = set()
    for comp in nx.connected_components(g.subgraph(side)):
        if comp & sources:
            keep |= comp
    other = set(range(len(ball))) - keep
    for comp in nx.connected_components(g.subgraph(other)):
        if not comp & sinks:
            keep |= comp
    return frozenset(keep)


def min_vertex_set_cut(ball: BallGraph, sources: Iterable[int], sinks: Iterable[int]) -> Cut:
    """
    Minimum edge cut separating sources from sinks, multiplicities as capacities.

    Among all minimum cuts the source side with the shortlex-least sorted label
    list is returned.

    Raises:
        DisconnectedInputError: If no source is connected to a sink
    """
    sources, sinks = frozenset(sources), frozenset(sinks)
    if not sources or not sinks:
        raise ValueError("sources and sinks must be nonempty")
    if sources & sinks:
        raise ValueError("sources and sinks must be disjoint")

    g = ball.graph
    reach = set()
    for comp in nx.connected_components(g):
        if comp & sources:
            reach |= comp
    if not reach & sinks:
        raise DisconnectedInputError("sources and sinks lie in different components")

    src, snk = -1, -2
    flow_graph = g.copy()
    flow_graph.add_edges_from((src, s) for s in sources)
    flow_graph.add_edges_from((t, snk) for t in sinks)
    residual = edmonds_karp(flow_graph, src, snk)
    arcs = nx.DiGraph()
    arcs.add_nodes_from(residual)
    arcs.add_edges_from(
        (u, v) for u, v, data in residual.edges(data=True) if data["capacity"] - data["flow"] > 0
    )
    lowest = nx.descendants(arcs, src) | {src}
    excluded = nx.ancestors(arcs, snk) | {snk}
    side = _lex_least_closure(ball, arcs, lowest, excluded)
    return make_cut(ball, _tidy_side(ball, side, sources, sinks))


def _lex_least_closure(ball: BallGraph, arcs: nx.DiGraph, lowest: set, excluded: set) -> FrozenSet[int]:
    """
    The minimum-cut source side whose sorted label list is shortlex-least.

    Minimum cuts are exactly the residual-closed sets between lowest and the
    complement of excluded. The answer is built one label at a time: stop as soon
    as the chosen labels are closed, otherwise take the smallest label whose
    closure adds nothing smaller than itself.
    """
    free = [v for v in range(len(ball)) if v not in excluded]
    free.sort(key=lambda v: shortlex_key(ball.labels[v]))
    rank = {v: i for i, v in enumerate(free)}

    chosen: set = set()
    closed = set(lowest)
    last = -1
    while True:
        pending = [rank[v] for v in closed if v >= 0 and v not in chosen]
        if not pending:
            return frozenset(chosen)
        ceiling = min(pending)
        for q in range(last + 1, ceiling + 1):
            v = free[q]
            if v in chosen:
                continue
            grown = closed | nx.descendants(arcs, v) | {v}
            if grown & excluded:
                continue
            if all(u < 0 or u in chosen or u == v or rank[u] > q for u in grown):
                chosen.add(v)
                closed = grown
                last = q
                break
        else:
            raise AssertionError("no residual-closed extension found")


def enumerate_cuts_bruteforce(ball: BallGraph, max_boundary: int, limit: int = BRUTEFORCE_LIMIT) -> List[Cut]:
    """
    Every cut with both sides connected and boundary at most max_boundary.

    Sides are reported without the last vertex, so each cut appears once up to
    complementation.
    """
    n = len(ball)
    if n > limit:
        raise SizeRefusalError("exhaustive cut enumeration", n, limit)
    if n < 2:
        return []
    g = ball.graph
    cuts = []
    for size in range(1, n):
        for side in combinations(range(n - 1), size):
            side = frozenset(side)
            boundary = boundary_of(ball, side)
            if sum(m for _, _, m in boundary) > max_boundary:
                continue
            rest = [v for v in range(n) if v not in side]
            if not nx.is_connected(g.subgraph(side)) or not nx.is_connected(g.subgraph(rest)):
                continue
            cuts.append(make_cut(ball, side))
    cuts.sort(key=lambda c: (c.boundary_size, sorted(c.side)))
    return cuts


def from_networkx(graph: nx.Graph, labels: Optional[Mapping[Hashable, str]] = None,
                  wall_edges: Iterable[Tuple[Hashable, Hashable]] = ()) -> BallGraph:
    """
    Wrap a finite graph as a radius-0 window with every vertex at depth 0.

    Edge attribute "multiplicity" is honoured; nodes keep their iteration order.
    """
    keys = tuple(graph.nodes)
    index = {k: i for i, k in enumerate(keys)}
    edges: Dict[Edge, int] = {}
    for a, b, data in graph.edges(data=True):
        if a == b:
            raise ValueError("self-loops are not allowed")
        e = normalize_edge(index[a], index[b])
        edges[e] = edges.get(e, 0) + int(data.get("multiplicity", 1))
    names = tuple((labels or {}).get(k, str(k)) for k in keys)
    walls = frozenset(normalize_edge(index[a], index[b]) for a, b in wall_edges)
    return BallGraph(keys, names, edges, tuple(0 for _ in keys), 0, walls)
