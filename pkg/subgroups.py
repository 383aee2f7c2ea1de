"""
Subgroup engines: membership, canonical right-coset representatives and
witness words for finitely generated subgroups of the supported group kinds.

Engines never change after construction; results are memoized per engine.
"""
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from mcp.server.fastmcp.utilities.logging import get_logger
from sympy import Matrix, zeros
from sympy.matrices.normalforms import hermite_normal_form

from config import get_settings
from exceptions import BudgetError, CapabilityError
from groups import (
    DirectProduct,
    FreeAbelianGroup,
    FreeGroup,
    FreeProduct,
    GroupElement,
    Letter,
    MarkedGroup,
    TrivialGroup,
    free_reduce,
    letter_rank,
)

logger = get_logger(__name__)


def _signed_to_letters(word: Sequence[int]) -> List[Letter]:
    return [(abs(x) - 1, 1 if x > 0 else -1) for x in word]


class SubgroupEngine:
    """A finitely generated subgroup of an ambient marked group."""

    kind = "abstract"

    def __init__(self, ambient: MarkedGroup, generators: Sequence[GroupElement]):
        for g in generators:
            if g.group is not ambient:
                raise ValueError(f"generator {g} does not lie in {ambient.name}")
        self.ambient = ambient
        self.generators = tuple(generators)
        self._rep_cache: Dict[GroupElement, GroupElement] = {}
        self._word_cache: Dict[GroupElement, Tuple[Letter, ...]] = {}

    def __repr__(self) -> str:
        gens = ", ".join(str(g) for g in self.generators)
        return f"{self.kind}<{gens}> in {self.ambient.name}"

    def contains(self, g: GroupElement) -> bool:
        raise NotImplementedError

    def _coset_rep(self, g: GroupElement) -> GroupElement:
        raise NotImplementedError

    def _express(self, g: GroupElement) -> List[Letter]:
        raise NotImplementedError

    def express(self, g: GroupElement) -> List[Letter]:
        """A word in the engine generators (index, sign) evaluating to g."""
        word = self._word_cache.get(g)
        if word is None:
            word = tuple(self._express(g))
            self._word_cache[g] = word
        return list(word)

    def is_whole(self) -> bool:
        return False

    def is_trivial(self) -> bool:
        return all(g.is_identity() for g in self.generators)

    def coset_rep(self, g: GroupElement) -> GroupElement:
        """Canonical representative of the right coset C*g."""
        rep = self._rep_cache.get(g)
        if rep is None:
            rep = self._coset_rep(g)
            self._rep_cache[g] = rep
        return rep

    def left_rep(self, g: GroupElement) -> GroupElement:
        """Canonical representative of the left coset g*C."""
        return self.ambient.inverse(self.coset_rep(self.ambient.inverse(g)))

    def evaluate(self, word: Sequence[Letter], images: Sequence[GroupElement]) -> GroupElement:
        """Evaluate a generator word under the given images of the generators."""
        if not images:
            raise ValueError("no images to evaluate against")
        group = images[0].group
        result = group.identity()
        for index, sign in word:
            x = images[index]
            result = group.multiply(result, x if sign > 0 else group.inverse(x))
        return result


class WholeEngine(SubgroupEngine):
    kind = "whole"

    def __init__(self, ambient: MarkedGroup, generators: Optional[Sequence[GroupElement]] = None):
        super().__init__(ambient, ambient.generators() if generators is None else generators)
        # position of each marked generator among the engine generators
        self._slots = {}
        for i, x in enumerate(ambient.generators()):
            if x in self.generators:
                self._slots[i] = self.generators.index(x)

    def contains(self, g):
        return True

    def _coset_rep(self, g):
        return self.ambient.identity()

    def _express(self, g):
        if len(self._slots) != len(self.ambient.names):
            raise CapabilityError("witness word", "whole-group engine without the marked generators")
        return [(self._slots[i], s) for i, s in self.ambient.word(g)]

    def is_whole(self):
        return True


class TrivialEngine(SubgroupEngine):
    kind = "trivial"

    def __init__(self, ambient: MarkedGroup):
        super().__init__(ambient, [])

    def contains(self, g):
        return g.is_identity()

    def _coset_rep(self, g):
        return g

    def _express(self, g):
        if not g.is_identity():
            raise ValueError(f"{g} is not in the trivial subgroup")
        return []

    def is_whole(self):
        return isinstance(self.ambient, TrivialGroup)

    def is_trivial(self):
        return True


class StallingsCore(SubgroupEngine):
    """
    Folded core graph of a subgroup of a free group.

    Edges carry a weight: a reduced word in the subgroup generators. Reading a
    loop at the base multiplies the weights to a witness word for the element read.
    """

    kind = "stallings"

    def __init__(self, ambient: FreeGroup, generators: Sequence[GroupElement]):
        if not isinstance(ambient, FreeGroup):
            raise CapabilityError("stallings core", f"ambient {ambient.name} is not free")
        super().__init__(ambient, generators)
        self._edges: Dict[int, List] = {}
        self._adj: Dict[int, set] = {0: set()}
        self._next_vertex = 1
        self._next_edge = 0
        for j, g in enumerate(self.generators):
            self._add_petal(j, g.form)
        self._fold()
        self._table = self._transitions()
        self._geodesics = self._shortlex_tree()
        logger.info("stallings core with %d vertices for %d generators", len(self._adj), len(self.generators))

    def _new_vertex(self) -> int:
        v = self._next_vertex
        self._next_vertex += 1
        self._adj[v] = set()
        return v

    def _add_edge(self, tail: int, letter: int, head: int, weight: Tuple[int, ...]) -> None:
        if letter < 0:
            tail, head, letter = head, tail, -letter
            weight = tuple(-x for x in reversed(weight))
        eid = self._next_edge
        self._next_edge += 1
        self._edges[eid] = [tail, letter, head, weight]
        self._adj[tail].add(eid)
        self._adj[head].add(eid)

    def _add_petal(self, j: int, word: Tuple[int, ...]) -> None:
        if not word:
            return
        prev = 0
        for i, letter in enumerate(word):
            head = 0 if i == len(word) - 1 else self._new_vertex()
            weight = (j + 1,) if i == 0 else ()
            self._add_edge(prev, letter, head, weight)
            prev = head

    def _half_edges(self, v: int):
        for eid in self._adj[v]:
            tail, letter, head, w = self._edges[eid]
            if tail == v:
                yield eid, letter, head, w
            if head == v:
                yield eid, -letter, tail, tuple(-x for x in reversed(w))

    def _rebase(self, v: int, k: Tuple[int, ...]) -> None:
        kinv = tuple(-x for x in reversed(k))
        for eid in self._adj[v]:
            edge = self._edges[eid]
            if edge[0] == v:
                edge[3] = free_reduce(k + edge[3])
            if edge[2] == v:
                edge[3] = free_reduce(edge[3] + kinv)

    def _conflict(self, v: int):
        seen: Dict[int, Tuple] = {}
        for eid, letter, other, w in self._half_edges(v):
            if letter in seen and seen[letter][0] != eid:
                return seen[letter], (eid, letter, other, w)
            seen[letter] = (eid, letter, other, w)
        return None

    def _fold(self) -> None:
        work = list(self._adj)
        while work:
            u = work.pop()
            if u not in self._adj:
                continue
            clash = self._conflict(u)
            if clash is None:
                continue
            (e1, _, v1, w1), (e2, _, v2, w2) = clash
            work.append(u)
            if v1 == v2:
                self._drop_edge(e2)
                continue
            if v2 == 0:
                e1, v1, w1, e2, v2, w2 = e2, v2, w2, e1, v1, w1
            self._rebase(v2, free_reduce(tuple(-x for x in reversed(w1)) + w2))
            for eid in list(self._adj[v2]):
                edge = self._edges[eid]
                if edge[0] == v2:
                    edge[0] = v1
                if edge[2] == v2:
                    edge[2] = v1
                self._adj[v1].add(eid)
            del self._adj[v2]
            work.append(v1)

    def _drop_edge(self, eid: int) -> None:
        tail, _, head, _ = self._edges.pop(eid)
        self._adj[tail].discard(eid)
        self._adj[head].discard(eid)

    def _transitions(self) -> Dict[int, Dict[int, Tuple[int, Tuple[int, ...]]]]:
        table: Dict[int, Dict[int, Tuple[int, Tuple[int, ...]]]] = {}
        for v in self._adj:
            table[v] = {letter: (other, w) for _, letter, other, w in self._half_edges(v)}
        return table

    def _shortlex_tree(self) -> Dict[int, Tuple[int, ...]]:
        order = sorted(
            (s * (i + 1) for i in range(len(self.ambient.names)) for s in (1, -1)),
            key=lambda x: letter_rank((abs(x) - 1, 1 if x > 0 else -1)),
        )
        geo = {0: ()}
        queue = [0]
        for v in queue:
            for letter in order:
                step = self._table[v].get(letter)
                if step and step[0] not in geo:
                    geo[step[0]] = geo[v] + (letter,)
                    queue.append(step[0])
        return geo

    def _read(self, word: Tuple[int, ...]):
        v, weight = 0, ()
        for i, letter in enumerate(word):
            step = self._table[v].get(letter)
            if step is None:
                return v, weight, word[i:]
            v, w = step
            weight = weight + w
        return v, weight, ()

    def vertex_count(self) -> int:
        return len(self._adj)

    def contains(self, g):
        self.ambient._check(g)
        v, _, rest = self._read(g.form)
        return v == 0 and not rest

    def _coset_rep(self, g):
        v, _, rest = self._read(g.form)
        return self.ambient.element(free_reduce(self._geodesics[v] + rest))

    def _express(self, g):
        v, weight, rest = self._read(g.form)
        if v != 0 or rest:
            raise ValueError(f"{g} is not in {self}")
        return _signed_to_letters(free_reduce(weight))

    def is_whole(self):
        return len(self._adj) == 1 and len(self._table[0]) == 2 * len(self.ambient.names)


def _l1_shell(n: int, m: int) -> Iterator[Tuple[int, ...]]:
    """All integer vectors of length n with L1 norm exactly m."""
    if n == 1:
        yield (m,)
        if m:
            yield (-m,)
        return
    for first in range(m + 1):
        for tail in _l1_shell(n - 1, m - first):
            yield (first,) + tail
            if first:
                yield (-first,) + tail


class LatticeEngine(SubgroupEngine):
    """Subgroup of Z^n through a Hermite-normal-form basis."""

    kind = "lattice"

    def __init__(self, ambient: FreeAbelianGroup, generators: Sequence[GroupElement], budget: Optional[int] = None):
        if not isinstance(ambient, FreeAbelianGroup):
            raise CapabilityError("lattice", f"ambient {ambient.name} is not free abelian")
        super().__init__(ambient, generators)
        self.rank = ambient.rank
        self.budget = budget if budget is not None else get_settings().shortlex_budget
        self._matrix = self._generator_matrix()
        self._basis = self._hermite_basis()
        self._left_inverse = None
        if self.generators and self._matrix.rank() == self._matrix.cols:
            m = self._matrix
            self._left_inverse = (m.T * m).inv() * m.T

    def _generator_matrix(self) -> Matrix:
        if not self.generators:
            return zeros(self.rank, 1)
        return Matrix.hstack(*[Matrix(list(g.form)) for g in self.generators])

    def _hermite_basis(self) -> List[Tuple[int, List[int]]]:
        if all(x == 0 for x in self._matrix):
            return []
        hnf = hermite_normal_form(self._matrix)
        basis = []
        for j in range(hnf.cols):
            col = [int(x) for x in hnf[:, j]]
            nonzero = [i for i, x in enumerate(col) if x != 0]
            if not nonzero:
                continue
            pivot = nonzero[-1]
            if col[pivot] < 0:
                col = [-x for x in col]
            basis.append((pivot, col))
        pivots = [p for p, _ in basis]
        if len(set(pivots)) != len(pivots):
            raise CapabilityError("lattice", "hermite basis without distinct pivots")
        basis.sort(key=lambda pc: -pc[0])
        return basis

    def reduce(self, v: Sequence[int]) -> Tuple[int, ...]:
        """Canonical residue of v modulo the lattice."""
        v = list(v)
        for pivot, col in self._basis:
            q = v[pivot] // col[pivot]
            if q:
                v = [x - q * c for x, c in zip(v, col)]
        return tuple(v)

    def index(self) -> Optional[int]:
        """Index in Z^n, or None when infinite."""
        if len(self._basis) < self.rank:
            return None
        result = 1
        for pivot, col in self._basis:
            result *= col[pivot]
        return result

    def contains(self, g):
        self.ambient._check(g)
        return not any(self.reduce(g.form))

    def _coset_rep(self, g):
        target = self.reduce(g.form)
        if not any(target):
            return self.ambient.identity()
        seen = 0
        for m in range(sum(abs(x) for x in target) + 1):
            found = []
            for w in _l1_shell(self.rank, m):
                seen += 1
                if seen > self.budget:
                    raise BudgetError("shortlex coset search", self.budget)
                if self.reduce(w) == target:
                    found.append(self.ambient.element(w))
            if found:
                return min(found, key=self.ambient.shortlex_key)
        raise AssertionError("residue not reached by its own norm")

    def _express(self, g):
        if not self.contains(g):
            raise ValueError(f"{g} is not in {self}")
        if not self.generators:
            return []
        if self._left_inverse is not None:
            p = self._left_inverse
            coeffs = [sum(p[i, j] * x for j, x in enumerate(g.form)) for i in range(p.rows)]
        else:
            solution, params = self._matrix.gauss_jordan_solve(Matrix(list(g.form)))
            if params.shape[0]:
                solution = solution.subs({q: 0 for q in params})
            coeffs = [solution[i] for i in range(solution.rows)]
        if any(not c.is_integer for c in coeffs):
            raise CapabilityError("lattice witness", "dependent generators without an integral particular solution")
        word: List[Letter] = []
        for i, c in enumerate(coeffs):
            c = int(c)
            word.extend([(i, 1 if c > 0 else -1)] * abs(c))
        return word

    def is_whole(self):
        return self.index() == 1


class FreeFactorEngine(SubgroupEngine):
    """A subgroup of one free factor, seen inside the free product."""

    kind = "free_factor"

    def __init__(self, ambient: FreeProduct, factor: int, inner: SubgroupEngine):
        if not isinstance(ambient, FreeProduct):
            raise CapabilityError("free factor", f"ambient {ambient.name} is not a free product")
        if inner.ambient is not ambient.factors[factor]:
            raise ValueError("inner engine must live in the selected factor")
        super().__init__(ambient, [ambient.embed(factor, g) for g in inner.generators])
        self.factor = factor
        self.inner = inner

    def _single(self, g: GroupElement) -> Optional[GroupElement]:
        syl = self.ambient.syllables(g)
        if not syl:
            return self.ambient.factors[self.factor].identity()
        if len(syl) == 1 and syl[0][0] == self.factor:
            return syl[0][1]
        return None

    def contains(self, g):
        x = self._single(g)
        return x is not None and self.inner.contains(x)

    def _coset_rep(self, g):
        syl = self.ambient.syllables(g)
        if not syl or syl[0][0] != self.factor:
            return g
        head = self.ambient.embed(self.factor, self.inner.coset_rep(syl[0][1]))
        rest = self.ambient.element(g.form[1:])
        return self.ambient.multiply(head, rest)

    def _express(self, g):
        x = self._single(g)
        if x is None:
            raise ValueError(f"{g} is not in {self}")
        return self.inner.express(x)

    def is_trivial(self):
        return self.inner.is_trivial()


class ProductEngine(SubgroupEngine):
    """Componentwise product of engines inside a direct product."""

    kind = "product"

    def __init__(self, ambient: DirectProduct, engines: Sequence[SubgroupEngine]):
        if not isinstance(ambient, DirectProduct):
            raise CapabilityError("product engine", f"ambient {ambient.name} is not a direct product")
        if len(engines) != len(ambient.factors):
            raise ValueError("one engine per factor is required")
        gens, self.offsets = [], []
        for i, engine in enumerate(engines):
            if engine.ambient is not ambient.factors[i]:
                raise ValueError(f"engine {i} lives in the wrong factor")
            self.offsets.append(len(gens))
            gens.extend(ambient.embed(i, g) for g in engine.generators)
        super().__init__(ambient, gens)
        self.engines = tuple(engines)

    def contains(self, g):
        return all(e.contains(self.ambient.component(g, i)) for i, e in enumerate(self.engines))

    def _coset_rep(self, g):
        form = tuple(e.coset_rep(self.ambient.component(g, i)).form for i, e in enumerate(self.engines))
        return self.ambient.element(form)

    def _express(self, g):
        word: List[Letter] = []
        for i, e in enumerate(self.engines):
            word.extend((idx + self.offsets[i], s) for idx, s in e.express(self.ambient.component(g, i)))
        return word

    def is_whole(self):
        return all(e.is_whole() for e in self.engines)

    def is_trivial(self):
        return all(e.is_trivial() for e in self.engines)


class ReindexedEngine(SubgroupEngine):
    """An engine presented with the caller's generator order."""

    def __init__(self, inner: SubgroupEngine, generators: Sequence[GroupElement]):
        super().__init__(inner.ambient, generators)
        self.inner = inner
        self.kind = inner.kind
        self._slots = []
        for x in inner.generators:
            if x not in self.generators:
                raise ValueError(f"generator {x} missing from the requested order")
            self._slots.append(self.generators.index(x))

    def contains(self, g):
        return self.inner.contains(g)

    def _coset_rep(self, g):
        return self.inner.coset_rep(g)

    def _express(self, g):
        return [(self._slots[i], s) for i, s in self.inner.express(g)]

    def is_whole(self):
        return self.inner.is_whole()

    def is_trivial(self):
        return self.inner.is_trivial()


def direct_factor(ambient: DirectProduct, index: int) -> ProductEngine:
    """The i-th direct factor as a subgroup."""
    engines = [
        WholeEngine(f) if i == index else TrivialEngine(f) for i, f in enumerate(ambient.factors)
    ]
    return ProductEngine(ambient, engines)


def _support(ambient, g: GroupElement) -> List[int]:
    if isinstance(ambient, DirectProduct):
        return [i for i, f in enumerate(ambient.factors) if g.form[i] != f.identity_form()]
    if isinstance(ambient, FreeProduct):
        return sorted({j for j, _ in g.form})
    return []


def _aligned(engine: SubgroupEngine, generators: Sequence[GroupElement]) -> SubgroupEngine:
    if list(engine.generators) == list(generators):
        return engine
    return ReindexedEngine(engine, generators)


def make_engine(ambient: MarkedGroup, generators: Sequence[GroupElement]) -> SubgroupEngine:
    """
    Pick the engine for the subgroup generated by the given elements.

    Witness words from the returned engine index into generators as given.

    Raises:
        CapabilityError: If the combination is outside the supported classes
    """
    generators = list(generators)
    nontrivial = [g for g in generators if not g.is_identity()]
    if not nontrivial:
        return TrivialEngine(ambient)
    if set(ambient.generators()) <= set(generators):
        return WholeEngine(ambient, generators)
    if isinstance(ambient, FreeGroup):
        return StallingsCore(ambient, generators)
    if isinstance(ambient, FreeAbelianGroup):
        return LatticeEngine(ambient, generators)
    if isinstance(ambient, DirectProduct):
        per_factor: Dict[int, List[GroupElement]] = {i: [] for i in range(len(ambient.factors))}
        for g in nontrivial:
            support = _support(ambient, g)
            if len(support) != 1:
                raise CapabilityError("product engine", f"generator {g} spans several direct factors")
            per_factor[support[0]].append(ambient.component(g, support[0]))
        engines = [make_engine(f, per_factor[i]) for i, f in enumerate(ambient.factors)]
        return _aligned(ProductEngine(ambient, engines), generators)
    if isinstance(ambient, FreeProduct):
        supports = {tuple(_support(ambient, g)) for g in nontrivial}
        if len(supports) == 1 and len(next(iter(supports))) == 1 and all(len(g.form) == 1 for g in nontrivial):
            i = next(iter(supports))[0]
            factor = ambient.factors[i]
            inner = make_engine(factor, [GroupElement(factor, g.form[0][1]) for g in nontrivial])
            return _aligned(FreeFactorEngine(ambient, i, inner), generators)
        raise CapabilityError("free product subgroup", "generators mix free factors; generalized foldings are not supported")
    builder = getattr(ambient, "engine_for", None)
    if builder is not None:
        return builder(generators)
    raise CapabilityError("subgroup engine", f"no engine for ambient kind {ambient.kind}")


def membership(engine: SubgroupEngine, g: GroupElement) -> bool:
    return engine.contains(g)


def coset_rep(engine: SubgroupEngine, g: GroupElement) -> GroupElement:
    return engine.coset_rep(g)
