"""
Marked groups with canonical normal forms.

Every group carries an ordered list of named generators. Elements are
GroupElement values wrapping a hashable canonical form, so equal elements
compare and hash equal. The canonical word of an element is geodesic for the
supported kinds, which makes shortlex comparison by canonical words meaningful.
"""
import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from exceptions import CapabilityError, GroupMismatchError

Letter = Tuple[int, int]

_TOKEN = re.compile(r"^([A-Za-z_][A-Za-z0-9_']*)(?:\^(-?\d+))?$")


def letter_rank(letter: Letter) -> int:
    """g1 < g1^-1 < g2 < g2^-1 < ..."""
    index, sign = letter
    return 2 * index + (0 if sign > 0 else 1)


def free_reduce(letters: Iterable[int]) -> Tuple[int, ...]:
    """Freely reduce a sequence of signed letters (+-(i+1))."""
    stack: List[int] = []
    for x in letters:
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def format_letters(names: Sequence[str], letters: Sequence[Letter]) -> str:
    """Render a letter sequence as a word like a^2*b^-1."""
    if not letters:
        return "1"
    parts = []
    i = 0
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        index, sign = letters[i]
        power = sign * (j - i)
        parts.append(names[index] if power == 1 else f"{names[index]}^{power}")
        i = j
    return "*".join(parts)


@dataclass(frozen=True)
class GroupElement:
    group: "MarkedGroup"
    form: Hashable

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.group.multiply(self, other)

    def inverse(self) -> "GroupElement":
        return self.group.inverse(self)

    def is_identity(self) -> bool:
        return self.form == self.group.identity_form()

    def __str__(self) -> str:
        return self.group.format(self)


class MarkedGroup:
    """A group with named generators and canonical forms."""

    kind = "abstract"

    def __init__(self, names: Sequence[str], name: str = ""):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError(f"generator names must be distinct: {names}")
        self.names = names
        self.name = name or self.kind

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"

    # form level, overridden by each kind

    def identity_form(self) -> Hashable:
        raise NotImplementedError

    def mul_forms(self, f: Hashable, g: Hashable) -> Hashable:
        raise NotImplementedError

    def inv_form(self, f: Hashable) -> Hashable:
        raise NotImplementedError

    def generator_form(self, index: int) -> Hashable:
        raise NotImplementedError

    def word_of_form(self, f: Hashable) -> List[Letter]:
        raise NotImplementedError

    # element level

    def element(self, form: Hashable) -> GroupElement:
        return GroupElement(self, form)

    def identity(self) -> GroupElement:
        return GroupElement(self, self.identity_form())

    def generator(self, which: Any) -> GroupElement:
        index = self.names.index(which) if isinstance(which, str) else int(which)
        return GroupElement(self, self.generator_form(index))

    def generators(self) -> List[GroupElement]:
        return [self.generator(i) for i in range(len(self.names))]

    def _check(self, g: GroupElement) -> None:
        if g.group is not self:
            raise GroupMismatchError(g.group.name, self.name)

    def multiply(self, a: GroupElement, b: GroupElement) -> GroupElement:
        self._check(a)
        self._check(b)
        return GroupElement(self, self.mul_forms(a.form, b.form))

    def inverse(self, g: GroupElement) -> GroupElement:
        self._check(g)
        return GroupElement(self, self.inv_form(g.form))

    def power(self, g: GroupElement, n: int) -> GroupElement:
        base = g if n >= 0 else self.inverse(g)
        result = self.identity()
        for _ in range(abs(n)):
            result = self.multiply(result, base)
        return result

    def word(self, g: GroupElement) -> List[Letter]:
        self._check(g)
        return self.word_of_form(g.form)

    def from_letters(self, letters: Iterable[Letter]) -> GroupElement:
        form = self.identity_form()
        for index, sign in letters:
            gen = self.generator_form(index)
            form = self.mul_forms(form, gen if sign > 0 else self.inv_form(gen))
        return GroupElement(self, form)

    def shortlex_key(self, g: GroupElement) -> Tuple[int, Tuple[int, ...]]:
        w = self.word(g)
        return (len(w), tuple(letter_rank(x) for x in w))

    def format(self, g: GroupElement) -> str:
        return format_letters(self.names, self.word(g))

    def parse(self, text: str) -> GroupElement:
        """Parse a word such as a^2*b^-1 (or 1 for the identity)."""
        text = text.strip().replace(" ", "")
        result = self.identity()
        if text in ("", "1", "e"):
            return result
        for token in text.split("*"):
            m = _TOKEN.match(token)
            if not m or m.group(1) not in self.names:
                raise ValueError(f"unknown token {token!r} for {self.name}")
            power = int(m.group(2)) if m.group(2) else 1
            result = self.multiply(result, self.power(self.generator(m.group(1)), power))
        return result

    def is_torsion_free(self) -> bool:
        return True

    def has_finite_presentation(self) -> bool:
        """Finitely many generators and relators; true of the free, free abelian and trivial kinds."""
        return True


class TrivialGroup(MarkedGroup):
    kind = "trivial"

    def __init__(self, name: str = ""):
        super().__init__((), name)

    def identity_form(self):
        return ()

    def mul_forms(self, f, g):
        return ()

    def inv_form(self, f):
        return ()

    def generator_form(self, index):
        raise IndexError("the trivial group has no generators")

    def word_of_form(self, f):
        return []


class FreeGroup(MarkedGroup):
    kind = "free"

    def __init__(self, names: Sequence[str], name: str = ""):
        if len(names) < 1:
            raise ValueError("a free group needs at least one generator")
        super().__init__(names, name)

    def identity_form(self):
        return ()

    def mul_forms(self, f, g):
        return free_reduce(f + g)

    def inv_form(self, f):
        return tuple(-x for x in reversed(f))

    def generator_form(self, index):
        return (index + 1,)

    def word_of_form(self, f):
        return [(abs(x) - 1, 1 if x > 0 else -1) for x in f]


class FreeAbelianGroup(MarkedGroup):
    kind = "free_abelian"

    def __init__(self, names: Sequence[str], name: str = ""):
        if len(names) < 1:
            raise ValueError("a free abelian group needs at least one generator")
        super().__init__(names, name)
        self.rank = len(self.names)

    def identity_form(self):
        return (0,) * self.rank

    def mul_forms(self, f, g):
        return tuple(x + y for x, y in zip(f, g))

    def inv_form(self, f):
        return tuple(-x for x in f)

    def generator_form(self, index):
        return tuple(1 if i == index else 0 for i in range(self.rank))

    def word_of_form(self, f):
        letters: List[Letter] = []
        for i, e in enumerate(f):
            letters.extend([(i, 1 if e > 0 else -1)] * abs(e))
        return letters

    def vector(self, g: GroupElement) -> Tuple[int, ...]:
        self._check(g)
        return g.form


class _Product(MarkedGroup):
    """Shared bookkeeping for groups assembled from factors."""

    def __init__(self, factors: Sequence[MarkedGroup], name: str = ""):
        if len(factors) < 2:
            raise ValueError("a product needs at least two factors")
        names: List[str] = []
        self.offsets: List[int] = []
        for factor in factors:
            self.offsets.append(len(names))
            names.extend(factor.names)
        super().__init__(names, name)
        self.factors = tuple(factors)

    def locate(self, index: int) -> Tuple[int, int]:
        """Global generator index -> (factor, local index)."""
        for i in reversed(range(len(self.factors))):
            if index >= self.offsets[i]:
                return i, index - self.offsets[i]
        raise IndexError(index)

    def _shift(self, i: int, letters: List[Letter]) -> List[Letter]:
        return [(index + self.offsets[i], sign) for index, sign in letters]

    def has_finite_presentation(self) -> bool:
        return all(X.has_finite_presentation() for X in self.factors)


class DirectProduct(_Product):
    kind = "direct_product"

    def identity_form(self):
        return tuple(f.identity_form() for f in self.factors)

    def mul_forms(self, f, g):
        return tuple(h.mul_forms(x, y) for h, x, y in zip(self.factors, f, g))

    def inv_form(self, f):
        return tuple(h.inv_form(x) for h, x in zip(self.factors, f))

    def generator_form(self, index):
        i, local = self.locate(index)
        form = list(self.identity_form())
        form[i] = self.factors[i].generator_form(local)
        return tuple(form)

    def word_of_form(self, f):
        letters: List[Letter] = []
        for i, (h, x) in enumerate(zip(self.factors, f)):
            letters.extend(self._shift(i, h.word_of_form(x)))
        return letters

    def embed(self, i: int, g: GroupElement) -> GroupElement:
        form = list(self.identity_form())
        form[i] = g.form
        return GroupElement(self, tuple(form))

    def component(self, g: GroupElement, i: int) -> GroupElement:
        self._check(g)
        return GroupElement(self.factors[i], g.form[i])


class FreeProduct(_Product):
    kind = "free_product"

    def identity_form(self):
        return ()

    def mul_forms(self, f, g):
        out = list(f)
        for j, x in g:
            if out and out[-1][0] == j:
                _, y = out.pop()
                merged = self.factors[j].mul_forms(y, x)
                if merged != self.factors[j].identity_form():
                    out.append((j, merged))
            else:
                out.append((j, x))
        return tuple(out)

    def inv_form(self, f):
        return tuple((j, self.factors[j].inv_form(x)) for j, x in reversed(f))

    def generator_form(self, index):
        i, local = self.locate(index)
        return ((i, self.factors[i].generator_form(local)),)

    def word_of_form(self, f):
        letters: List[Letter] = []
        for j, x in f:
            letters.extend(self._shift(j, self.factors[j].word_of_form(x)))
        return letters

    def embed(self, i: int, g: GroupElement) -> GroupElement:
        if g.is_identity():
            return self.identity()
        return GroupElement(self, ((i, g.form),))

    def syllables(self, g: GroupElement) -> List[Tuple[int, GroupElement]]:
        self._check(g)
        return [(j, GroupElement(self.factors[j], x)) for j, x in g.form]


def check_disjoint_names(groups: Iterable[MarkedGroup]) -> None:
    """Generator names double as labels, so they may not repeat across groups."""
    seen: Dict[str, str] = {}
    for group in groups:
        for name in group.names:
            if name in seen:
                raise ValueError(f"generator name {name!r} used by both {seen[name]} and {group.name}")
            seen[name] = group.name


def ball_oracle(group: MarkedGroup, gens: Optional[Sequence[GroupElement]] = None):
    """
    Neighbor oracle of the Cayley graph for a symmetric generating set.

    Args:
        group: The marked group
        gens: Generators; inverses are added and duplicates dropped. Defaults to
            the marked generators.

    Returns:
        A graphs.NeighborOracle over GroupElement vertices labelled by canonical words
    """
    from graphs import NeighborOracle

    gens = list(gens) if gens is not None else group.generators()
    symmetric: List[GroupElement] = []
    for s in gens:
        for x in (s, group.inverse(s)):
            if not x.is_identity() and x not in symmetric:
                symmetric.append(x)

    cache: Dict[GroupElement, List[GroupElement]] = {}

    def neighbors(g: GroupElement) -> List[GroupElement]:
        out = cache.get(g)
        if out is None:
            out = [group.multiply(g, s) for s in symmetric]
            cache[g] = out
        return out

    return NeighborOracle(neighbors=neighbors, label=group.format)


def renamed(group: MarkedGroup, rename: Callable[[str], str]) -> MarkedGroup:
    """
    A structurally identical copy of group with every generator renamed.

    Forms are shared, so GroupElement(copy, g.form) is the image of g.
    """
    if isinstance(group, TrivialGroup):
        return TrivialGroup(rename(group.name))
    if isinstance(group, (FreeGroup, FreeAbelianGroup)):
        return type(group)([rename(n) for n in group.names], rename(group.name))
    if isinstance(group, (DirectProduct, FreeProduct)):
        return type(group)([renamed(f, rename) for f in group.factors], rename(group.name))
    raise CapabilityError("renaming", f"groups of kind {group.kind}")


def structure(group: MarkedGroup) -> Tuple:
    """Shape of a group ignoring names: equal shapes mean renamed copies."""
    if isinstance(group, _Product):
        return (group.kind, tuple(structure(f) for f in group.factors))
    return (group.kind, len(group.names))


def transport(g: GroupElement, target: MarkedGroup) -> GroupElement:
    """Move an element between renamed copies of the same group."""
    if structure(g.group) != structure(target):
        raise GroupMismatchError(g.group.name, target.name)
    return GroupElement(target, g.form)
