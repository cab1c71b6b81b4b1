"""Matroid oracles, concrete families, and exact max-weight-basis machinery.

Elements are integers (indices into a ground set). Weights are exact
``fractions.Fraction`` values so that basis computations and tie-breaks are
bit-exact; nothing in the optimization path touches floating point.

The total preference order used everywhere is *weight descending, element id
ascending*. Under it every element has a distinct key, the greedy basis is
unique, and ties between equal-weight bases resolve to the lexicographically
earlier one.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .errors import CapacityError, ContractViolationError, DomainError, ParameterError

BRUTE_FORCE_CAP = 20


def as_weights(values: Iterable) -> list[Fraction]:
    """Normalize a weight list to Fractions, rejecting negatives."""
    out = [Fraction(v) for v in values]
    for i, w in enumerate(out):
        if w < 0:
            raise ParameterError(f"weight of element {i} is negative: {w}")
    return out


def weight_key(weights: Sequence[Fraction], elem: int):
    """Sort key realizing the weight-descending, id-ascending order."""
    return (-weights[elem], elem)


class MatroidOracle:
    """Independence-query interface over an integer ground set.

    ``ground`` is the set of usable element ids; for base matroids it is
    ``range(ground_size)``, and restrictions shrink it while preserving ids.
    """

    def __init__(self, ground: Iterable[int]):
        self.ground = frozenset(ground)

    @property
    def ground_size(self) -> int:
        return len(self.ground)

    def _independent(self, elems: frozenset) -> bool:
        raise NotImplementedError

    def is_independent(self, elems: Iterable[int]) -> bool:
        s = frozenset(elems)
        if not s <= self.ground:
            raise DomainError(f"elements {sorted(s - self.ground)} outside ground set")
        return self._independent(s)

    def rank(self, elems: Iterable[int]) -> int:
        """Size of a maximal independent subset of ``elems``."""
        s = sorted(frozenset(elems))
        if not set(s) <= self.ground:
            raise DomainError(f"elements outside ground set in rank query")
        picked: list[int] = []
        for e in s:
            if self._independent(frozenset(picked + [e])):
                picked.append(e)
        return len(picked)

    def full_rank(self) -> int:
        return self.rank(self.ground)

    def spans(self, indep: Iterable[int], target: Iterable[int]) -> bool:
        """True iff adding ``target`` to ``indep`` does not raise the rank."""
        i = frozenset(indep)
        if not self.is_independent(i):
            raise ContractViolationError("spans() requires an independent base set")
        t = frozenset(target)
        if not t <= self.ground:
            raise DomainError("target contains elements outside ground set")
        return self.rank(i | t) == len(i)

    def restrict(self, elems: Iterable[int]) -> "MatroidOracle":
        return RestrictedMatroid(self, elems)

    def contract(self, elems: Iterable[int]) -> "MatroidOracle":
        return ContractedMatroid(self, elems)


class GraphicMatroid(MatroidOracle):
    """Graphic matroid of an undirected multigraph.

    Edges are stored canonically with u < v; elements are edge *indices*, so
    parallel edges (which contraction creates) are legal. A set is
    independent iff its edges are acyclic, decided by a union-find rebuilt
    per query.
    """

    def __init__(self, vertex_count: int, edges: Sequence[tuple[int, int]]):
        if vertex_count < 0:
            raise ParameterError("vertex_count must be non-negative")
        canon = []
        for u, v in edges:
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise ParameterError(f"edge ({u},{v}) has endpoint outside vertex range")
            if u == v:
                raise ParameterError(f"self-loop ({u},{v}) not supported")
            canon.append((u, v) if u < v else (v, u))
        self.vertex_count = vertex_count
        self.edges = canon
        super().__init__(range(len(canon)))

    def _independent(self, elems: frozenset) -> bool:
        parent = list(range(self.vertex_count))
        find = self._find
        for e in elems:
            u, v = self.edges[e]
            ru, rv = find(parent, u), find(parent, v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    @staticmethod
    def _find(parent: list, x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def rank(self, elems: Iterable[int]) -> int:
        # union-find merge count; equals the generic greedy rank
        s = frozenset(elems)
        if not s <= self.ground:
            raise DomainError("elements outside ground set in rank query")
        parent = list(range(self.vertex_count))
        merges = 0
        for e in sorted(s):
            u, v = self.edges[e]
            ru, rv = self._find(parent, u), self._find(parent, v)
            if ru != rv:
                parent[ru] = rv
                merges += 1
        return merges

    def spans(self, indep: Iterable[int], target: Iterable[int]) -> bool:
        i = frozenset(indep)
        if not self.is_independent(i):
            raise ContractViolationError("spans() requires an independent base set")
        t = frozenset(target)
        if not t <= self.ground:
            raise DomainError("target contains elements outside ground set")
        parent = list(range(self.vertex_count))
        for e in i:
            u, v = self.edges[e]
            parent[self._find(parent, u)] = self._find(parent, v)
        for e in t:
            u, v = self.edges[e]
            if self._find(parent, u) != self._find(parent, v):
                return False
        return True


class UniformMatroid(MatroidOracle):
    """k-uniform matroid: independent iff cardinality <= k."""

    def __init__(self, ground_size: int, k: int):
        if ground_size < 0 or k < 0:
            raise ParameterError("ground_size and k must be non-negative")
        self.k = k
        super().__init__(range(ground_size))

    def _independent(self, elems: frozenset) -> bool:
        return len(elems) <= self.k

    def rank(self, elems: Iterable[int]) -> int:
        s = frozenset(elems)
        if not s <= self.ground:
            raise DomainError("elements outside ground set in rank query")
        return min(len(s), self.k)


class RestrictedMatroid(MatroidOracle):
    """Restriction to a subset of the ground set; element ids preserved."""

    def __init__(self, base: MatroidOracle, elems: Iterable[int]):
        keep = frozenset(elems)
        if not keep <= base.ground:
            raise DomainError("restriction set not contained in ground set")
        self.base = base
        super().__init__(keep)

    def _independent(self, elems: frozenset) -> bool:
        return self.base._independent(elems)


class ContractedMatroid(MatroidOracle):
    """Contraction by an independent set: T is independent iff T + S is."""

    def __init__(self, base: MatroidOracle, elems: Iterable[int]):
        s = frozenset(elems)
        if not base.is_independent(s):
            raise ContractViolationError("can only contract by an independent set")
        self.base = base
        self.contracted = s
        super().__init__(base.ground - s)

    def _independent(self, elems: frozenset) -> bool:
        return self.base._independent(elems | self.contracted)


def is_independent(m: MatroidOracle, elems: Iterable[int]) -> bool:
    return m.is_independent(elems)


def rank(m: MatroidOracle, elems: Iterable[int]) -> int:
    return m.rank(elems)


def spans(m: MatroidOracle, indep: Iterable[int], target: Iterable[int]) -> bool:
    return m.spans(indep, target)


def restrict(m: MatroidOracle, elems: Iterable[int]) -> MatroidOracle:
    return m.restrict(elems)


def contract(m: MatroidOracle, elems: Iterable[int]) -> MatroidOracle:
    return m.contract(elems)


def max_weight_basis(m: MatroidOracle, weights: Sequence[Fraction]) -> frozenset:
    """Greedy basis in weight-descending order, ties by ascending id.

    This is exact: the returned set is the unique basis maximizing the
    sorted sequence of (weight, -id) pairs, which for distinct weights is
    just the max-weight basis and otherwise picks the lexicographically
    earlier one.
    """
    picked: list[int] = []
    for e in sorted(m.ground, key=lambda e: weight_key(weights, e)):
        if m._independent(frozenset(picked + [e])):
            picked.append(e)
    return frozenset(picked)


def brute_force_mwb(m: MatroidOracle, weights: Sequence[Fraction]) -> frozenset:
    """Enumerate every subset of the ground set and return the best
    independent one. Test oracle only; capped at 20 elements.

    "Best" maximizes the sorted-descending profile of (weight, -id) pairs,
    the same total preference the greedy uses, so ties are broken
    identically.
    """
    if m.ground_size > BRUTE_FORCE_CAP:
        raise CapacityError(f"brute force capped at {BRUTE_FORCE_CAP} elements")
    ground = sorted(m.ground)
    best = None
    best_profile = None
    for r in range(len(ground) + 1):
        for combo in combinations(ground, r):
            s = frozenset(combo)
            if not m._independent(s):
                continue
            profile = sorted(((weights[e], -e) for e in combo), reverse=True)
            if best_profile is None or profile > best_profile:
                best, best_profile = s, profile
    return best if best is not None else frozenset()


def total_weight(weights: Sequence[Fraction], elems: Iterable[int]) -> Fraction:
    return sum((weights[e] for e in elems), Fraction(0))


def complete_graph_edges(n: int) -> list[tuple[int, int]]:
    """Edges of K_n in row-major upper-triangle order."""
    return [(u, v) for u in range(n) for v in range(u + 1, n)]


def complete_graph_edge_index(n: int, u: int, v: int) -> int:
    """Index of edge {u,v} in the row-major upper-triangle order of K_n."""
    if u > v:
        u, v = v, u
    if not (0 <= u < v < n):
        raise ParameterError(f"({u},{v}) is not an edge of K_{n}")
    return u * n - u * (u + 1) // 2 + (v - u - 1)


def parse_graph_file(text: str) -> tuple[GraphicMatroid, list[Fraction] | None]:
    """Parse the plain-text graph format.

    First line ``n m``, then m lines ``u v`` (0-indexed). Optionally, m more
    lines of decimal rationals (``0.25`` or ``1/4``) giving the parallel
    weight list.
    """
    tokens = [line.split() for line in text.splitlines() if line.strip()]
    if not tokens:
        raise ParameterError("empty graph file")
    try:
        n, m = int(tokens[0][0]), int(tokens[0][1])
    except (IndexError, ValueError) as exc:
        raise ParameterError("graph file must start with 'n m'") from exc
    if len(tokens) < 1 + m:
        raise ParameterError(f"expected {m} edge lines, found {len(tokens) - 1}")
    edges = []
    for row in tokens[1 : 1 + m]:
        edges.append((int(row[0]), int(row[1])))
    matroid = GraphicMatroid(n, edges)
    weights = None
    rest = tokens[1 + m :]
    if rest:
        flat = [tok for row in rest for tok in row]
        if len(flat) != m:
            raise ParameterError(f"expected {m} weights, found {len(flat)}")
        weights = as_weights(Fraction(tok) for tok in flat)
    return matroid, weights


def format_graph_file(matroid: GraphicMatroid, weights: Sequence[Fraction] | None = None) -> str:
    lines = [f"{matroid.vertex_count} {len(matroid.edges)}"]
    lines += [f"{u} {v}" for u, v in matroid.edges]
    if weights is not None:
        lines += [str(Fraction(w)) for w in weights]
    return "\n".join(lines) + "\n"
