"""Bipartite graphs with banded adjacency, exact matching counts and
completion (feasibility) checks.

Vertices are 1-based on both sides, so a perfect matching is a permutation
``pi`` written as a tuple with ``pi[i - 1]`` the right partner of left ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from .limits import LimitExceededError, current_limits
from .matching import IncrementalMatcher, hopcroft_karp

Matching = Tuple[int, ...]


class GraphError(ValueError):
    """Invalid graph or partial assignment."""


class UnsupportedWidthError(LimitExceededError):
    """Bandwidth too large for the transfer DP and n too large for Ryser."""


@dataclass(frozen=True)
class Family:
    kind: str  # "fib", "dist" or "custom"
    param: int = 0

    def __post_init__(self):
        if self.kind not in ("fib", "dist", "custom"):
            raise GraphError(f"unknown family kind {self.kind!r}")
        if self.kind != "custom" and self.param < 1:
            raise GraphError(f"family parameter must be >= 1, got {self.param}")

    def __str__(self) -> str:
        if self.kind == "fib":
            return f"Fibonacci({self.param})"
        if self.kind == "dist":
            return f"Distance({self.param})"
        return "Custom"

    @property
    def slug(self) -> str:
        if self.kind == "custom":
            return "custom"
        return f"{self.kind}{self.param}"


FIB1 = Family("fib", 1)
FIB2 = Family("fib", 2)
DIST2 = Family("dist", 2)
CUSTOM = Family("custom")


@dataclass(frozen=True)
class BipartiteGraph:
    n: int
    neighbors: Tuple[Tuple[int, ...], ...]
    family: Family = CUSTOM

    def __post_init__(self):
        if self.n < 0 or len(self.neighbors) != self.n:
            raise GraphError("neighbors must list one set per left vertex")
        for i, nb in enumerate(self.neighbors, start=1):
            if list(nb) != sorted(set(nb)):
                raise GraphError(f"neighbors of {i} must be sorted and distinct")
            if any(j < 1 or j > self.n for j in nb):
                raise GraphError(f"neighbor of {i} outside [1, {self.n}]")

    def nbrs(self, i: int) -> Tuple[int, ...]:
        return self.neighbors[i - 1]

    @property
    def adjacency(self) -> Dict[int, Tuple[int, ...]]:
        return {i: self.neighbors[i - 1] for i in range(1, self.n + 1)}

    @property
    def degrees(self) -> List[int]:
        return [len(nb) for nb in self.neighbors]

    @property
    def offsets(self) -> Tuple[int, int]:
        """``(lo, hi)`` with every neighbor of ``i`` inside ``[i - lo, i + hi]``."""
        lo = hi = 0
        for i, nb in enumerate(self.neighbors, start=1):
            if nb:
                lo = max(lo, i - nb[0])
                hi = max(hi, nb[-1] - i)
        return lo, hi

    @property
    def bandwidth(self) -> int:
        return max(self.offsets) if self.n else 0

    @property
    def interval_monotone(self) -> bool:
        """Neighbor sets are integer intervals with nondecreasing endpoints."""
        prev = (0, 0)
        for nb in self.neighbors:
            if not nb or nb[-1] - nb[0] + 1 != len(nb):
                return False
            if nb[0] < prev[0] or nb[-1] < prev[1]:
                return False
            prev = (nb[0], nb[-1])
        return True

    def is_matching(self, pi: Sequence[int]) -> bool:
        if len(pi) != self.n or sorted(pi) != list(range(1, self.n + 1)):
            return False
        return all(pi[i - 1] in self.nbrs(i) for i in range(1, self.n + 1))


def make_family(family: Family, n: int) -> BipartiteGraph:
    if n < 0:
        raise GraphError("n must be nonnegative")
    if family.kind == "fib":
        lo, hi = 1, family.param
    elif family.kind == "dist":
        lo = hi = family.param
    else:
        raise GraphError("custom graphs are built with custom_graph()")
    nbrs = tuple(tuple(range(max(1, i - lo), min(n, i + hi) + 1)) for i in range(1, n + 1))
    return BipartiteGraph(n, nbrs, family)


def fibonacci(t: int, n: int) -> BipartiteGraph:
    return make_family(Family("fib", t), n)


def distance(d: int, n: int) -> BipartiteGraph:
    return make_family(Family("dist", d), n)


def custom_graph(neighbors: Sequence[Sequence[int]]) -> BipartiteGraph:
    """Build a custom graph, checking that a perfect matching exists."""
    nbrs = tuple(tuple(sorted(set(nb))) for nb in neighbors)
    g = BipartiteGraph(len(nbrs), nbrs, CUSTOM)
    if len(hopcroft_karp(g.adjacency, range(1, g.n + 1))) != g.n:
        raise GraphError("graph has no perfect matching")
    return g


def three_matching_example() -> BipartiteGraph:
    """Five-vertex example whose perfect matchings are 12534, 12543, 24153."""
    return custom_graph([(1, 2), (2, 4), (1, 5), (3, 4, 5), (3, 4)])


def load_graph(text: str) -> BipartiteGraph:
    """Parse ``n`` followed by one line of 1-based neighbors per left vertex."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphError("empty graph description")
    try:
        n = int(lines[0])
        rows = [[int(tok) for tok in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise GraphError(f"malformed graph file: {exc}") from None
    if len(rows) != n:
        raise GraphError(f"expected {n} neighbor lines, got {len(rows)}")
    return custom_graph(rows)


def dump_graph(graph: BipartiteGraph) -> str:
    out = [str(graph.n)]
    out += [" ".join(map(str, nb)) for nb in graph.neighbors]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- counting


@lru_cache(maxsize=None)
def _fib_counts(t: int, upto: int) -> Tuple[int, ...]:
    # pi(1) = k forces pi(2..k) = 1..k-1, leaving a copy of size n - k
    c = [1]
    for m in range(1, upto + 1):
        c.append(sum(c[m - k] for k in range(1, t + 2) if m - k >= 0))
    return tuple(c)


@lru_cache(maxsize=None)
def _dist2_counts(upto: int) -> Tuple[int, ...]:
    d = [1, 1, 2, 6, 14]
    for m in range(4, upto):
        d.append(2 * d[m] + 2 * d[m - 2] - d[m - 4])
    return tuple(d[: upto + 1])


def fib_count(t: int, n: int) -> int:
    return _fib_counts(t, max(n, 0))[n]


def dist2_count(n: int) -> int:
    return _dist2_counts(max(n, 4))[n]


def family_count(family: Family, n: int) -> int:
    if n < 0:
        return 0
    if family.kind == "fib":
        return fib_count(family.param, n)
    if family == DIST2:
        return dist2_count(n)
    return count_band_dp(make_family(family, n))


def count_prefix_d2(n: int) -> int:
    """Number of distance-2 permutations of size ``n`` with ``pi(1) = 2``."""
    if n < 2:
        return 0
    return sum(dist2_count(k) for k in range(n - 1))


class BandDP:
    """Transfer-matrix machinery over left vertices in order ``1..n``.

    Before left ``i`` is processed the state is the bitmask of unavailable
    right vertices in the window ``[i - lo, i + hi - 1]`` (bit ``b`` is right
    ``i - lo + b``; rights outside ``[1, n]`` count as unavailable).
    """

    def __init__(self, graph: BipartiteGraph):
        self.graph = graph
        self.n = graph.n
        self.lo, self.hi = graph.offsets
        self.w = self.lo + self.hi
        self.full = (1 << self.w) - 1
        self._feasible: Optional[List[Dict[int, bool]]] = None

    def _missing(self, j: int) -> int:
        return 1 if (j < 1 or j > self.n) else 0

    def initial_mask(self) -> int:
        mask = 0
        for b in range(self.w):
            mask |= self._missing(1 - self.lo + b) << b
        return mask

    def moves(self, i: int, mask: int) -> List[Tuple[int, int]]:
        """``(right, next_mask)`` pairs for left ``i`` from state ``mask``."""
        base = i - self.lo
        ext = mask | (self._missing(i + self.hi) << self.w)
        out = []
        for j in self.graph.nbrs(i):
            bit = 1 << (j - base)
            if ext & bit:
                continue
            e2 = ext | bit
            if e2 & 1:
                out.append((j, e2 >> 1))
        return out

    def count(self) -> int:
        states = {self.initial_mask(): 1}
        for i in range(1, self.n + 1):
            nxt: Dict[int, int] = {}
            for mask, c in states.items():
                for _, m2 in self.moves(i, mask):
                    nxt[m2] = nxt.get(m2, 0) + c
            states = nxt
        return states.get(self.full, 0)

    def feasible_table(self) -> List[Dict[int, bool]]:
        """``table[i][mask]``: can lefts ``i..n`` be completed from ``mask``."""
        if self._feasible is None:
            n = self.n
            reach: List[set] = [set() for _ in range(n + 2)]
            reach[1].add(self.initial_mask())
            for i in range(1, n + 1):
                for mask in reach[i]:
                    for _, m2 in self.moves(i, mask):
                        reach[i + 1].add(m2)
            table: List[Dict[int, bool]] = [dict() for _ in range(n + 2)]
            table[n + 1] = {m: m == self.full for m in reach[n + 1]}
            for i in range(n, 0, -1):
                for mask in reach[i]:
                    table[i][mask] = any(table[i + 1][m2] for _, m2 in self.moves(i, mask))
            self._feasible = table
        return self._feasible


def count_band_dp(graph: BipartiteGraph) -> int:
    limits = current_limits()
    if graph.bandwidth > limits.bandwidth:
        raise UnsupportedWidthError(
            f"bandwidth {graph.bandwidth} exceeds DP limit {limits.bandwidth}"
        )
    return BandDP(graph).count()


def permanent_ryser(graph: BipartiteGraph) -> int:
    """Permanent of the 0-1 biadjacency matrix (Ryser, Gray-code order)."""
    n = graph.n
    if n == 0:
        return 1
    cols = [0] * n  # row sums restricted to the current column subset
    col_sets = [[i for i in range(n) if (j + 1) in graph.nbrs(i + 1)] for j in range(n)]
    total = 0
    sign_n = -1 if n % 2 else 1
    gray = 0
    for k in range(1, 1 << n):
        g2 = k ^ (k >> 1)
        flip = (g2 ^ gray).bit_length() - 1
        delta = 1 if g2 & (1 << flip) else -1
        for i in col_sets[flip]:
            cols[i] += delta
        gray = g2
        prod = 1
        for c in cols:
            if c == 0:
                prod = 0
                break
            prod *= c
        if prod:
            size = bin(g2).count("1")
            total += prod if (size % 2 == 0) == (sign_n == 1) else -prod
    return total


def count_exact(graph: BipartiteGraph) -> int:
    """Exact number of perfect matchings."""
    if graph.n == 0:
        return 1
    fam = graph.family
    if fam.kind == "fib" and fam.param in (1, 2):
        return fib_count(fam.param, graph.n)
    if fam == DIST2:
        return dist2_count(graph.n)
    limits = current_limits()
    if graph.bandwidth <= limits.bandwidth:
        return BandDP(graph).count()
    if graph.n <= limits.permanent:
        return permanent_ryser(graph)
    raise UnsupportedWidthError(
        f"bandwidth {graph.bandwidth} > {limits.bandwidth} and n = {graph.n} > {limits.permanent}"
    )


def log_count(graph_or_family, n: Optional[int] = None) -> float:
    if n is None:
        return math.log(count_exact(graph_or_family))
    return math.log(family_count(graph_or_family, n))


# ------------------------------------------------------------ feasibility


def _check_partial(graph: BipartiteGraph, partial: Mapping[int, int]) -> None:
    seen = set()
    for i, j in partial.items():
        if not 1 <= i <= graph.n or j not in graph.nbrs(i):
            raise GraphError(f"{i}->{j} is not an edge")
        if j in seen:
            raise GraphError(f"right vertex {j} used twice")
        seen.add(j)


def completion_structural(graph: BipartiteGraph, partial: Mapping[int, int]) -> bool:
    """Completion test for interval-monotone graphs by greedy pairing.

    The k-th free left (in order) must take the k-th free right; this is
    forced because intervals have nondecreasing endpoints.
    """
    used = set(partial.values())
    free_r = (j for j in range(1, graph.n + 1) if j not in used)
    for i in range(1, graph.n + 1):
        if i in partial:
            continue
        r = next(free_r)
        nb = graph.nbrs(i)
        if r < nb[0] or r > nb[-1]:
            return False
    return True


def completion_matching(graph: BipartiteGraph, partial: Mapping[int, int]) -> bool:
    used = set(partial.values())
    lefts = [i for i in range(1, graph.n + 1) if i not in partial]
    rights = {j for j in range(1, graph.n + 1) if j not in used}
    return len(hopcroft_karp(graph.adjacency, lefts, rights)) == len(lefts)


def has_completion(graph: BipartiteGraph, partial: Mapping[int, int], method: str = "auto") -> bool:
    """True iff ``partial`` extends to a perfect matching of ``graph``."""
    _check_partial(graph, partial)
    if method == "auto":
        method = "structural" if graph.interval_monotone else "matching"
    if method == "structural":
        return completion_structural(graph, partial)
    if method == "matching":
        return completion_matching(graph, partial)
    raise ValueError(f"unknown method {method!r}")


def allowable_options(
    graph: BipartiteGraph, partial: Mapping[int, int], i: int, method: str = "auto"
) -> List[int]:
    """Unused neighbors ``j`` of ``i`` such that ``partial + {i: j}`` completes."""
    if i in partial:
        raise GraphError(f"left {i} already assigned")
    used = set(partial.values())
    cands = [j for j in graph.nbrs(i) if j not in used]
    if method == "auto":
        method = "structural" if graph.interval_monotone else "incremental"
    if method == "incremental":
        lefts = [k for k in range(1, graph.n + 1) if k not in partial]
        rights = [k for k in range(1, graph.n + 1) if k not in used]
        try:
            m = IncrementalMatcher(graph.adjacency, lefts, rights)
        except ValueError:
            return []
        return [j for j in cands if m.can_assign(i, j)]
    out = []
    for j in cands:
        trial = dict(partial)
        trial[i] = j
        ok = completion_structural(graph, trial) if method == "structural" else completion_matching(graph, trial)
        if ok:
            out.append(j)
    return out


# ------------------------------------------------------------ enumeration


def enumerate_matchings(graph: BipartiteGraph, limit: Optional[int] = None) -> Iterator[Matching]:
    """All perfect matchings, lexicographic in ``pi``."""
    if limit is None:
        limit = current_limits().enumerate
    total = count_exact(graph)
    if total > limit:
        raise LimitExceededError(f"{total} matchings exceed enumeration limit {limit}")
    n = graph.n
    if n == 0:
        yield ()
        return
    if not graph.interval_monotone:
        yield from _enumerate_general(graph)
        return
    # Prefix 1..i assigned: every left and right beyond p = max(i, max used)
    # is free, so the greedy completion pairs them with themselves and only
    # the window up to p needs checking.
    lo = [graph.nbrs(i)[0] for i in range(1, n + 1)]
    hi = [graph.nbrs(i)[-1] for i in range(1, n + 1)]
    diag_ok = [True] * (n + 1)  # diag_ok[p]: every i > p has i in nbrs(i)
    for i in range(n, 0, -1):
        diag_ok[i - 1] = diag_ok[i] and lo[i - 1] <= i <= hi[i - 1]
    pi = [0] * n
    used = [False] * (n + 2)

    def completes(i: int, top: int) -> bool:
        p = max(i, top)
        if not diag_ok[p]:
            return False
        r = 1
        for k in range(i + 1, p + 1):
            while used[r]:
                r += 1
            if r < lo[k - 1] or r > hi[k - 1]:
                return False
            r += 1
        return True

    def rec(i: int, top: int):
        if i > n:
            yield tuple(pi)
            return
        for j in range(lo[i - 1], hi[i - 1] + 1):
            if used[j]:
                continue
            used[j] = True
            pi[i - 1] = j
            t = max(top, j)
            if completes(i, t):
                yield from rec(i + 1, t)
            used[j] = False

    yield from rec(1, 0)


def _enumerate_general(graph: BipartiteGraph) -> Iterator[Matching]:
    n = graph.n
    pi: Dict[int, int] = {}

    def rec(i: int):
        if i > n:
            yield tuple(pi[k] for k in range(1, n + 1))
            return
        used = set(pi.values())
        for j in graph.nbrs(i):
            if j in used:
                continue
            pi[i] = j
            if completion_matching(graph, pi):
                yield from rec(i + 1)
            del pi[i]

    yield from rec(1)


def bregman_bound(graph: BipartiteGraph, regular: bool = False) -> float:
    """Log of ``prod_i d_i!^(1/d_i) / M``.

    With ``regular=True`` every left vertex is given the maximum degree,
    which for Fibonacci(1) is the ``6^(n/3) / F_{n,1}`` form.
    """
    degs = graph.degrees
    if regular and degs:
        degs = [max(degs)] * len(degs)
    total = sum(math.lgamma(d + 1) / d for d in degs if d > 0)
    return total - math.log(count_exact(graph))
