"""Vectorized sampling kernels.

Each kernel draws a batch of traces at once with numpy and returns their log
weights and matchings.  Kernels reproduce the distribution of the generic
engine in :mod:`simatch.sis` exactly (the tests compare path probabilities
and frequencies); they exist only because the generic engine is slow for
large ``n``.

* :class:`ChainKernel` covers samplers that consume the permutation in
  blocks from the left (fixed and greedy orders on Fibonacci families and
  the tuned distance-2 rule).  A block move is a list of ``(dl, dr)`` pairs
  meaning ``pi(p + dl) = p + dr`` where ``p`` is the size of the finished
  prefix.  Tails near the top boundary come from the generic engine.
* :class:`CycleKernel` covers random orders on Fibonacci(t) graphs, where
  every decision picks a cycle span through the chosen index.
* :class:`BandKernel` covers fixed-order uniform sampling on any banded
  graph, with completion checks read from a transfer-DP feasibility table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from . import bipartite as bp
from . import sis
from .bipartite import BipartiteGraph

Move = Tuple[float, Tuple[Tuple[int, int], ...], int, int]  # prob, pairs, advance, next class


@dataclass(frozen=True)
class ChainSpec:
    moves: Tuple[Tuple[Move, ...], ...]  # per class
    min_r: Tuple[int, ...]  # moves apply while remaining >= min_r


def _block(length: int) -> Tuple[Tuple[int, int], ...]:
    return tuple((i, j) for i, j in sis.span_assignment(1, length))


def _chain_spec(slug: str, algo: str) -> Optional[ChainSpec]:
    tab = sis.star_rule_tables()
    third = (1 / 3, 1 / 3, 1 / 3)
    if slug == "fib1" and algo in ("fixed", "fixed-star"):
        pr = (0.5, 0.5) if algo == "fixed" else tab.fib_fixed
        return ChainSpec((((pr[0], _block(1), 1, 0), (pr[1], _block(2), 2, 0)),), (2,))
    if slug == "fib1" and algo in ("greedy", "greedy-star"):
        pr = third if algo == "greedy" else tab.fib_greedy
        moves = (
            (pr[0], ((1, 2), (2, 1)), 2, 0),
            (pr[1], ((1, 1), (2, 2)), 2, 0),
            (pr[2], ((1, 1), (2, 3), (3, 2)), 3, 0),
        )
        return ChainSpec((moves,), (3,))
    if slug == "fib2" and algo in ("fixed", "fixed-star"):
        pr = third if algo == "fixed" else tab.fib2_fixed
        return ChainSpec((tuple((pr[k], _block(k + 1), k + 1, 0) for k in range(3)),), (3,))
    if slug == "fib2" and algo == "greedy":
        menu = sis.fib2_block_menu(1)
        return ChainSpec((tuple((1 / len(menu), a, length, 0) for a, length in menu),), (5,))
    if slug == "dist2" and algo == "fixed-star":
        c1, c2 = tab.dist2_case1, tab.dist2_case2
        case1 = (
            (c1[0], ((1, 1),), 1, 0),
            (c1[1], ((1, 2),), 1, 1),
            (c1[2], ((1, 3), (2, 1)), 2, 1),
            (c1[3], ((1, 3), (2, 2), (3, 1)), 3, 0),
            (c1[4], ((1, 3), (2, 4), (3, 1), (4, 2)), 4, 0),
        )
        case2 = (
            (c2[0], ((1, 0),), 1, 0),
            (c2[1], ((1, 2), (2, 0)), 2, 0),
            (c2[2], ((1, 3), (2, 0)), 2, 1),
        )
        return ChainSpec((case1, case2), (4, 3))
    return None


Tail = Tuple[Tuple[float, Tuple[Tuple[int, int], ...], float], ...]  # prob, pairs, log weight


@lru_cache(maxsize=None)
def _tails(family: bp.Family, algo: str, cls: int, r: int) -> Tail:
    """Outcomes of the generic engine on the last ``r`` lefts in class ``cls``."""
    policy, rule = sis.resolve_algorithm(family, algo)
    if cls == 0:
        g = bp.make_family(family, r)
        smp = sis.Sampler(g, policy, rule)
        start, off = smp.initial_state(), 0
    else:
        # distance-2 with right p free and right p + 1 used, here p = 2
        g = bp.make_family(family, r + 2)
        smp = sis.Sampler(g, policy, rule)
        start, off = smp.propagate((1, 3) + (0,) * r), 2
    out = []
    for final, prob, logt in smp.outcomes(start):
        pairs = tuple((i - off, final[i - 1] - off) for i in range(off + 1, g.n + 1))
        out.append((prob, pairs, logt))
    return tuple(out)


class NotProducibleError(ValueError):
    """The matching cannot be produced by the sampler being scored."""


def _consistent(perm: np.ndarray, sel: np.ndarray, base: np.ndarray, pairs) -> np.ndarray:
    ok = np.ones(sel.size, dtype=bool)
    for dl, dr in pairs:
        ok &= perm[sel, base + dl - 1] == base + dr
    return ok


class ChainKernel:
    def __init__(self, graph: BipartiteGraph, algo: str, spec: ChainSpec):
        self.n = graph.n
        self.family = graph.family
        self.algo = algo
        self.spec = spec

    def _options(self, c: int, r: int):
        """``(prob, pairs, advance, next class, log weight)`` for class ``c``."""
        if r >= self.spec.min_r[c]:
            return [(pr, pairs, adv, nxt, -math.log(pr)) for pr, pairs, adv, nxt in self.spec.moves[c]]
        return [(pr, pairs, r, 0, lw) for pr, pairs, lw in _tails(self.family, self.algo, c, r)]

    def _walk(self, size: int, perm: np.ndarray, choose) -> np.ndarray:
        n = self.n
        p = np.zeros(size, dtype=np.int64)
        cls = np.zeros(size, dtype=np.int64)
        logt = np.zeros(size)
        while True:
            active = p < n
            if not active.any():
                break
            r = n - p
            cls_now = cls.copy()
            groups = []
            for c in range(len(self.spec.moves)):
                in_c = active & (cls_now == c)
                if not in_c.any():
                    continue
                main = np.nonzero(in_c & (r >= self.spec.min_r[c]))[0]
                if main.size:
                    groups.append((main, self._options(c, self.spec.min_r[c])))
                for rr in range(1, self.spec.min_r[c]):
                    sel_t = np.nonzero(in_c & (r == rr))[0]
                    if sel_t.size:
                        groups.append((sel_t, self._options(c, rr)))
            for rows, opts in groups:
                pick = choose(rows, p[rows], opts)
                for k, (_, pairs, adv, nxt, lw) in enumerate(opts):
                    sel = rows[pick == k]
                    if not sel.size:
                        continue
                    base = p[sel]
                    for dl, dr in pairs:
                        perm[sel, base + dl - 1] = base + dr
                    logt[sel] += lw
                    p[sel] = base + adv
                    cls[sel] = nxt
        return logt

    def run(self, rng: np.random.Generator, size: int):
        perm = np.zeros((size, self.n), dtype=np.int32)

        def choose(rows, base, opts):
            cum = np.cumsum([o[0] for o in opts])
            cum[-1] = 1.0  # guard the top bin against rounding
            return np.searchsorted(cum, rng.random(rows.size), side="right")

        return self._walk(size, perm, choose), perm

    def score(self, perm: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """``log T`` of each row of ``perm`` under this sampler."""
        perm = np.asarray(perm)

        def choose(rows, base, opts):
            pick = np.full(rows.size, -1)
            for k, o in enumerate(opts):
                pick[(pick < 0) & _consistent(perm, rows, base, o[1])] = k
            if (pick < 0).any():
                raise NotProducibleError("matching not produced by this sampler")
            return pick

        return self._walk(perm.shape[0], perm.copy(), choose)


class CycleKernel:
    """Random order over undetermined indices; each step picks a cycle span."""

    def __init__(self, graph: BipartiteGraph, t: int):
        self.n = graph.n
        self.t = t
        self.spans = [(a, b) for a in range(-t, 1) for b in range(0, t + 1) if b - a <= t]

    def _walk(self, rng: np.random.Generator, size: int, perm: np.ndarray, choose) -> np.ndarray:
        n, t = self.n, self.t
        order = np.argsort(rng.random((size, n)), axis=1) + 1  # 1-based lefts
        free = np.zeros((size, n + 2 * t + 1), dtype=bool)  # column k + t holds left k
        free[:, t + 1 : t + n + 1] = True
        logt = np.zeros(size)
        rows = np.arange(size)
        for s in range(n):
            i = order[:, s]
            idx = np.nonzero(free[rows, i + t])[0]
            if not idx.size:
                continue
            ii = i[idx]
            valid = np.empty((idx.size, len(self.spans)), dtype=bool)
            for k, (a, b) in enumerate(self.spans):
                ok = np.ones(idx.size, dtype=bool)
                for d in range(a, b + 1):
                    ok &= free[idx, ii + d + t]
                valid[:, k] = ok
            chosen = choose(idx, ii, valid)
            logt[idx] += np.log(valid.sum(axis=1))
            for k, (a, b) in enumerate(self.spans):
                m = chosen == k
                if not m.any():
                    continue
                sel, c = idx[m], ii[m]
                perm[sel, c + a - 1] = c + b
                for d in range(a + 1, b + 1):
                    perm[sel, c + d - 1] = c + d - 1
                for d in range(a, b + 1):
                    free[sel, c + d + t] = False
        return logt

    def run(self, rng: np.random.Generator, size: int):
        perm = np.zeros((size, self.n), dtype=np.int32)

        def choose(idx, ii, valid):
            c = valid.sum(axis=1)
            target = np.minimum(np.floor(rng.random(idx.size) * c).astype(np.int64), c - 1)
            rank = np.cumsum(valid, axis=1) - 1
            return np.argmax((rank == target[:, None]) & valid, axis=1)

        return self._walk(rng, size, perm, choose), perm

    def score(self, perm: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """``log T`` of each row of ``perm`` along a fresh uniform order."""
        perm = np.asarray(perm)
        size, n = perm.shape
        # cycle of i: starts at the last p <= i with pi(p) >= p and ends at pi(p)
        pos = np.arange(1, n + 1)
        start = np.maximum.accumulate(np.where(perm >= pos, pos, 0), axis=1)
        if (start == 0).any():
            raise NotProducibleError("matching not produced by this sampler")
        end = np.take_along_axis(perm, start - 1, axis=1)

        def choose(idx, ii, valid):
            a = start[idx, ii - 1] - ii
            b = end[idx, ii - 1] - ii
            pick = np.full(idx.size, -1)
            for k, span in enumerate(self.spans):
                pick[(a == span[0]) & (b == span[1]) & valid[:, k]] = k
            if (pick < 0).any():
                raise NotProducibleError("matching not produced by this sampler")
            return pick

        return self._walk(rng, size, perm.copy(), choose)


class BandKernel:
    """Fixed order, uniform over allowable options, any banded graph."""

    MAX_WIDTH = 12

    def __init__(self, graph: BipartiteGraph):
        dp = bp.BandDP(graph)
        if dp.w > self.MAX_WIDTH:
            raise ValueError("bandwidth too large for the vectorized kernel")
        self.graph = graph
        self.dp = dp
        n, w = graph.n, dp.w
        table = dp.feasible_table()
        feas = np.zeros((n + 2, 1 << w), dtype=bool)
        for i in range(1, n + 2):
            for mask, ok in table[i].items():
                feas[i, mask] = ok
        self.feas = feas

    def _walk(self, size: int, perm: np.ndarray, choose) -> np.ndarray:
        g, dp = self.graph, self.dp
        lo, hi, w = dp.lo, dp.hi, dp.w
        mask = np.full(size, dp.initial_mask(), dtype=np.int64)
        logt = np.zeros(size)
        rows = np.arange(size)
        for i in range(1, g.n + 1):
            ext = mask | (dp._missing(i + hi) << w)
            cands = np.asarray([j - (i - lo) for j in g.nbrs(i)], dtype=np.int64)
            valid = np.zeros((size, cands.size), dtype=bool)
            nxt = np.zeros((size, cands.size), dtype=np.int64)
            for k, b in enumerate(cands):
                e2 = ext | (1 << int(b))
                m2 = e2 >> 1
                ok = ((ext >> b) & 1 == 0) & ((e2 & 1) == 1)
                ok &= self.feas[i + 1, np.where(ok, m2, 0)]
                valid[:, k] = ok
                nxt[:, k] = m2
            chosen = choose(i, cands + (i - lo), valid)
            perm[:, i - 1] = cands[chosen] + (i - lo)
            mask = nxt[rows, chosen]
            logt += np.log(valid.sum(axis=1))
        return logt

    def run(self, rng: np.random.Generator, size: int):
        perm = np.zeros((size, self.graph.n), dtype=np.int32)

        def choose(i, rights, valid):
            c = valid.sum(axis=1)
            target = np.minimum(np.floor(rng.random(valid.shape[0]) * c).astype(np.int64), c - 1)
            rank = np.cumsum(valid, axis=1) - 1
            return np.argmax((rank == target[:, None]) & valid, axis=1)

        return self._walk(size, perm, choose), perm

    def score(self, perm: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        perm = np.asarray(perm)

        def choose(i, rights, valid):
            hit = (perm[:, i - 1][:, None] == rights[None, :]) & valid
            if not hit.any(axis=1).all():
                raise NotProducibleError("matching not produced by this sampler")
            return np.argmax(hit, axis=1)

        return self._walk(perm.shape[0], perm.copy(), choose)


class EngineKernel:
    """Fallback: the generic engine, one trace at a time."""

    def __init__(self, graph: BipartiteGraph, policy: sis.OrderPolicy, rule: sis.ChoiceRule):
        self.sampler = sis.get_sampler(graph, policy, rule)
        self.n = graph.n

    def run(self, rng: np.random.Generator, size: int):
        logt = np.zeros(size)
        perm = np.zeros((size, self.n), dtype=np.int32)
        for k in range(size):
            tr = self.sampler.sample(rng)
            logt[k] = tr.logT
            perm[k] = tr.matching
        return logt, perm

    def score(self, perm: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.sampler.conditional_log_weight(tuple(int(v) for v in row), rng) for row in perm])


def uniform_matchings(graph: BipartiteGraph, rng: np.random.Generator, size: int) -> np.ndarray:
    """Exactly uniform perfect matchings of a banded graph, one per row."""
    dp = bp.BandDP(graph)
    n, w, lo, hi = graph.n, dp.w, dp.lo, dp.hi
    if w > BandKernel.MAX_WIDTH:
        raise ValueError("bandwidth too large for uniform sampling")
    # completions from each mask, rescaled per level to stay in range
    cnt = np.zeros((n + 2, 1 << w))
    cnt[n + 1, dp.full] = 1.0
    for i in range(n, 0, -1):
        for mask in range(1 << w):
            cnt[i, mask] = sum(cnt[i + 1, m2] for _, m2 in dp.moves(i, mask))
        top = cnt[i].max()
        if top > 0:
            cnt[i] /= top
    perm = np.zeros((size, n), dtype=np.int32)
    mask = np.full(size, dp.initial_mask(), dtype=np.int64)
    rows = np.arange(size)
    for i in range(1, n + 1):
        ext = mask | (dp._missing(i + hi) << w)
        cands = np.asarray([j - (i - lo) for j in graph.nbrs(i)], dtype=np.int64)
        weight = np.zeros((size, cands.size))
        nxt = np.zeros((size, cands.size), dtype=np.int64)
        for k, b in enumerate(cands):
            e2 = ext | (1 << int(b))
            m2 = e2 >> 1
            ok = ((ext >> b) & 1 == 0) & ((e2 & 1) == 1)
            weight[:, k] = np.where(ok, cnt[i + 1, np.where(ok, m2, 0)], 0.0)
            nxt[:, k] = m2
        cum = np.cumsum(weight, axis=1)
        u = rng.random(size) * cum[:, -1]
        chosen = np.minimum((cum <= u[:, None]).sum(axis=1), cands.size - 1)
        perm[:, i - 1] = cands[chosen] + (i - lo)
        mask = nxt[rows, chosen]
    return perm


def _algo_name(family: bp.Family, policy: sis.OrderPolicy, rule: sis.ChoiceRule) -> Optional[str]:
    for name, pr in sis.algorithms_for(family).items():
        if pr == (policy, rule):
            return name
    return None


def make_kernel(graph: BipartiteGraph, policy: sis.OrderPolicy, rule: sis.ChoiceRule):
    """Fastest kernel that reproduces the requested sampler."""
    sis._compat(graph, policy, rule)
    fam = graph.family
    algo = _algo_name(fam, policy, rule)
    if algo is not None and fam.kind != "custom":
        spec = _chain_spec(fam.slug, algo)
        if spec is not None:
            return ChainKernel(graph, algo, spec)
    if fam.kind == "fib" and (
        policy == sis.RANDOM_CYCLE or (policy == sis.UNIFORM_RANDOM and fam.param == 1)
    ) and rule == sis.UNIFORM:
        return CycleKernel(graph, fam.param if policy == sis.RANDOM_CYCLE else 1)
    if policy == sis.FIXED and rule == sis.UNIFORM and bp.BandDP(graph).w <= BandKernel.MAX_WIDTH:
        return BandKernel(graph)
    return EngineKernel(graph, policy, rule)
