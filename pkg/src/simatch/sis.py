"""Sequential importance samplers for perfect matchings.

A sampler is an order policy (which left vertex to decide next) paired with
a choice rule (how to weight the allowable options).  Both are described by
small immutable values; :class:`Sampler` turns a pair into a *menu* for each
partial state and drives sampling, exact path probabilities and trace-weight
moments from that single description.

State convention: a tuple ``s`` of length ``n`` with ``s[i-1]`` the right
partner of left ``i`` or ``0`` when undetermined.  After every choice the
engine assigns all forced lefts (a single allowable option) at no cost.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import bipartite as bp
from .analytics import GAMMA2, GAMMA2_PRIME, PHI, PHI2
from .bipartite import BipartiteGraph, Family, GraphError

log = logging.getLogger(__name__)

State = Tuple[int, ...]
Assignment = Tuple[Tuple[int, int], ...]
Prob = Union[Fraction, float]


class UnsupportedCombinationError(ValueError):
    """The (graph family, policy, rule) triple has no sampler."""


# ------------------------------------------------------------------ values


@dataclass(frozen=True)
class OrderPolicy:
    kind: str
    sequence: Tuple[int, ...] = ()

    KINDS = ("fixed", "uniform-random", "greedy-fib1", "greedy-cycle-fib2", "random-cycle", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown order policy {self.kind!r}")

    @property
    def is_random(self) -> bool:
        return self.kind in ("uniform-random", "random-cycle")


FIXED = OrderPolicy("fixed")
UNIFORM_RANDOM = OrderPolicy("uniform-random")
GREEDY_FIB1 = OrderPolicy("greedy-fib1")
GREEDY_CYCLE_FIB2 = OrderPolicy("greedy-cycle-fib2")
RANDOM_CYCLE = OrderPolicy("random-cycle")


def explicit(sequence: Sequence[int]) -> OrderPolicy:
    return OrderPolicy("explicit", tuple(sequence))


@dataclass(frozen=True)
class ChoiceRule:
    kind: str

    KINDS = ("uniform", "fib-star-fixed", "fib-star-greedy", "fib2-star-fixed", "dist2-star-fixed")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown choice rule {self.kind!r}")

    @property
    def tuned(self) -> bool:
        return self.kind != "uniform"


UNIFORM = ChoiceRule("uniform")
FIB_STAR_FIXED = ChoiceRule("fib-star-fixed")
FIB_STAR_GREEDY = ChoiceRule("fib-star-greedy")
FIB2_STAR_FIXED = ChoiceRule("fib2-star-fixed")
DIST2_STAR_FIXED = ChoiceRule("dist2-star-fixed")


# ------------------------------------------------------------ tuned tables


@dataclass(frozen=True)
class StarTables:
    fib_fixed: Tuple[float, float]  # pi(i) = i, i+1
    fib_greedy: Tuple[float, float, float]  # pi(m+1) = m, m+1, m+2
    fib2_fixed: Tuple[float, float, float]  # pi(i) = i, i+1, i+2
    dist2_case1: Tuple[float, ...]
    dist2_case2: Tuple[float, ...]


def _normalized(name: str, probs: Sequence[float]) -> Tuple[float, ...]:
    s = math.fsum(probs)
    if abs(s - 1.0) > 1e-12:
        log.warning("table %s sums to %.17g; renormalizing", name, s)
        return tuple(p / s for p in probs)
    return tuple(probs)


@lru_cache(maxsize=None)
def star_rule_tables() -> StarTables:
    g, gp = GAMMA2, GAMMA2_PRIME
    return StarTables(
        fib_fixed=_normalized("fib_fixed", (1 / PHI, 1 / PHI**2)),
        fib_greedy=_normalized("fib_greedy", (1 / PHI**2, 1 / PHI**2, 1 / PHI**3)),
        fib2_fixed=_normalized("fib2_fixed", (1 / PHI2, 1 / PHI2**2, 1 / PHI2**3)),
        dist2_case1=_normalized("dist2_case1", (1 / g, gp, gp / g, 1 / g**3, 1 / g**4)),
        dist2_case2=_normalized("dist2_case2", (1 / (gp * g**2), 1 / (gp * g**3), 1 / g**2)),
    )


# --------------------------------------------------------------- traces


@dataclass(frozen=True)
class Step:
    index: str  # left index or block label that was decided
    options: Tuple[str, ...]  # labels of every option offered
    chosen: str
    prob: float


@dataclass(frozen=True)
class DecisionTrace:
    matching: Tuple[int, ...]
    steps: Tuple[Step, ...]
    logT: float

    def to_line(self) -> str:
        steps = ";".join(f"{s.index}>{s.chosen}[{','.join(s.options)}]@{s.prob:.17g}" for s in self.steps)
        return f"{' '.join(map(str, self.matching))}\t{self.logT:.17g}\t{steps}"

    @classmethod
    def from_line(cls, line: str) -> "DecisionTrace":
        perm, logt, steps = line.rstrip("\n").split("\t")
        out = []
        for item in filter(None, steps.split(";")):
            head, prob = item.rsplit("@", 1)
            idx, rest = head.split(">", 1)
            chosen, opts = rest.split("[", 1)
            out.append(Step(idx, tuple(filter(None, opts.rstrip("]").split(","))), chosen, float(prob)))
        return cls(tuple(int(x) for x in perm.split()), tuple(out), float(logt))


# --------------------------------------------------------------- helpers


def undetermined(state: State) -> List[int]:
    return [i for i, v in enumerate(state, start=1) if v == 0]


def _as_partial(state: State) -> Dict[int, int]:
    return {i: v for i, v in enumerate(state, start=1) if v}


def greedy_next_index(state: State) -> int:
    """Pivot of the Fibonacci(1) greedy order: the second smallest
    undetermined index, or the last one when only one remains."""
    free = undetermined(state)
    if not free:
        raise GraphError("state is complete")
    m = free[0]
    return m if m == len(state) else m + 1


def free_interval(state: State, i: int) -> Tuple[int, int]:
    a = b = i
    while a > 1 and state[a - 2] == 0:
        a -= 1
    while b < len(state) and state[b] == 0:
        b += 1
    return a, b


def span_assignment(p: int, q: int) -> Assignment:
    """The cycle on ``[p, q]`` with ``pi(p) = q`` and ``pi(j) = j - 1``."""
    return ((p, q),) + tuple((j, j - 1) for j in range(p + 1, q + 1))


def cycle_spans(state: State, i: int, t: int) -> List[Tuple[int, int]]:
    a, b = free_interval(state, i)
    return [(p, q) for p in range(max(a, i - t), i + 1) for q in range(i, min(b, p + t) + 1)]


def cycle_options_fib2(state: State, i: int) -> List[Tuple[int, int]]:
    """Cycle spans of length at most 3 through ``i`` that fit its free interval."""
    if state[i - 1]:
        raise GraphError(f"left {i} already determined")
    return cycle_spans(state, i, 2)


def fib2_block_menu(m: int) -> List[Tuple[Assignment, int]]:
    """The nine prefix block structures decided at pivot ``m + 2``.

    Each entry lists the assignment and its length; lengths 3/4/5 occur
    4/3/2 times.
    """
    menu: List[Tuple[Assignment, int]] = []
    p = m + 2
    heads = {0: [()], 1: [span_assignment(m, m)], 2: [span_assignment(m, m) + span_assignment(m + 1, m + 1), span_assignment(m, m + 1)]}
    for start in (m, m + 1, m + 2):
        for q in range(p, start + 3):
            for head in heads[start - m]:
                menu.append((head + span_assignment(start, q), q - m + 1))
    return menu


def _label(assign: Assignment) -> str:
    return "+".join(f"{i}:{j}" for i, j in assign)


# ---------------------------------------------------------------- engine


Menu = List[Tuple[Prob, str, List[Tuple[Assignment, Prob]]]]


def _compat(graph: BipartiteGraph, policy: OrderPolicy, rule: ChoiceRule) -> None:
    fam = graph.family
    need = {
        "greedy-fib1": bp.FIB1,
        "greedy-cycle-fib2": bp.FIB2,
    }
    if policy.kind in need and fam != need[policy.kind]:
        raise UnsupportedCombinationError(f"{policy.kind} order needs {need[policy.kind]}, got {fam}")
    if policy.kind == "random-cycle" and fam.kind != "fib":
        raise UnsupportedCombinationError("random-cycle order needs a Fibonacci family")
    if policy.kind in ("random-cycle", "greedy-cycle-fib2") and rule.tuned:
        raise UnsupportedCombinationError(f"{policy.kind} supports only the uniform rule")
    rule_needs = {
        "fib-star-fixed": (bp.FIB1, "fixed"),
        "fib-star-greedy": (bp.FIB1, "greedy-fib1"),
        "fib2-star-fixed": (bp.FIB2, "fixed"),
        "dist2-star-fixed": (bp.DIST2, "fixed"),
    }
    if rule.kind in rule_needs:
        f, p = rule_needs[rule.kind]
        if fam != f or policy.kind != p:
            raise UnsupportedCombinationError(f"rule {rule.kind} needs {f} with {p} order")
    if policy.kind == "explicit":
        if sorted(policy.sequence) != list(range(1, graph.n + 1)):
            raise ValueError("explicit order must be a permutation of 1..n")


APPLY_CACHE_MAX_N = 24


class Sampler:
    """Menus, sampling and exact path probabilities for one sampler."""

    def __init__(self, graph: BipartiteGraph, policy: OrderPolicy, rule: ChoiceRule = UNIFORM, exact: bool = False):
        _compat(graph, policy, rule)
        if exact and rule.tuned:
            raise ValueError("tuned rules have irrational probabilities; exact mode unavailable")
        self.graph = graph
        self.policy = policy
        self.rule = rule
        self.exact = exact
        self.n = graph.n
        self._menus: Dict[State, Menu] = {}
        # exhaustive passes on small graphs revisit transitions many times
        self._applied: Optional[Dict[Tuple[State, Assignment], State]] = {} if graph.n <= APPLY_CACHE_MAX_N else None
        self._local = graph.interval_monotone
        self._w = max(graph.bandwidth, 1)

    # -- probabilities
    def _p(self, num: int, den: int) -> Prob:
        return Fraction(num, den) if self.exact else num / den

    # -- state transitions
    def options(self, state: State, i: int) -> List[int]:
        return bp.allowable_options(self.graph, _as_partial(state), i)

    def apply(self, state: State, assign: Assignment) -> State:
        cache = self._applied
        if cache is not None:
            hit = cache.get((state, assign))
            if hit is not None:
                return hit
        s = list(state)
        for i, j in assign:
            s[i - 1] = j
        out = self.propagate(tuple(s), assign)
        if cache is not None:
            cache[(state, assign)] = out
        return out

    def propagate(self, state: State, touched: Assignment = ()) -> State:
        """Assign every forced left vertex until none remains."""
        s = list(state)
        n, w = self.n, self._w
        if self._local and touched:
            work = set()
            for i, j in touched:
                work.update(range(max(1, min(i, j) - 2 * w), min(n, max(i, j) + 2 * w) + 1))
        else:
            work = set(range(1, n + 1))
        while work:
            i = min(work)
            work.discard(i)
            if s[i - 1]:
                continue
            opts = bp.allowable_options(self.graph, _as_partial(tuple(s)), i)
            if not opts:
                raise GraphError(f"no allowable option for left {i}")
            if len(opts) == 1:
                s[i - 1] = opts[0]
                if self._local:
                    j = opts[0]
                    work.update(range(max(1, min(i, j) - 2 * w), min(n, max(i, j) + 2 * w) + 1))
                else:
                    work = set(range(1, n + 1))
        return tuple(s)

    def initial_state(self) -> State:
        return self.propagate((0,) * self.n)

    # -- menu construction
    def menu(self, state: State) -> Menu:
        m = self._menus.get(state)
        if m is None:
            m = self._build_menu(state)
            self._menus[state] = m
        return m

    def _uniform_options(self, state: State, i: int) -> List[Tuple[Assignment, Prob]]:
        opts = self.options(state, i)
        return [(((i, j),), self._p(1, len(opts))) for j in opts]

    def _indexed(self, state: State, i: int) -> List[Tuple[Assignment, Prob]]:
        kind = self.rule.kind
        tab = star_rule_tables()
        if kind == "uniform":
            return self._uniform_options(state, i)
        opts = self.options(state, i)
        if kind == "fib-star-fixed" and opts == [i, i + 1]:
            return [(((i, j),), p) for j, p in zip(opts, tab.fib_fixed)]
        if kind == "fib2-star-fixed" and opts == [i, i + 1, i + 2]:
            return [(((i, j),), p) for j, p in zip(opts, tab.fib2_fixed)]
        if kind == "fib-star-greedy" and len(opts) == 3:
            return [(((i, j),), p) for j, p in zip(opts, tab.fib_greedy)]
        return self._uniform_options(state, i)

    def _dist2_star(self, state: State) -> List[Tuple[Assignment, Prob]]:
        free = undetermined(state)
        p = free[0] - 1
        r = self.n - p
        used = {v for v in state if v}
        assert all(state[k] == 0 for k in range(p, self.n)), "non-prefix state"
        tab = star_rule_tables()
        case1 = all(k in used for k in range(1, p + 1))
        case2 = p >= 1 and p not in used and (p + 1) in used and all(k in used for k in range(1, p))
        if case1 and r >= 4:
            moves = [
                ((p + 1, p + 1),),
                ((p + 1, p + 2),),
                ((p + 1, p + 3), (p + 2, p + 1)),
                ((p + 1, p + 3), (p + 2, p + 2), (p + 3, p + 1)),
                ((p + 1, p + 3), (p + 2, p + 4), (p + 3, p + 1), (p + 4, p + 2)),
            ]
            return list(zip(moves, tab.dist2_case1))
        if case2 and r >= 3:
            moves = [
                ((p + 1, p),),
                ((p + 1, p + 2), (p + 2, p)),
                ((p + 1, p + 3), (p + 2, p)),
            ]
            return list(zip(moves, tab.dist2_case2))
        return self._uniform_options(state, p + 1)

    def _build_menu(self, state: State) -> Menu:
        free = undetermined(state)
        if not free:
            return []
        kind = self.policy.kind
        if kind == "fixed":
            i = free[0]
            if self.rule.kind == "dist2-star-fixed":
                return [(self._p(1, 1), str(i), self._dist2_star(state))]
            return [(self._p(1, 1), str(i), self._indexed(state, i))]
        if kind == "explicit":
            i = next(k for k in self.policy.sequence if state[k - 1] == 0)
            return [(self._p(1, 1), str(i), self._indexed(state, i))]
        if kind == "greedy-fib1":
            i = greedy_next_index(state)
            if self.rule.kind == "fib-star-greedy" and len(free) == 2:
                return [(self._p(1, 1), str(i), self._uniform_options(state, i))]
            return [(self._p(1, 1), str(i), self._indexed(state, i))]
        if kind in ("uniform-random", "random-cycle"):
            k = len(free)
            return [(self._p(1, k), str(i), self._random_entry(state, i)) for i in free]
        if kind == "greedy-cycle-fib2":
            m = free[0]
            if len(free) <= 4:
                tails = self._tail_completions(state)
                return [(self._p(1, 1), f"{m}..{self.n}", [(a, self._p(1, len(tails))) for a in tails])]
            menu = fib2_block_menu(m)
            return [(self._p(1, 1), str(m + 2), [(a, self._p(1, len(menu))) for a, _ in menu])]
        raise AssertionError(kind)

    def _random_entry(self, state: State, i: int) -> List[Tuple[Assignment, Prob]]:
        if self.policy.kind == "uniform-random":
            return self._uniform_options(state, i)
        spans = cycle_spans(state, i, self.graph.family.param)
        return [(span_assignment(a, b), self._p(1, len(spans))) for a, b in spans]

    def _tail_completions(self, state: State) -> List[Assignment]:
        free = undetermined(state)
        out = []
        partial = _as_partial(state)

        def rec(k: int, acc: List[Tuple[int, int]]):
            if k == len(free):
                out.append(tuple(acc))
                return
            i = free[k]
            for j in bp.allowable_options(self.graph, partial, i):
                partial[i] = j
                acc.append((i, j))
                rec(k + 1, acc)
                acc.pop()
                del partial[i]

        rec(0, [])
        return out

    # -- sampling
    def sample(self, rng: np.random.Generator) -> DecisionTrace:
        state = self.initial_state()
        steps: List[Step] = []
        logt = 0.0
        while True:
            if self.policy.is_random:
                # pick the index first so only its options are built
                free = undetermined(state)
                if not free:
                    break
                i = free[int(rng.integers(len(free)))]
                label, opts = str(i), self._random_entry(state, i)
            else:
                menu = self.menu(state)
                if not menu:
                    break
                k = 0 if len(menu) == 1 else _pick(rng, [float(p) for p, _, _ in menu])
                _, label, opts = menu[k]
            c = _pick(rng, [float(p) for _, p in opts])
            assign, p = opts[c]
            logt -= math.log(float(p))
            steps.append(Step(label, tuple(_label(a) for a, _ in opts), _label(assign), float(p)))
            state = self.apply(state, assign)
        return DecisionTrace(state, tuple(steps), logt)

    def conditional_log_weight(self, pi: Sequence[int], rng: np.random.Generator) -> float:
        """``log T`` of one run that is forced to produce ``pi``.

        Random orders draw the index sequence afresh; the choice at each step
        is the option consistent with ``pi``.
        """
        if not self.policy.is_random:
            return -math.log(float(self.path_probability(pi)))
        if not self.graph.is_matching(pi):
            raise GraphError(f"{tuple(pi)} is not a perfect matching")
        state = self.initial_state()
        logt = 0.0
        while True:
            free = undetermined(state)
            if not free:
                return logt
            i = free[int(rng.integers(len(free)))]
            opts = self._random_entry(state, i)
            assign, p = next((a, p) for a, p in opts if self._consistent(a, pi))
            logt -= math.log(float(p))
            state = self.apply(state, assign)

    # -- exact evaluation along a fixed matching
    def _consistent(self, assign: Assignment, pi: Sequence[int]) -> bool:
        return all(pi[i - 1] == j for i, j in assign)

    def path_probability(self, pi: Sequence[int]) -> Prob:
        """Exact probability that the sampler outputs ``pi``."""
        pi = tuple(pi)
        if not self.graph.is_matching(pi):
            raise GraphError(f"{pi} is not a perfect matching")
        memo: Dict[State, Prob] = {}

        def rec(state: State) -> Prob:
            if state in memo:
                return memo[state]
            menu = self.menu(state)
            if not menu:
                return self._p(1, 1)
            total = self._p(0, 1)
            for pidx, _, opts in menu:
                for assign, p in opts:
                    if self._consistent(assign, pi):
                        total += pidx * p * rec(self.apply(state, assign))
            memo[state] = total
            return total

        start = self.initial_state()
        if any(v and v != pi[i] for i, v in enumerate(start)):
            return self._p(0, 1)
        return rec(start)

    def weight_expectation(self, pi: Sequence[int], lift: Callable[[Prob], object], one):
        """``E[lift(p_1) * lift(p_2) * ...]`` over decision paths producing ``pi``.

        The expectation is over the order only: index probabilities weight
        the paths, while each option probability ``p`` enters through
        ``lift`` (e.g. ``Jet2.lift(1/p)`` for trace-weight moments).
        """
        pi = tuple(pi)
        memo: Dict[State, object] = {}

        def rec(state: State):
            if state in memo:
                return memo[state]
            menu = self.menu(state)
            if not menu:
                return one
            total = None
            for pidx, _, opts in menu:
                for assign, p in opts:
                    if self._consistent(assign, pi):
                        term = lift(p) * rec(self.apply(state, assign)) * pidx
                        total = term if total is None else total + term
            memo[state] = total
            return total

        return rec(self.initial_state())

    def outcomes(self, state: State) -> List[Tuple[State, float, float]]:
        """Every ``(final state, path probability, log weight)`` from ``state``."""
        out: List[Tuple[State, float, float]] = []

        def rec(st: State, prob: float, logt: float):
            menu = self.menu(st)
            if not menu:
                out.append((st, prob, logt))
                return
            for pidx, _, opts in menu:
                for assign, p in opts:
                    rec(self.apply(st, assign), prob * float(pidx) * float(p), logt - math.log(float(p)))

        rec(state, 1.0, 0.0)
        return out


def _pick(rng: np.random.Generator, probs: Sequence[float]) -> int:
    u = rng.random() * math.fsum(probs)
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k
    return len(probs) - 1


@lru_cache(maxsize=64)
def get_sampler(graph: BipartiteGraph, policy: OrderPolicy, rule: ChoiceRule = UNIFORM, exact: bool = False) -> Sampler:
    return Sampler(graph, policy, rule, exact)


def sample(graph: BipartiteGraph, policy: OrderPolicy, rule: ChoiceRule, rng: np.random.Generator) -> DecisionTrace:
    return get_sampler(graph, policy, rule).sample(rng)


def path_probability(
    graph: BipartiteGraph, policy: OrderPolicy, rule: ChoiceRule, pi: Sequence[int], exact: bool = False
) -> Prob:
    return get_sampler(graph, policy, rule, exact).path_probability(pi)


# --------------------------------------------------------- algorithm names

ALGORITHMS: Dict[Tuple[str, int], Dict[str, Tuple[OrderPolicy, ChoiceRule]]] = {
    ("fib", 1): {
        "fixed": (FIXED, UNIFORM),
        "random": (UNIFORM_RANDOM, UNIFORM),
        "greedy": (GREEDY_FIB1, UNIFORM),
        "fixed-star": (FIXED, FIB_STAR_FIXED),
        "greedy-star": (GREEDY_FIB1, FIB_STAR_GREEDY),
    },
    ("fib", 2): {
        "fixed": (FIXED, UNIFORM),
        "random": (RANDOM_CYCLE, UNIFORM),
        "greedy": (GREEDY_CYCLE_FIB2, UNIFORM),
        "fixed-star": (FIXED, FIB2_STAR_FIXED),
    },
    ("dist", 2): {
        "fixed": (FIXED, UNIFORM),
        "random": (UNIFORM_RANDOM, UNIFORM),
        "fixed-star": (FIXED, DIST2_STAR_FIXED),
    },
}

GENERIC_ALGORITHMS = {"fixed": (FIXED, UNIFORM), "random": (UNIFORM_RANDOM, UNIFORM)}


def algorithms_for(family: Family) -> Dict[str, Tuple[OrderPolicy, ChoiceRule]]:
    return ALGORITHMS.get((family.kind, family.param), GENERIC_ALGORITHMS)


def resolve_algorithm(family: Family, algo: str) -> Tuple[OrderPolicy, ChoiceRule]:
    table = algorithms_for(family)
    if algo not in table:
        raise UnsupportedCombinationError(
            f"algorithm {algo!r} unavailable for {family}; choose from {sorted(table)}"
        )
    return table[algo]
