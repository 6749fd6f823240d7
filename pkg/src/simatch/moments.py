"""Exact moments of the log importance weight.

For a sampler let ``x_n(t) = sum_pi E[T(pi)^t]``, the expectation running
over the sampler's order randomness with ``pi`` fixed.  Then ``x_n(0)`` is
the number of matchings, the first two ``t``-derivatives at 0 give the raw
moments of ``log T`` under the uniform distribution on matchings, and
``x_n(1)`` is ``E[T^2]`` under the sampling distribution.

Each algorithm is a recurrence in ``x_n``, either linear (a rational
generating function ``U/V``) or quadratic (random orders).  Recurrences run
over an abstract ring so the same code yields second-order jets at ``t = 0``,
floats at ``t = 1`` and exact rationals at ``t = 1``.

Values are stored rescaled as ``x_n * s^n`` where ``s`` is a jet carrying
both the growth rate of the count and an exponential tilt ``e^(-mu0 t)``.
The tilt keeps the variance free of cancellation for large ``n``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import bipartite as bp
from .bipartite import BipartiteGraph, Family
from .jet import Jet2, jet_convolve
from .limits import LimitExceededError, current_limits
from .analytics import GAMMA2, GAMMA2_PRIME, PHI, PHI2
from .sis import ChoiceRule, OrderPolicy, get_sampler


class UnknownRecurrenceError(KeyError):
    pass


# ----------------------------------------------------------------- rings


class JetRing:
    name = "jet"

    def lift(self, c: float) -> Jet2:
        return Jet2.lift(c)

    def const(self, k) -> Jet2:
        return Jet2.const(k)

    def new_seq(self, size: int) -> "JetSeq":
        return JetSeq(size)


class JetSeq:
    def __init__(self, size: int):
        self.items: List[Jet2] = [Jet2(0.0)] * size
        self.arr = np.zeros((size, 3))

    def __getitem__(self, k: int) -> Jet2:
        return self.items[k]

    def __setitem__(self, k: int, v: Jet2):
        self.items[k] = v
        self.arr[k] = (v.v0, v.v1, v.v2)

    def conv(self, m: int) -> Jet2:
        if m < 0:
            return Jet2(0.0)
        a = jet_convolve(self.arr, m)
        return Jet2(float(a[0]), float(a[1]), float(a[2]))


class FloatRing:
    """Evaluation at ``t = 1``."""

    name = "float"

    def lift(self, c: float) -> float:
        return float(c)

    def const(self, k) -> float:
        return float(k)

    def new_seq(self, size: int) -> "FloatSeq":
        return FloatSeq(size)


class FloatSeq:
    def __init__(self, size: int):
        self.arr = np.zeros(size)

    def __getitem__(self, k: int) -> float:
        return float(self.arr[k])

    def __setitem__(self, k: int, v: float):
        self.arr[k] = v

    def conv(self, m: int) -> float:
        if m < 0:
            return 0.0
        return float(self.arr[: m + 1] @ self.arr[m::-1])


class ExactRing:
    """Exact rational evaluation at ``t = 1``; only integer bases allowed."""

    name = "exact"

    def lift(self, c) -> Fraction:
        if isinstance(c, float) and not c.is_integer():
            raise ValueError("irrational base in exact mode")
        return Fraction(c)

    def const(self, k) -> Fraction:
        return Fraction(k)

    def new_seq(self, size: int) -> "ExactSeq":
        return ExactSeq(size)


class ExactSeq(list):
    def __init__(self, size: int):
        super().__init__([Fraction(0)] * size)

    def conv(self, m: int) -> Fraction:
        return sum((self[i] * self[m - i] for i in range(m + 1)), Fraction(0))


# ------------------------------------------------------------ recurrences


@dataclass(frozen=True)
class RationalGF:
    """``X = U / V`` with ``V[0] = 1``; coefficient lists are built per ring."""

    build: Callable  # ring -> (U list, V list)


@dataclass(frozen=True)
class Quadratic:
    run: Callable  # (ring, seq, N, s) -> None; fills seq[0..N]


def _gf_fixed_fib1(R):
    L2 = R.lift(2)
    return [R.const(1), 1 - L2], [R.const(1), -L2, -L2]


def _gf_greedy_fib1(R):
    L2, L3 = R.lift(2), R.lift(3)
    return [R.const(1), R.const(1), 2 * L2 - 2 * L3], [R.const(1), R.const(0), -2 * L3, -L3]


def _gf_fib_star_fixed(R):
    a = R.lift(PHI)
    return [R.const(1), 1 - a], [R.const(1), -a, -R.lift(PHI**2)]


def _gf_fib_star_greedy(R):
    b = R.lift(PHI**2)
    return [R.const(1), R.const(1), 2 * (R.lift(2) - b)], [R.const(1), R.const(0), -2 * b, -R.lift(PHI**3)]


def _gf_fixed_fib2(R):
    L2, L3 = R.lift(2), R.lift(3)
    return [R.const(1), 1 - L3, 2 * (L2 - L3)], [R.const(1), -L3, -L3, -L3]


def _gf_fib2_star_fixed(R):
    a, b, c = R.lift(PHI2), R.lift(PHI2**2), R.lift(PHI2**3)
    return [R.const(1), 1 - a, 2 * R.lift(2) - a - b], [R.const(1), -a, -b, -c]


def _gf_greedy_fib2(R):
    L9 = R.lift(9)
    u = [R.const(1), R.const(1), 2 * R.lift(2), 4 * R.lift(4) - 4 * L9, 7 * R.lift(7) - 7 * L9]
    v = [R.const(1), R.const(0), R.const(0), -4 * L9, -3 * L9, -2 * L9]
    return u, v


def _gf_fixed_dist2(R):
    L2, L3, L9, L27 = R.lift(2), R.lift(3), R.lift(9), R.lift(27)
    one = R.const(1)
    u = [
        one,
        -(L3 - 1),
        2 * L2 - (2 + L3) * L3,
        L3 * (4 * L2 - 1 - (2 + L3) * L3),
        2 * (L2 - L3) * L3 * (L3 - 1),
        -2 * (L2 - L3) * L9,
    ]
    w = L9 * (1 + L3)
    v = [one, -L3, -L3 * (1 + L3), -w, -w, L27, L27]
    return u, v


def _gf_dist2_star_fixed(R):
    g, gp = GAMMA2, GAMMA2_PRIME
    G = [R.lift(g**k) for k in range(7)]
    one = R.const(1)
    L2g, L2gp, Lggp = R.lift(2 * g), R.lift(2 / gp), R.lift(g / gp)
    L6 = R.lift(6)
    u = [
        one,
        1 - G[1],
        2 * R.lift(2) - G[1] - 2 * G[2],
        6 * L6 - 2 * L2g - 2 * G[2] - 2 * G[3],
        G[1] * (2 * L2gp + Lggp - 2 * L2g - G[3]),
        G[2] * (-6 * L6 + 2 * L2gp + 2 * L2g + Lggp + G[3]),
    ]
    v = [one, -G[1], -2 * G[2], -2 * G[3], -2 * G[4], G[5], G[6]]
    return u, v


def _run_random_fib1(R, x, N, s):
    # n x_n = 2(2^t - 3^t)(x_{n-1} + x_{n-2}) + 3^t (C_{n-1} + 2 C_{n-2})
    one = R.const(1)
    x[0] = one
    if N >= 1:
        x[1] = one * s
    a = 2 * (R.lift(2) - R.lift(3))
    b = R.lift(3)
    s2 = s * s
    for n in range(2, N + 1):
        lin = a * (x[n - 1] * s + x[n - 2] * s2)
        quad = b * (x.conv(n - 1) * s + 2 * x.conv(n - 2) * s2)
        x[n] = (lin + quad) / n


def _run_random_fib2(R, x, N, s):
    one = R.const(1)
    L2, L3, L4, L5, L6 = (R.lift(k) for k in (2, 3, 4, 5, 6))
    pw = [one]
    for _ in range(5):
        pw.append(pw[-1] * s)
    seeds = [one, one, 2 * L2, Fraction(4, 3) * (L3 * (1 + L2) + L4) if R.name == "exact" else (4 / 3) * (L3 * (1 + L2) + L4)]
    for k in range(min(N, 3) + 1):
        x[k] = seeds[k] * pw[k]
    a = 2 * (L3 - L6)
    b = 2 * (L5 - L6)
    for n in range(4, N + 1):
        lin = a * (x[n - 1] * pw[1] + x[n - 2] * pw[2] + x[n - 3] * pw[3])
        lin2 = b * (2 * x[n - 2] * pw[2] + 2 * x[n - 3] * pw[3] + x[n - 4] * pw[4])
        quad = L6 * (x.conv(n - 1) * pw[1] + 2 * x.conv(n - 2) * pw[2] + 3 * x.conv(n - 3) * pw[3])
        x[n] = (lin + lin2 + quad) / n


RECURRENCES: Dict[Tuple[str, str], object] = {
    ("fib1", "fixed"): RationalGF(_gf_fixed_fib1),
    ("fib1", "random"): Quadratic(_run_random_fib1),
    ("fib1", "greedy"): RationalGF(_gf_greedy_fib1),
    ("fib1", "fixed-star"): RationalGF(_gf_fib_star_fixed),
    ("fib1", "greedy-star"): RationalGF(_gf_fib_star_greedy),
    ("fib2", "fixed"): RationalGF(_gf_fixed_fib2),
    ("fib2", "random"): Quadratic(_run_random_fib2),
    ("fib2", "greedy"): RationalGF(_gf_greedy_fib2),
    ("fib2", "fixed-star"): RationalGF(_gf_fib2_star_fixed),
    ("dist2", "fixed"): RationalGF(_gf_fixed_dist2),
    ("dist2", "fixed-star"): RationalGF(_gf_dist2_star_fixed),
}

GF_IDS = {
    "FixedFib1": ("fib1", "fixed"),
    "FixedFib2": ("fib2", "fixed"),
    "FibStarFixed": ("fib1", "fixed-star"),
    "FibStarGreedy": ("fib1", "greedy-star"),
    "Fib2StarFixed": ("fib2", "fixed-star"),
    "Dist2Fixed": ("dist2", "fixed"),
    "Dist2StarFixed": ("dist2", "fixed-star"),
    "GreedyFib1": ("fib1", "greedy"),
    "GreedyFib2": ("fib2", "greedy"),
}


def _lookup(key: Tuple[str, str]):
    try:
        return RECURRENCES[key]
    except KeyError:
        raise UnknownRecurrenceError(f"no moment recurrence for {key[0]}/{key[1]}") from None


def has_recurrence(family: Family, algo: str) -> bool:
    return (family.slug, algo) in RECURRENCES


def _fill(rec, R, x, N: int, s) -> None:
    if isinstance(rec, Quadratic):
        rec.run(R, x, N, s)
        return
    u, v = rec.build(R)
    # scaled: xh_n = u_n s^n - sum_k v_k s^k xh_{n-k}
    spow = [R.const(1)]
    for _ in range(max(len(u), len(v))):
        spow.append(spow[-1] * s)
    vs = [v[k] * spow[k] for k in range(1, len(v))]
    for n in range(N + 1):
        acc = u[n] * spow[n] if n < len(u) else R.const(0)
        for k in range(1, min(n, len(v) - 1) + 1):
            acc = acc - vs[k - 1] * x[n - k]
        x[n] = acc


_PILOT = 40


@lru_cache(maxsize=None)
def _jet_scale(key: Tuple[str, str]) -> Tuple[float, float]:
    """Growth rate of the count and slope of the mean, from a short pilot."""
    R = JetRing()
    x = R.new_seq(_PILOT + 1)
    _fill(_lookup(key), R, x, _PILOT, R.const(1))
    a, b = x[_PILOT - 1], x[_PILOT]
    return b.v0 / a.v0, b.mean - a.mean


@lru_cache(maxsize=None)
def _float_scale(key: Tuple[str, str]) -> float:
    R = FloatRing()
    x = R.new_seq(_PILOT + 1)
    _fill(_lookup(key), R, x, _PILOT, 1.0)
    return x[_PILOT] / x[_PILOT - 1]


def _bucket(n: int) -> int:
    return max(64, 1 << (n.bit_length()))


@lru_cache(maxsize=64)
def _jet_table(key: Tuple[str, str], N: int):
    g, mu0 = _jet_scale(key)
    s = Jet2(1 / g, -mu0 / g, mu0 * mu0 / g)
    R = JetRing()
    x = R.new_seq(N + 1)
    _fill(_lookup(key), R, x, N, s)
    return x.arr.copy(), g, mu0


@lru_cache(maxsize=64)
def _float_table(key: Tuple[str, str], N: int):
    g = _float_scale(key)
    R = FloatRing()
    x = R.new_seq(N + 1)
    _fill(_lookup(key), R, x, N, 1 / g)
    return x.arr.copy(), g


def jet_values(key: Tuple[str, str], n: int) -> Tuple[float, float, float]:
    """``(log x_n(0), E_u log T, Var_u log T)`` from the jet recurrence."""
    arr, g, mu0 = _jet_table(key, _bucket(n))
    v0, v1, v2 = arr[n]
    m = v1 / v0
    return float(math.log(v0) + n * math.log(g)), float(m + mu0 * n), float(v2 / v0 - m * m)


def log_second_moment(key: Tuple[str, str], n: int) -> float:
    """``log E[T^2]`` under the sampling distribution (the ``t = 1`` value)."""
    arr, g = _float_table(key, _bucket(n))
    return math.log(arr[n]) + n * math.log(g)


def second_moment_exact(family: Family, algo: str, n: int) -> Fraction:
    """``E[T^2]`` as an exact rational (uniform rules only)."""
    key = (family.slug, algo)
    if n > current_limits().exact_n:
        raise LimitExceededError(f"exact mode limited to n <= {current_limits().exact_n}")
    R = ExactRing()
    x = R.new_seq(n + 1)
    _fill(_lookup(key), R, x, n, Fraction(1))
    return x[n]


# --------------------------------------------------------------- reports


@dataclass(frozen=True)
class MomentReport:
    n: int
    family: str
    algorithm: str
    count: int
    mean: float
    variance: float
    log_second_moment: float
    source: str = "recurrence"

    @property
    def log_count(self) -> float:
        return math.log(self.count)

    @property
    def L(self) -> float:
        return self.mean - self.log_count

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    @property
    def log_n_star(self) -> float:
        return self.L + self.sigma

    @property
    def n_star(self) -> float:
        return math.exp(self.log_n_star)

    @property
    def log_n_var(self) -> float:
        return self.log_second_moment - 2 * self.log_count

    @property
    def n_var(self) -> float:
        return math.exp(self.log_n_var)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(
            log_count=self.log_count,
            L=self.L,
            sigma=self.sigma,
            n_star=self.n_star,
            n_var=self.n_var,
        )
        return d


def moments(family: Family, algo: str, n: int) -> MomentReport:
    """Exact moment report from the algorithm's recurrence."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    key = (family.slug, algo)
    _, mean, var = jet_values(key, n)
    return MomentReport(
        n=n,
        family=str(family),
        algorithm=algo,
        count=bp.family_count(family, n),
        mean=mean,
        variance=var,
        log_second_moment=log_second_moment(key, n),
    )


def moments_fixed_fib1(n: int) -> MomentReport:
    return moments(bp.FIB1, "fixed", n)


def moments_random_fib1(n: int) -> MomentReport:
    return moments(bp.FIB1, "random", n)


def moments_greedy_fib1(n: int) -> MomentReport:
    return moments(bp.FIB1, "greedy", n)


def moments_random_fib2(n: int) -> MomentReport:
    return moments(bp.FIB2, "random", n)


def moments_from_gf(gf_id: str, n: int) -> MomentReport:
    if gf_id not in GF_IDS:
        raise UnknownRecurrenceError(f"unknown generating function {gf_id!r}")
    slug, algo = GF_IDS[gf_id]
    fam = {"fib1": bp.FIB1, "fib2": bp.FIB2, "dist2": bp.DIST2}[slug]
    return moments(fam, algo, n)


def slopes(family: Family, algo: str, n: int) -> Tuple[float, float]:
    """``(E(n) - E(n-1), V(n) - V(n-1))``."""
    key = (family.slug, algo)
    _, m1, v1 = jet_values(key, n)
    _, m0, v0 = jet_values(key, n - 1)
    return m1 - m0, v1 - v0


# ------------------------------------------------------------ exhaustive


def exhaustive_moments(
    graph: BipartiteGraph, policy: OrderPolicy, rule: ChoiceRule, algorithm: str = "", exact: Optional[bool] = None
) -> MomentReport:
    """Moments by enumerating every matching and every decision path.

    For a random order the weight of ``pi`` is averaged over orders, the same
    quantity the recurrences track.
    """
    limit = current_limits().exhaustive
    if exact is None:
        exact = not rule.tuned and graph.n <= current_limits().exact_n
    smp = get_sampler(graph, policy, rule, exact)
    total = Jet2(0.0)
    second = Fraction(0) if exact else 0.0
    count = 0
    for pi in bp.enumerate_matchings(graph, limit=limit):
        count += 1
        total = total + smp.weight_expectation(pi, lambda p: Jet2.lift(1 / float(p)), Jet2(1.0))
        second += smp.weight_expectation(pi, lambda p: 1 / p, Fraction(1) if exact else 1.0)
    return MomentReport(
        n=graph.n,
        family=str(graph.family),
        algorithm=algorithm or f"{policy.kind}/{rule.kind}",
        count=count,
        mean=total.mean,
        variance=total.variance,
        log_second_moment=math.log(second),
        source="exhaustive",
    )


def exhaustive_second_moment(graph: BipartiteGraph, policy: OrderPolicy, rule: ChoiceRule):
    """``E[T^2]`` by enumeration; exact rational for uniform rules."""
    exact = not rule.tuned
    smp = get_sampler(graph, policy, rule, exact)
    one = Fraction(1) if exact else 1.0
    return sum(
        (smp.weight_expectation(pi, lambda p: 1 / p, one) for pi in bp.enumerate_matchings(graph)),
        Fraction(0) if exact else 0.0,
    )


def star_variance_sweep(family: Family, algo: str, ns: Sequence[int]) -> List[Tuple[int, float, float]]:
    """``(n, Var_u log T, E_u log T / n)`` along a grid of sizes."""
    out = []
    for n in ns:
        _, m, v = jet_values((family.slug, algo), n)
        out.append((n, v, m / n))
    return out
