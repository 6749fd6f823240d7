"""Monte Carlo estimation and table reproduction.

Samples are split into fixed-size chunks by sample index.  Chunk ``k`` draws
from its own stream ``SeedSequence(seed, spawn_key=(k,))`` and chunk results
are merged in index order, so a report depends only on ``(seed, N,
chunk_size)`` and never on the number of workers.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import analytics as an
from . import bipartite as bp
from . import kernels, sis
from .bipartite import BipartiteGraph, Family
from .moments import moments

DEFAULT_CHUNK = 2048


# ------------------------------------------------------------ accumulator


@dataclass
class LogAccumulator:
    """Running sums of ``T`` and ``T^2`` kept relative to the largest ``log T``."""

    count: int = 0
    log_max: float = -math.inf
    s1: float = 0.0  # sum of exp(logT - log_max)
    s2: float = 0.0  # sum of exp(2 (logT - log_max))
    mean: float = 0.0  # of log T
    m2: float = 0.0  # sum of squared deviations of log T

    @classmethod
    def from_array(cls, logt: np.ndarray) -> "LogAccumulator":
        if logt.size == 0:
            return cls()
        mx = float(np.max(logt))
        e = np.exp(logt - mx)
        m = float(np.mean(logt))
        return cls(
            count=int(logt.size),
            log_max=mx,
            s1=math.fsum(e),
            s2=math.fsum(e * e),
            mean=m,
            m2=math.fsum((logt - m) ** 2),
        )

    def merge(self, other: "LogAccumulator") -> "LogAccumulator":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        mx = max(self.log_max, other.log_max)
        a, b = math.exp(self.log_max - mx), math.exp(other.log_max - mx)
        n = self.count + other.count
        d = other.mean - self.mean
        return LogAccumulator(
            count=n,
            log_max=mx,
            s1=self.s1 * a + other.s1 * b,
            s2=self.s2 * a * a + other.s2 * b * b,
            mean=self.mean + d * other.count / n,
            m2=self.m2 + other.m2 + d * d * self.count * other.count / n,
        )

    @property
    def log_mean_T(self) -> float:
        return self.log_max + math.log(self.s1 / self.count)

    @property
    def empirical_n_var(self) -> float:
        """``mean(T^2) / mean(T)^2`` from the sample."""
        return self.count * self.s2 / (self.s1 * self.s1)

    @property
    def rel_stderr(self) -> float:
        n = self.count
        if n < 2:
            return math.inf
        nv = self.empirical_n_var
        var_rel = max(nv - 1.0, 0.0) * n / (n - 1)  # Var(T) / mean(T)^2
        return math.sqrt(var_rel / n)

    @property
    def var_logT(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0


# ---------------------------------------------------------------- chunks


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def chunk_sizes(N: int, chunk_size: int) -> List[int]:
    full, rest = divmod(N, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


@lru_cache(maxsize=16)
def _kernel(graph: BipartiteGraph, policy: sis.OrderPolicy, rule: sis.ChoiceRule):
    return kernels.make_kernel(graph, policy, rule)


def draw_chunk(graph, policy, rule, seed: int, chunk: int, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """``(logT, matchings)`` for one chunk."""
    return _kernel(graph, policy, rule).run(chunk_rng(seed, chunk), size)


def _chunk_task(args) -> Tuple[LogAccumulator, Optional[np.ndarray]]:
    graph, policy, rule, seed, chunk, size, keep = args
    logt, _ = draw_chunk(graph, policy, rule, seed, chunk, size)
    return LogAccumulator.from_array(logt), (logt if keep else None)


def _run_chunks(graph, policy, rule, N, seed, workers, chunk_size, keep) -> Iterator[Tuple[LogAccumulator, Optional[np.ndarray]]]:
    tasks = [(graph, policy, rule, seed, k, size, keep) for k, size in enumerate(chunk_sizes(N, chunk_size))]
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield _chunk_task(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_chunk_task, tasks)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class EstimateReport:
    n: int
    family: str
    algorithm: str
    samples: int
    log_estimate: float
    rel_stderr: float
    mean_logT: float
    var_logT: float
    empirical_n_var: float
    unreliable: bool
    seed: int
    chunk_size: int
    wall_time: float = field(compare=False)

    @property
    def estimate(self) -> float:
        return math.exp(self.log_estimate)

    def as_dict(self, with_time: bool = True) -> dict:
        d = asdict(self)
        d["estimate"] = self.estimate
        if not with_time:
            del d["wall_time"]
        return d


def _check_n(N: int) -> None:
    if N < 1:
        raise ValueError("N must be at least 1")


def estimate_count(
    graph: BipartiteGraph,
    policy: sis.OrderPolicy,
    rule: sis.ChoiceRule = sis.UNIFORM,
    N: int = 1000,
    seed: int = 0,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    algorithm: str = "",
) -> EstimateReport:
    """Unbiased estimate of the number of perfect matchings."""
    report, _ = _estimate(graph, policy, rule, N, seed, workers, chunk_size, algorithm, keep=False)
    return report


def _estimate(graph, policy, rule, N, seed, workers, chunk_size, algorithm, keep):
    _check_n(N)
    t0 = time.perf_counter()
    acc = LogAccumulator()
    kept = []
    for part, logt in _run_chunks(graph, policy, rule, N, seed, workers, chunk_size, keep):
        acc = acc.merge(part)
        if keep:
            kept.append(logt)
    nv = acc.empirical_n_var
    report = EstimateReport(
        n=graph.n,
        family=str(graph.family),
        algorithm=algorithm or f"{policy.kind}/{rule.kind}",
        samples=acc.count,
        log_estimate=acc.log_mean_T,
        rel_stderr=acc.rel_stderr,
        mean_logT=acc.mean,
        var_logT=acc.var_logT,
        empirical_n_var=nv,
        unreliable=nv > N / 10,
        seed=seed,
        chunk_size=chunk_size,
        wall_time=time.perf_counter() - t0,
    )
    return report, (np.concatenate(kept) if keep else None)


def sample_log_weights(
    graph: BipartiteGraph,
    policy: sis.OrderPolicy,
    rule: sis.ChoiceRule,
    N: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """``log T`` of ``N`` traces in sample-index order."""
    _, logt = _estimate(graph, policy, rule, N, seed, workers, chunk_size, "", keep=True)
    return logt


@dataclass(frozen=True)
class StatisticEstimate:
    count_estimate: float
    ratio_estimate: float
    log_total_estimate: float  # log of the plain count estimate on the same traces


def estimate_statistic(
    graph: BipartiteGraph,
    policy: sis.OrderPolicy,
    rule: sis.ChoiceRule,
    predicate: Callable[[Tuple[int, ...]], bool],
    N: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK,
) -> StatisticEstimate:
    """Count form ``mean(delta T)`` and ratio form ``sum(delta T) / sum(T)``.

    Runs in-process so that ``predicate`` may be any callable.
    """
    _check_n(N)
    hit = LogAccumulator()
    total = LogAccumulator()
    for k, size in enumerate(chunk_sizes(N, chunk_size)):
        logt, perms = draw_chunk(graph, policy, rule, seed, k, size)
        mask = np.fromiter((bool(predicate(tuple(int(v) for v in row))) for row in perms), dtype=bool, count=size)
        total = total.merge(LogAccumulator.from_array(logt))
        hit = hit.merge(LogAccumulator.from_array(logt[mask]))
    if hit.count == 0:
        return StatisticEstimate(0.0, 0.0, total.log_mean_T)
    log_hit_sum = hit.log_max + math.log(hit.s1)
    log_tot_sum = total.log_max + math.log(total.s1)
    return StatisticEstimate(
        count_estimate=math.exp(log_hit_sum - math.log(N)),
        ratio_estimate=math.exp(log_hit_sum - log_tot_sum),
        log_total_estimate=log_tot_sum - math.log(N),
    )


# ------------------------------------------------------------ conveniences


def family_setup(family: Family, algo: str, n: int):
    """``(graph, policy, rule)`` for a named algorithm on a built-in family."""
    policy, rule = sis.resolve_algorithm(family, algo)
    return bp.make_family(family, n), policy, rule


def estimate_family(family: Family, algo: str, n: int, N: int, seed: int, workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> EstimateReport:
    graph, policy, rule = family_setup(family, algo, n)
    return estimate_count(graph, policy, rule, N, seed, workers, chunk_size, algorithm=algo)


def _uniform_task(args) -> np.ndarray:
    graph, policy, rule, seed, chunk, size = args
    rng = chunk_rng(seed, chunk)
    perm = kernels.uniform_matchings(graph, rng, size)
    return _kernel(graph, policy, rule).score(perm, rng)


def uniform_log_weights(
    graph: BipartiteGraph,
    policy: sis.OrderPolicy,
    rule: sis.ChoiceRule,
    N: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """``log T`` along ``N`` uniformly drawn matchings.

    Random orders draw a fresh uniform order per matching.  This is the law
    of ``log T`` under the uniform measure ``u`` that the limit theorems and
    the moment recurrences describe.
    """
    _check_n(N)
    tasks = [(graph, policy, rule, seed, k, size) for k, size in enumerate(chunk_sizes(N, chunk_size))]
    if workers <= 1 or len(tasks) <= 1:
        parts = [_uniform_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_uniform_task, tasks))
    return np.concatenate(parts)


def run_clt(
    family: Family, algo: str, n: int, N: int = 20_000, seed: int = 0, workers: int = 1, chunk_size: int = DEFAULT_CHUNK
) -> an.CltDiagnostics:
    """Normality diagnostics of ``log T`` under uniform ``pi`` against the pair's constants."""
    pair = an.closed_form_constants().pair(family.slug, algo)
    graph, policy, rule = family_setup(family, algo, n)
    logt = uniform_log_weights(graph, policy, rule, N, seed, workers, chunk_size)
    return an.clt_diagnostics(logt, pair.mu, math.sqrt(pair.sigma2), n)


def star_variance_sweep(family: Family, algo: str, ns: Sequence[int] = (100, 200, 400, 800, 1600)):
    """``(n, Var_u log T, E_u log T / n)`` for a tuned sampler."""
    from . import moments as mo

    if not sis.algorithms_for(family)[algo][1].tuned:
        raise ValueError(f"{algo!r} is not a tuned sampler")
    return mo.star_variance_sweep(family, algo, ns)


# ------------------------------------------------------------------ tables


@dataclass(frozen=True)
class Table:
    table_id: int
    mode: str
    ns: Tuple[int, ...]
    rows: Tuple[Tuple[str, Tuple[float, ...]], ...]

    def row(self, label: str) -> Tuple[float, ...]:
        for name, vals in self.rows:
            if name == label:
                return vals
        raise KeyError(label)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", *self.ns])
        for name, vals in self.rows:
            w.writerow([name, *(f"{v:.4g}" if isinstance(v, float) else str(v) for v in vals)])
        return buf.getvalue()


TABLE_LAYOUT = {
    2: (bp.FIB1, (200, 300, 500, 1000), ("random", "fixed", "greedy"), True),
    3: (bp.FIB2, (200, 300, 500, 1000), ("random", "fixed", "greedy"), False),
    4: (bp.DIST2, (200, 300, 400, 500), ("fixed",), False),
}
_SUFFIX = {"random": "r", "fixed": "f", "greedy": "g"}


def _label(kind: str, family: Family, algo: str) -> str:
    sub = _SUFFIX[algo] if family == bp.FIB1 else f"{{{_SUFFIX[algo]},2}}"
    return f"{kind}_{sub}"


def _log_n_var_exact(family: Family, algo: str, n: int) -> float:
    return moments(family, algo, n).log_n_var


def reproduce_table(table_id: int, mode: str = "exact") -> Table:
    """Required sample sizes at the tabulated sizes.

    ``mode="exact"`` uses finite-``n`` moments; ``mode="asymptotic"`` uses
    ``mu n + sigma sqrt(n) - log M_n`` and the singularity forms of ``N^v``.
    """
    if table_id not in TABLE_LAYOUT:
        raise ValueError(f"unknown table {table_id}")
    if mode not in ("exact", "asymptotic"):
        raise ValueError(f"unknown mode {mode!r}")
    family, ns, algos, with_nv = TABLE_LAYOUT[table_id]
    rows = []
    for algo in algos:
        if mode == "exact":
            ns_star = tuple(moments(family, algo, n).n_star for n in ns)
        else:
            ns_star = tuple(math.exp(an.log_n_star_asymptotic(family.slug, algo, n, bp.log_count(family, n))) for n in ns)
        rows.append((_label("N*", family, algo), ns_star))
        if with_nv:
            if mode == "exact":
                nv = tuple(math.exp(_log_n_var_exact(family, algo, n)) for n in ns)
            else:
                nv = tuple(an.nv_asymptotics(algo, n) for n in ns)
            rows.append((_label("N^v", family, algo), nv))
    rows.append(("n^7", tuple(float(n) ** 7 for n in ns)))
    count_label = {bp.FIB1: "F_{n,1}", bp.FIB2: "F_{n,2}", bp.DIST2: "D_{n,2}"}[family]
    rows.append((count_label, tuple(bp.family_count(family, n) for n in ns)))
    return Table(table_id, mode, ns, tuple(rows))
