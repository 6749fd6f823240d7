"""Command line interface: ``simatch <command> [flags]``.

Exit codes: 0 success, 2 validation error, 3 computation limit exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Optional, Sequence

from . import analytics as an
from . import bipartite as bp
from . import experiments as ex
from . import moments as mo
from . import sis
from .limits import LimitExceededError, current_limits

ALGOS = ("fixed", "random", "greedy", "fixed-star", "greedy-star")


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    family: Optional[str] = None
    param: Optional[int] = None
    graph_file: Optional[str] = None
    algorithm: Optional[str] = None
    n: Optional[int] = None
    samples: Optional[int] = None
    seed: Optional[int] = None
    workers: Optional[int] = None
    format: str = "text"
    exact: bool = False
    asymptotic: bool = False
    table_id: Optional[int] = None


# ---------------------------------------------------------------- formatting


def fmt_real(x: float) -> str:
    return repr(float(x)) if not math.isfinite(x) else f"{x:.17g}"


def fmt_sci(x) -> str:
    """Four significant digits; exact for integers of any size."""
    if isinstance(x, int) and x.bit_length() > 1000:
        return f"{Decimal(x):.3e}"
    return f"{float(x):.3e}"


def _plain(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        return float(fmt_real(v))
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return str(v)


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return fmt_real(v)
    return str(v)


def emit(cfg: RunConfig, record: dict, out) -> None:
    """Write ``record`` with the config echoed, in the requested format."""
    conf = {k: v for k, v in asdict(cfg).items() if v not in (None, False)}
    if cfg.format == "json":
        out.write(json.dumps({"config": _plain(conf), **_plain(record)}, sort_keys=False) + "\n")
    elif cfg.format == "csv":
        row = {**{f"config.{k}": v for k, v in conf.items()}, **record}
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(row))
        w.writerow([_csv_cell(v) for v in row.values()])
    else:
        out.write("# " + " ".join(f"{k}={v}" for k, v in conf.items()) + "\n")
        for k, v in record.items():
            out.write(f"{k}: {_csv_cell(v)}\n")


# ------------------------------------------------------------------ parsing


def _family(args) -> bp.Family:
    if args.family == "fib":
        return bp.Family("fib", args.t if args.t is not None else 1)
    if args.family == "dist":
        return bp.Family("dist", args.d if args.d is not None else 2)
    raise ValidationError("--family is required unless --graph is given")


def _graph(args):
    if getattr(args, "graph", None):
        with open(args.graph) as fh:
            return bp.load_graph(fh.read())
    if args.n is None:
        raise ValidationError("--n is required")
    if args.n < 0:
        raise ValidationError("--n must be nonnegative")
    return bp.make_family(_family(args), args.n)


def _config(args, **extra) -> RunConfig:
    fam = param = None
    if getattr(args, "family", None):
        fam = args.family
        param = args.t if args.family == "fib" else args.d
        if param is None:
            param = 1 if fam == "fib" else 2
    return RunConfig(
        command=args.command,
        family=fam,
        param=param,
        graph_file=getattr(args, "graph", None),
        algorithm=getattr(args, "algo", None),
        n=getattr(args, "n", None),
        samples=getattr(args, "samples", None),
        seed=getattr(args, "seed", None),
        workers=getattr(args, "workers", None),
        format=args.format,
        exact=getattr(args, "exact", False),
        asymptotic=getattr(args, "asymptotic", False),
        table_id=getattr(args, "id", None),
        **extra,
    )


def _check_exact(args, graph_n: int, rule: Optional[sis.ChoiceRule] = None) -> None:
    if not getattr(args, "exact", False):
        return
    if graph_n > current_limits().exact_n:
        raise ValidationError(f"--exact needs n <= {current_limits().exact_n}")
    if rule is not None and rule.tuned:
        raise ValidationError("--exact is unavailable for tuned rules")


def _positive(name: str, v: Optional[int]) -> None:
    if v is not None and v < 1:
        raise ValidationError(f"--{name} must be at least 1")


# ----------------------------------------------------------------- commands


def cmd_count(args, out) -> None:
    g = _graph(args)
    m = bp.count_exact(g)
    if args.format == "text":
        out.write(f"{m}\n")
    emit(_config(args), {"count": m, "scientific": fmt_sci(m)}, out)


def cmd_estimate(args, out) -> None:
    _positive("samples", args.samples)
    _positive("workers", args.workers)
    g = _graph(args)
    policy, rule = sis.resolve_algorithm(g.family, args.algo)
    rep = ex.estimate_count(g, policy, rule, args.samples, args.seed, args.workers, args.chunk_size, algorithm=args.algo)
    rec = rep.as_dict(with_time=not args.no_time)
    emit(_config(args), rec, out)


def cmd_sample(args, out) -> None:
    _positive("samples", args.samples)
    g = _graph(args)
    policy, rule = sis.resolve_algorithm(g.family, args.algo)
    _check_exact(args, g.n, rule)
    smp = sis.get_sampler(g, policy, rule, exact=args.exact)
    rng = ex.chunk_rng(args.seed, 0)
    cfg = _config(args)
    if args.format == "text":
        out.write("# " + " ".join(f"{k}={v}" for k, v in asdict(cfg).items() if v not in (None, False)) + "\n")
    records = []
    for _ in range(args.samples):
        tr = smp.sample(rng)
        rec = {"matching": " ".join(map(str, tr.matching)), "logT": tr.logT}
        if args.exact:
            rec["probability"] = smp.path_probability(tr.matching)
        if args.format == "text":
            line = tr.to_line()
            if args.exact:
                line += f"\tP={rec['probability']}"
            out.write(line + "\n")
        else:
            records.append(rec)
    if args.format == "json":
        out.write(json.dumps({"config": _plain({k: v for k, v in asdict(cfg).items() if v not in (None, False)}), "traces": _plain(records)}) + "\n")
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        if records:
            w.writerow(list(records[0]))
            for r in records:
                w.writerow([_csv_cell(v) for v in r.values()])


def cmd_moments(args, out) -> None:
    fam = _family(args)
    if args.n is None or args.n < 0:
        raise ValidationError("--n must be given and nonnegative")
    sis.resolve_algorithm(fam, args.algo)
    if mo.has_recurrence(fam, args.algo):
        rep = mo.moments(fam, args.algo, args.n)
    else:
        g = bp.make_family(fam, args.n)
        policy, rule = sis.resolve_algorithm(fam, args.algo)
        rep = mo.exhaustive_moments(g, policy, rule, algorithm=args.algo)
    rec = rep.as_dict()
    rec["scientific_count"] = fmt_sci(rep.count)
    if (fam.slug, args.algo) in an.closed_form_constants().pairs and args.n > 0:
        rec["n_star_asymptotic"] = math.exp(an.log_n_star_asymptotic(fam.slug, args.algo, args.n, rep.log_count))
    if args.exact:
        _, rule = sis.resolve_algorithm(fam, args.algo)
        _check_exact(args, args.n, rule)
        rec["second_moment_exact"] = mo.second_moment_exact(fam, args.algo, args.n)
    emit(_config(args), rec, out)


def cmd_constants(args, out) -> None:
    rows = an.constants_table()
    if args.format == "json":
        out.write(json.dumps([dict(name=r[0], value=_plain(r[1]), provenance=r[2], reference=r[3]) for r in rows]) + "\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["name", "value", "provenance", "reference"])
    for name, value, prov, ref in rows:
        w.writerow([name, fmt_real(value), prov, ref])


def cmd_table(args, out) -> None:
    t = ex.reproduce_table(args.id, "asymptotic" if args.asymptotic else "exact")
    if args.format == "json":
        out.write(json.dumps({"table": t.table_id, "mode": t.mode, "n": list(t.ns), "rows": {k: _plain(list(v)) for k, v in t.rows}}) + "\n")
    else:
        out.write(t.to_csv())


def cmd_clt(args, out) -> None:
    _positive("samples", args.samples)
    fam = _family(args)
    d = ex.run_clt(fam, args.algo, args.n, args.samples, args.seed, args.workers)
    rec = asdict(d)
    rec["histogram"] = " ".join(f"{e:g}:{c}" for e, c in d.histogram)
    rec["passes"] = d.passes()
    emit(_config(args), rec, out)


def cmd_crossover(args, out) -> None:
    fam = _family(args)
    sis.resolve_algorithm(fam, args.algo)
    mode = "exact" if args.finite else "asymptotic"
    n = an.crossover_vs_n7(fam.slug, args.algo, mode=mode)
    emit(_config(args), {"crossover": n, "mode": mode}, out)


COMMANDS = {
    "count": cmd_count,
    "estimate": cmd_estimate,
    "sample": cmd_sample,
    "moments": cmd_moments,
    "constants": cmd_constants,
    "table": cmd_table,
    "clt": cmd_clt,
    "crossover": cmd_crossover,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simatch", description="Sequential importance sampling for banded perfect matchings.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, family=True, graph=False, algo=False, n=True):
        sp.add_argument("--format", choices=("text", "json", "csv"), default="text")
        if family:
            sp.add_argument("--family", choices=("fib", "dist"))
            sp.add_argument("--t", type=int, help="Fibonacci parameter")
            sp.add_argument("--d", type=int, help="distance parameter")
        if graph:
            sp.add_argument("--graph", help="graph file: n, then one line of neighbours per left vertex")
        if algo:
            sp.add_argument("--algo", choices=ALGOS, default="fixed")
        if n:
            sp.add_argument("--n", type=int)

    sp = sub.add_parser("count", help="exact number of perfect matchings")
    common(sp, graph=True)

    sp = sub.add_parser("estimate", help="Monte Carlo count estimate")
    common(sp, graph=True, algo=True)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--chunk-size", type=int, default=ex.DEFAULT_CHUNK)
    sp.add_argument("--no-time", action="store_true", help="omit wall time for byte-identical output")

    sp = sub.add_parser("sample", help="print sampled decision traces")
    common(sp, graph=True, algo=True)
    sp.add_argument("--samples", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--exact", action="store_true", help="rational probabilities (n <= 20)")

    sp = sub.add_parser("moments", help="exact log-weight moments and sample sizes")
    common(sp, algo=True)
    sp.add_argument("--exact", action="store_true", help="also print E[T^2] as an exact fraction (n <= 20)")

    sp = sub.add_parser("constants", help="table of constants")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("table", help="required sample size tables")
    sp.add_argument("--id", type=int, choices=(2, 3, 4), required=True)
    sp.add_argument("--asymptotic", action="store_true", help="use mu n + sigma sqrt(n) instead of finite-n moments")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("clt", help="normality diagnostics of log T under uniform matchings")
    common(sp, algo=True)
    sp.add_argument("--samples", type=int, default=20_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("crossover", help="first n where N* exceeds n^7")
    common(sp, algo=True, n=False)
    sp.add_argument("--finite", action="store_true", help="use finite-n moments instead of the asymptotic form")
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        COMMANDS[args.command](args, out)
    except LimitExceededError as e:
        print(f"simatch: limit exceeded: {e}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"simatch: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
