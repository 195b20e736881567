"""Command-line front end: ``wfisher <subcommand> [options]``.

Tables go out as CSV and single results as JSON. CSV output starts with
``#`` provenance lines; JSON carries the same information under
``"provenance"``. Exit status is 0 on success, 2 for invalid input and 3 for
numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .adjust import adjust_moments, meanchi_table, medchi_table, midp_table
from .combine import (
    NullKind,
    StatisticKind,
    chisq_null,
    fisher_raw,
    noniid_null,
    run_test,
)
from .dist import (
    CHISQ2,
    UNIFORM01,
    ContinuousTarget,
    DiscreteDist,
    TargetKind,
    left_pvalue_dist,
    make_atom,
    make_binomial,
    make_fisher_nchg,
    read_csv_dist,
)
from .errors import ContractError, DomainError, NumericError, SupportLookupError
from .sim import (
    BINOMIAL_SETTINGS,
    IIDBinomial,
    IIDHypergeometric,
    NonIIDBinomial,
    SimConfig,
    simulate_histogram,
    simulate_power,
    simulate_type1,
)
from .transport import (
    lower_bound_general,
    lower_bound_meanchi,
    lower_bound_medianchi,
    optimal_adjust,
    transport_cost,
)

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- spec parsing


def _numbers(body: str, count: int, spec: str) -> list[str]:
    parts = [p.strip() for p in body.split(",")]
    if len(parts) != count or not all(parts):
        raise UsageError(f"malformed spec {spec!r}: expected {count} comma-separated values")
    return parts


def _int(s: str, spec: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise UsageError(f"malformed spec {spec!r}: {s!r} is not an integer") from None


def _float(s: str, spec: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise UsageError(f"malformed spec {spec!r}: {s!r} is not a number") from None
    if not math.isfinite(v):
        raise UsageError(f"malformed spec {spec!r}: {s!r} is not finite")
    return v


def parse_dist(spec: str) -> DiscreteDist:
    """binomial:K,theta | nchg:m,M,K,omega | csv:path | atom:x"""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise UsageError(f"malformed dist spec {spec!r}")
    if kind == "binomial":
        K, th = _numbers(body, 2, spec)
        return make_binomial(_int(K, spec), _float(th, spec))
    if kind == "nchg":
        m, M, K, om = _numbers(body, 4, spec)
        return make_fisher_nchg(_int(m, spec), _int(M, spec), _int(K, spec), _float(om, spec))
    if kind == "csv":
        path = Path(body)
        if not path.is_file():
            raise UsageError(f"file not found: {body}")
        return read_csv_dist(path)
    if kind == "atom":
        return make_atom(_float(body, spec))
    raise UsageError(f"unknown dist kind {kind!r} in {spec!r}")


def parse_target(spec: str) -> ContinuousTarget:
    """uniform01 | chisq2 | gamma:a,b"""
    if spec == "uniform01":
        return UNIFORM01
    if spec == "chisq2":
        return CHISQ2
    kind, sep, body = spec.partition(":")
    if kind == "gamma" and sep:
        a, b = _numbers(body, 2, spec)
        return ContinuousTarget.gamma(_float(a, spec), _float(b, spec))
    raise UsageError(f"unknown target spec {spec!r}")


def _float_list(text: str, what: str) -> list[float]:
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"malformed {what} list {text!r}") from None
    if not vals:
        raise UsageError(f"empty {what} list")
    return vals


def _alphas(args) -> tuple[float, ...]:
    vals = tuple(_float_list(args.alpha, "alpha"))
    if not all(0.0 < a < 1.0 for a in vals):
        raise UsageError("alpha values must lie in (0, 1)")
    return vals


def parse_scenario(args):
    spec = args.scenario
    kind, _, body = spec.partition(":")
    if kind == "binomial":
        K, th = _numbers(body, 2, spec)
        th0 = _float(th, spec)
        theta = th0 if args.theta is None else args.theta
        return IIDBinomial(_int(K, spec), th0, theta)
    if kind == "nchg":
        parts = [p.strip() for p in body.split(",")]
        if len(parts) not in (3, 4):
            raise UsageError(f"malformed spec {spec!r}: expected m,M,K[,omega]")
        m, M, K = (_int(p, spec) for p in parts[:3])
        omega = _float(parts[3], spec) if len(parts) == 4 else 1.0
        if args.logomega is not None:
            omega = math.exp(args.logomega)
        return IIDHypergeometric(m, M, K, omega)
    if kind == "noniid":
        settings = BINOMIAL_SETTINGS
        if body:
            settings = []
            for item in body.split(";"):
                K, th = _numbers(item, 2, spec)
                settings.append((_int(K, spec), _float(th, spec)))
            settings = tuple(settings)
        return NonIIDBinomial(settings, 1.0 if args.kappa is None else args.kappa)
    raise UsageError(f"unknown scenario {spec!r}")


# ---------------------------------------------------------------- output


class Writer:
    def __init__(self, args, argv: Sequence[str]):
        self.digits = 4 if args.human else 17
        self.args = args
        self.argv = list(argv)

    def num(self, x: float) -> str:
        return f"{float(x):.{self.digits}g}"

    def provenance(self) -> dict:
        prov = {"tool": "wfisher", "version": __version__, "argv": self.argv}
        seed = getattr(self.args, "seed", None)
        if seed is not None:
            prov["seed"] = seed
        return prov

    def header_lines(self) -> list[str]:
        return [f"# {k}: {v if not isinstance(v, list) else ' '.join(v)}" for k, v in self.provenance().items()]

    def _round(self, obj):
        if isinstance(obj, float):
            if not math.isfinite(obj):
                return None
            return float(self.num(obj))
        if isinstance(obj, dict):
            return {k: self._round(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [self._round(v) for v in obj]
        if isinstance(obj, np.generic):
            return self._round(obj.item())
        return obj

    def json(self, payload: dict) -> str:
        out = {"provenance": self.provenance()}
        out.update(self._round(payload))
        return json.dumps(out, indent=2) + "\n"

    def csv(self, header: Sequence[str], rows, footer: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([self.num(v) if isinstance(v, (float, np.floating)) else v for v in row])
        for line in footer:
            buf.write(f"# {line}\n")
        return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_adjust(args, w: Writer) -> str:
    d = parse_dist(args.dist)
    mid = midp_table(d).values
    zm = meanchi_table(d).values
    zt = medchi_table(d).values
    mo = adjust_moments(d)
    cols = {"midp": mid, "meanchi": zm, "medchi": zt}
    chosen = list(cols) if args.kind == "all" else [args.kind]
    rows = [
        [float(d.support[i]), float(d.masses[i]), float(d.cdf[i])] + [float(cols[k][i]) for k in chosen]
        for i in range(len(d))
    ]
    footer = [f"nu={w.num(mo.nu)} m={w.num(mo.m)} v={w.num(mo.v)}"]
    return w.csv(["x", "mass", "F"] + chosen, rows, footer)


def _dists(args) -> list[DiscreteDist]:
    return [parse_dist(s) for s in args.dist]


def _moments_payload(mo) -> dict:
    return {"mean_meanchi": mo.mean_meanchi, "nu": mo.nu, "m": mo.m, "v": mo.v}


def _nulls_for(dists: list[DiscreteDist], n: int) -> tuple[dict, list]:
    """Gamma nulls for n tests drawn from ``dists`` with equal frequency."""
    moments = [adjust_moments(d) for d in dists]
    nulls = {k: noniid_null(k, moments, n) for k in (StatisticKind.MEAN_CHI, StatisticKind.MEDIAN_CHI)}
    return nulls, moments


def cmd_fit_gamma(args, w: Writer) -> str:
    dists = _dists(args)
    n = args.n if args.n is not None else len(dists)
    if n < 1:
        raise UsageError("--n must be at least 1")
    nulls, moments = _nulls_for(dists, n)
    payload = {"n": n, "moments": [_moments_payload(m) for m in moments]}
    for kind, g in nulls.items():
        payload[kind.value] = {"shape": g.shape, "scale": g.scale, "shape_per_n": g.shape / n}
    payload["chisq"] = {"shape": float(n), "scale": 2.0}
    return w.json(payload)


def cmd_test(args, w: Writer) -> str:
    dists = _dists(args)
    obs = _float_list(args.obs, "observation")
    if args.repeat > 1:
        obs = obs * args.repeat
    n = len(obs)
    per_test = [dists[j % len(dists)] for j in range(n)]
    idx = [d.index_of(x) for d, x in zip(per_test, obs)]
    nulls, _ = _nulls_for(dists, n)
    S = math.fsum(float(meanchi_table(d).values[i]) for d, i in zip(per_test, idx))
    St = math.fsum(float(medchi_table(d).values[i]) for d, i in zip(per_test, idx))
    T = fisher_raw([float(d.cdf[i]) for d, i in zip(per_test, idx)])
    reports = []
    for kind, value in ((StatisticKind.MEAN_CHI, S), (StatisticKind.MEDIAN_CHI, St)):
        reports.append(run_test(value, chisq_null(n), args.alpha, kind, NullKind.CHISQ_2N))
        reports.append(run_test(value, nulls[kind], args.alpha, kind, NullKind.OPTIMAL_GAMMA))
    reports.append(run_test(T, chisq_null(n), args.alpha, StatisticKind.RAW_FISHER, NullKind.CHISQ_2N))
    out = []
    for r in reports:
        d = r.to_dict()
        d["null_params"] = {"shape": r.null_params.shape, "scale": r.null_params.scale}
        out.append(d)
    return w.json({"n": n, "S": S, "S_tilde": St, "T": T, "reports": out})


def _sim_config(args) -> SimConfig:
    if args.n < 1 or args.reps < 1:
        raise UsageError("--n and --reps must be at least 1")
    return SimConfig(
        n_tests=args.n,
        n_reps=args.reps,
        seed=args.seed,
        alpha_levels=_alphas(args),
        scenario=parse_scenario(args),
        first_rep=args.first_rep,
        include_raw=args.raw,
        workers=args.workers,
    )


def _sim_csv(result, w: Writer) -> str:
    rows = [[r.statistic.value, r.null.value, r.alpha, r.rate, r.se] for r in result.rows]
    rows += [["exact", "binomial", a, p, 0.0] for a, p in result.exact_power.items()]
    return w.csv(["statistic", "null", "alpha", "rate", "se"], rows)


def cmd_type1(args, w: Writer) -> str:
    return _sim_csv(simulate_type1(_sim_config(args)), w)


def cmd_power(args, w: Writer) -> str:
    return _sim_csv(simulate_power(_sim_config(args)), w)


def cmd_hist(args, w: Writer) -> str:
    h = simulate_histogram(_sim_config(args), bins=args.bins)
    rows = [
        [h.edges[i], h.edges[i + 1], h.density_s[i], h.density_stilde[i], h.gamma_pdf[i], h.chisq_pdf[i], h.gamma_pdf_stilde[i]]
        for i in range(h.density_s.size)
    ]
    return w.csv(["bin_lo", "bin_hi", "density_Sn", "density_Stilde", "gamma_pdf", "chisq_pdf", "gamma_pdf_Stilde"], rows)


def _adjusted(d: DiscreteDist, how: str, y: ContinuousTarget) -> DiscreteDist:
    if how == "none":
        return d
    if how == "meanchi":
        return meanchi_table(d).as_dist()
    if how == "medchi":
        return medchi_table(d).as_dist()
    if how == "midp":
        return midp_table(d).as_dist()
    return optimal_adjust(d, y, 2.0).as_dist()


def cmd_wdist(args, w: Writer) -> str:
    d = parse_dist(args.dist)
    y = parse_target(args.target)
    z = _adjusted(d, args.adjust, y)
    cost = transport_cost(z, y, args.p)
    payload = {"p": args.p, "adjust": args.adjust, "target": str(y), "Wp": cost ** (1.0 / args.p), "Wp_pow_p": cost}
    if args.p == 2.0:
        payload["W2sq"] = cost
    return w.json(payload)


def cmd_bounds(args, w: Writer) -> str:
    d = parse_dist(args.dist)
    y = parse_target(args.target)
    z = _adjusted(d, args.adjust, y)
    payload = {"adjust": args.adjust, "target": str(y), "W2sq": transport_cost(z, y, 2.0), "lower": lower_bound_general(z, y)}
    if y.kind is TargetKind.CHISQ2 and args.adjust in ("meanchi", "medchi"):
        pv = left_pvalue_dist(d)
        payload["lower_meanchi"] = lower_bound_meanchi(pv)
        payload["lower_medchi"] = lower_bound_medianchi(pv)
    return w.json(payload)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write to this file instead of standard output")
    common.add_argument("--human", action="store_true", help="print 4 significant digits instead of 17")

    p = argparse.ArgumentParser(prog="wfisher", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wfisher {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    dist_help = "binomial:K,theta | nchg:m,M,K,omega | csv:path | atom:x"
    target_help = "uniform01 | chisq2 | gamma:shape,scale"

    a = sub.add_parser("adjust", parents=[common], help="adjusted values per support point and their moments")
    a.add_argument("--dist", required=True, help=dist_help)
    a.add_argument("--kind", choices=["all", "midp", "meanchi", "medchi"], default="all")
    a.set_defaults(func=cmd_adjust)

    f = sub.add_parser("fit-gamma", parents=[common], help="optimal gamma nulls for S_n and S~_n")
    f.add_argument("--dist", action="append", required=True, help=dist_help + " (repeat for non-identical tests)")
    f.add_argument("--n", type=int, help="number of tests; the --dist list is cycled (default: its length)")
    f.set_defaults(func=cmd_fit_gamma)

    t = sub.add_parser("test", parents=[common], help="combine observed statistics and test")
    t.add_argument("--dist", action="append", required=True, help=dist_help + " (repeat; cycled over observations)")
    t.add_argument("--obs", required=True, help="comma-separated observed statistic values")
    t.add_argument("--repeat", type=int, default=1, help="repeat the observation list this many times")
    t.add_argument("--alpha", type=float, default=0.05)
    t.set_defaults(func=cmd_test)

    for name, func, helptext in (
        ("type1", cmd_type1, "Monte Carlo type I error rates"),
        ("power", cmd_power, "Monte Carlo power"),
        ("hist", cmd_hist, "binned null densities of S_n and S~_n"),
    ):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--scenario", required=True, help="binomial:K,theta0 | nchg:m,M,K[,omega] | noniid[:K,theta;...]")
        s.add_argument("--theta", type=float, help="alternative theta for binomial scenarios")
        s.add_argument("--logomega", type=float, help="log odds ratio for nchg scenarios")
        s.add_argument("--kappa", type=float, help="alternative multiplier for noniid scenarios")
        s.add_argument("--n", type=int, required=True, help="p-values per combination")
        s.add_argument("--reps", type=int, default=20000)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--first-rep", type=int, default=0, help="index of the first replicate")
        s.add_argument("--alpha", default="0.05", help="comma-separated levels")
        s.add_argument("--raw", action="store_true", help="also report Fisher's unadjusted statistic")
        s.add_argument("--workers", type=int, help="worker threads (default: WFISHER_THREADS or CPU count)")
        if name == "hist":
            s.add_argument("--bins", type=int, default=60)
        s.set_defaults(func=func)

    for name, func, helptext in (
        ("wdist", cmd_wdist, "Wasserstein distance to a continuous target"),
        ("bounds", cmd_bounds, "largest-atom lower bounds on W_2^2"),
    ):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--dist", required=True, help=dist_help)
        s.add_argument("--target", default="chisq2", help=target_help)
        s.add_argument(
            "--adjust",
            choices=["none", "optimal", "meanchi", "medchi", "midp"],
            default="none",
            help="transform the statistic before measuring (default: none)",
        )
        if name == "wdist":
            s.add_argument("--p", type=float, default=2.0)
        s.set_defaults(func=func)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    writer = Writer(args, argv)
    try:
        text = args.func(args, writer)
    except (UsageError, DomainError, ContractError, SupportLookupError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, SupportLookupError) and exc.args else exc
        parser.print_usage(sys.stderr)
        print(f"wfisher {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, ArithmeticError) as exc:
        print(f"wfisher {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(args, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
