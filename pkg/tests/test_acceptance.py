"""Acceptance checks, one per criterion.

Each check returns (ok, detail). Under pytest every test prints a line
``CRITERION k: PASS|FAIL detail`` and then asserts. Running this file as a
script prints all lines without stopping at the first failure.
"""

from __future__ import annotations

import contextlib
import io
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_dist, random_target  # noqa: E402
from wfisher import (  # noqa: E402
    CHISQ2,
    ContinuousTarget,
    DiscreteDist,
    adjust_moments,
    cli,
    iid_null,
    left_pvalue_dist,
    make_binomial,
    meanchi_table,
    medchi_table,
    optimal_gamma,
    run_test,
    special,
)
from wfisher.combine import StatisticKind  # noqa: E402
from wfisher.sim import IIDBinomial, IIDHypergeometric, SimConfig, simulate_power, simulate_type1  # noqa: E402
from wfisher.transport import (  # noqa: E402
    lower_bound_meanchi,
    lower_bound_medianchi,
    optimal_adjust,
    partition,
    transport_cost,
    w2_from_moments,
    w2_gap,
)

MEAN, MED = StatisticKind.MEAN_CHI, StatisticKind.MEDIAN_CHI

MOMENTS_PRINTED = {
    (5, 0.01): (0.20, 1.41, 0.10),
    (5, 0.1): (1.61, 1.63, 0.96),
    (5, 0.5): (3.61, 1.92, 3.19),
    (10, 0.01): (0.38, 1.44, 0.19),
    (10, 0.1): (2.53, 1.77, 1.74),
    (10, 0.5): (3.83, 1.96, 3.63),
    (20, 0.01): (0.73, 1.50, 0.38),
    (20, 0.1): (3.37, 1.89, 2.74),
    (20, 0.5): (3.92, 1.98, 3.81),
}

NCHG_PRINTED = {
    "mass": [0.0312, 0.1562, 0.3126, 0.3126, 0.1562, 0.0312],
    "F": [0.0312, 0.1874, 0.5, 0.8126, 0.9688, 1.0],
    "meanchi": [8.9339, 4.6325, 2.2096, 0.8615, 0.2341, 0.0315],
    "medchi": [8.3203, 4.427, 2.136, 0.8423, 0.2315, 0.0314],
}


def step_grid() -> DiscreteDist:
    return DiscreteDist.from_masses(np.arange(1, 102), [0.001] * 100 + [0.9])


def _timed(limit: float, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if dt >= limit:
        ok = False
    return ok, f"{detail} [{dt:.2f}s, limit {limit:g}s]"


def check_1():
    def body():
        bad = []
        for key, printed in MOMENTS_PRINTED.items():
            mo = adjust_moments(make_binomial(*key))
            got = (round(mo.nu, 2), round(mo.m, 2), round(mo.v, 2))
            for name, g, p in zip(("nu", "m", "v"), got, printed):
                if abs(g - p) > 1e-9:
                    bad.append(f"{name}{key}={g:.2f} vs {p:.2f}")
        return not bad, f"{27 - len(bad)}/27 cells match" + (f"; mismatches: {', '.join(bad)}" if bad else "")

    return _timed(1.0, body)


def check_2():
    def body():
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = cli.main(["adjust", "--dist", "nchg:4000,4000,5,1"])
        lines = [ln for ln in buf.getvalue().splitlines() if not ln.startswith("#")]
        header = lines[0].split(",")
        rows = [dict(zip(header, map(float, ln.split(",")))) for ln in lines[1:]]
        worst = max(abs(r[col] - v) for col, vals in NCHG_PRINTED.items() for r, v in zip(rows, vals))
        n = sum(len(v) for v in NCHG_PRINTED.values())
        return code == 0 and len(rows) == 6 and worst <= 5e-4, f"{n} values, max abs error {worst:.2e}"

    return _timed(1.0, body)


def check_3():
    def body():
        d = step_grid()
        pv = left_pvalue_dist(d)
        zm, zt = meanchi_table(d).as_dist(), medchi_table(d).as_dist()
        w_mean = transport_cost(zm, CHISQ2)
        w_med = transport_cost(zt, CHISQ2)
        lb_mean, lb_med = lower_bound_meanchi(pv), lower_bound_medianchi(pv)
        checks = {
            "W2sq(meanchi)": (w_mean, 1.2479, 1e-3),
            "mean bound": (lb_mean, 1.2436, 1e-3),
            "median bound": (lb_med, 1.32, 5e-3),
            "W2sq(medchi)": (w_med, 1.3223, 1e-3),
        }
        parts, ok = [], True
        for name, (got, want, tol) in checks.items():
            good = abs(got - want) <= tol
            ok &= good
            parts.append(f"{name}={got:.6f} (want {want}±{tol:g}{'' if good else ', OFF'})")
        return ok, "; ".join(parts)

    return _timed(1.0, body)


def check_4():
    def body():
        d = step_grid()
        mo = adjust_moments(d)
        last = len(d) - 1
        S = 40 * float(meanchi_table(d).values[last])
        St = 40 * float(medchi_table(d).values[last])
        lt = run_test(S, iid_null(MEAN, mo, 40), 0.05).lower_tail
        ltt = run_test(St, iid_null(MED, mo, 40), 0.05).lower_tail
        event = 0.9**40
        ok = (
            abs(S - 59.5326) <= 1e-3
            and abs(St - 47.827) <= 1e-3
            and abs(lt - 0.0177) <= 5e-4
            and abs(ltt - 0.0151) <= 5e-4
            and abs(event - 0.0148) <= 5e-5
        )
        return ok, f"S={S:.4f} S~={St:.4f} lower tails {lt:.4f}, {ltt:.4f}; 0.9^40={event:.4f}"

    return _timed(1.0, body)


def check_5():
    def body():
        alphas = (0.05, 0.01, 0.005)
        res = simulate_type1(SimConfig(100, 100_000, 5, alphas, IIDHypergeometric(4000, 4000, 5)))
        parts, ok = [], True
        for kind in (MEAN, MED):
            for a in alphas:
                r = res.row(kind, "gamma", a)
                z = abs(r.rate - a) / math.sqrt(a * (1 - a) / r.n_reps)
                ok &= z <= 3
                parts.append(f"{kind.value}@{a}={r.rate:.5f}({z:.1f}SE)")
        chi = res.rate(MED, "chisq", 0.05)
        ok &= chi < 0.02
        return ok, " ".join(parts) + f"; chisq medchi@0.05={chi:.4f}"

    return _timed(120.0, body)


def check_6():
    def body():
        chis, gam = [], {}
        for n in (50, 200, 1000):
            res = simulate_type1(SimConfig(n, 20_000, 6, (0.05,), IIDBinomial(5, 0.5)))
            chis.append(res.rate(MED, "chisq", 0.05))
            if n == 1000:
                gam = {k.value: res.rate(k, "gamma", 0.05) for k in (MEAN, MED)}
        se = math.sqrt(0.05 * 0.95 / 20_000)
        ok = all(abs(r - 0.05) <= 3 * se for r in gam.values()) and chis[0] > chis[1] > chis[2]
        g = ", ".join(f"{k}={v:.4f}" for k, v in gam.items())
        return ok, f"n=1000 gamma rates {g} (3SE={3 * se:.4f}); chisq medchi over n: " + " > ".join(f"{c:.4f}" for c in chis)

    return _timed(180.0, body)


def check_7():
    def body():
        res = simulate_power(SimConfig(40, 10_000, 7, (0.05,), IIDBinomial(5, 0.1, 0.05)))
        parts, ok = [], True
        for kind in (MEAN, MED):
            g, c = res.row(kind, "gamma", 0.05), res.row(kind, "chisq", 0.05)
            pooled = math.sqrt(g.se**2 + c.se**2)
            ok &= g.rate - c.rate > 3 * pooled
            parts.append(f"{kind.value}: gamma {g.rate:.4f} vs chisq {c.rate:.4f} (3 pooled SE {3 * pooled:.4f})")
        return ok, "; ".join(parts) + f"; exact test {res.exact_power[0.05]:.4f}"

    return _timed(60.0, body)


def _8a():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        d, y = random_dist(rng), random_target(rng)
        table = optimal_adjust(d, y, 2.0)
        worst = max(worst, abs(transport_cost(table.as_dist(), y) - w2_gap(table, y)))
    return worst <= 1e-7, f"a: max |quad - gap| {worst:.1e} on 50 pairs"


def _8b():
    beaten = 0
    for seed in range(50):
        rng = np.random.default_rng(5000 + seed)
        d, y = random_dist(rng, max_atoms=6), random_target(rng)
        best = transport_cost(optimal_adjust(d, y, 2.0).as_dist(), y)
        part = partition(d, y)
        width = np.where(np.isinf(part.hi), 1.0, part.hi - part.lo)
        for _ in range(50):
            v = part.lo + rng.uniform(0.01, 0.99, len(d)) * width
            if np.any(np.diff(v) <= 0):
                continue
            beaten += transport_cost(DiscreteDist.from_masses(v, d.masses), y) < best - 1e-10
    return beaten == 0, f"b: {beaten} of 2500 jitters beat the optimum"


def _8c():
    wrong = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        d, y = random_dist(rng), random_target(rng)
        EY = y.mean()
        for p in (1.5, 3.0):
            m = optimal_adjust(d, y, p).mean()
            wrong += (m >= EY) if p < 2 else (m <= EY)
    worst = 0.0
    order_ok = True
    for key in ((5, 0.1), (20, 0.5), (10, 0.01), (3, 0.7)):
        d = make_binomial(*key)
        zm, zt = meanchi_table(d), medchi_table(d)
        lhs = transport_cost(zt.as_dist(), CHISQ2) - transport_cost(zm.as_dist(), CHISQ2)
        rhs = float(np.dot(d.masses, (zm.values - zt.values) ** 2))
        order_ok &= lhs > 0
        worst = max(worst, abs(lhs - rhs))
    ok = wrong == 0 and order_ok and worst <= 1e-7
    return ok, f"c: {wrong} bias-direction violations, strict order {order_ok}, decomposition error {worst:.1e}"


def _8d():
    beaten = []
    for seed in range(10):
        rng = np.random.default_rng(700 + seed)
        z = random_dist(rng, low=0.05, high=8.0)
        g = optimal_gamma(z.mean(), z.variance())
        base = w2_from_moments(z, ContinuousTarget.gamma(g.shape, g.scale))
        best = min(
            w2_from_moments(z, ContinuousTarget.gamma(g.shape * 1.15**i, g.scale * 1.15**j))
            for i in range(-10, 11)
            for j in range(-10, 11)
        )
        if best < base - 1e-12:
            beaten.append(f"{base:.4f}->{best:.4f}")
    return not beaten, f"d: matched gamma beaten on {len(beaten)}/10 grids" + (f" ({', '.join(beaten[:3])}, ...)" if beaten else "")


def _8e():
    worst = 0.0
    for a in (0.5, 1.0, 4 / 3.61, 100.0):
        for p in (0.001, 0.05, 0.5, 0.95, 0.999):
            worst = max(worst, abs(special.reg_lower_gamma(a, special.inv_reg_lower_gamma(a, p)) - p))
    return worst <= 1e-9, f"e: max roundtrip error {worst:.1e}"


def check_8():
    def body():
        results = [f() for f in (_8a, _8b, _8c, _8d, _8e)]
        return all(ok for ok, _ in results), "; ".join(("" if ok else "FAIL ") + d for ok, d in results)

    return _timed(300.0, body)


CHECKS = {k: globals()[f"check_{k}"] for k in range(1, 9)}


def _line(k: int) -> tuple[bool, str]:
    ok, detail = CHECKS[k]()
    return ok, f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"


@pytest.mark.parametrize("k", sorted(CHECKS))
def test_criterion(k, capsys):
    ok, line = _line(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    status = 0
    for k in sorted(CHECKS):
        ok, line = _line(k)
        print(line, flush=True)
        status |= not ok
    sys.exit(status)
