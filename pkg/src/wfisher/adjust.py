"""Mid-p, mean-value-chi2 and median-value-chi2 adjustments of left p-values.

Each adjustment maps the cell [F_{i-1}, F_i] of an input statistic to one
number. Tables are aligned with the input statistic's support index, which is
what the combination step and the simulation engine look up.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .dist import CHISQ2, UNIFORM01, DiscreteDist
from .errors import DomainError
from .transport import AdjustedTable

__all__ = [
    "AdjustMoments",
    "midp",
    "mean_value_chi2",
    "median_value_chi2",
    "midp_table",
    "meanchi_table",
    "medchi_table",
    "neg2log_dist",
    "adjust_moments",
]


@dataclass(frozen=True)
class AdjustMoments:
    """Exact moments of the two chi2-type adjustments.

    ``var_meanchi`` is nu, ``mean_medchi`` is m and ``var_medchi`` is v.
    """

    mean_meanchi: float
    var_meanchi: float
    mean_medchi: float
    var_medchi: float

    @property
    def nu(self) -> float:
        return self.var_meanchi

    @property
    def m(self) -> float:
        return self.mean_medchi

    @property
    def v(self) -> float:
        return self.var_medchi


def _check_cell(F_prev: float, F_cur: float) -> None:
    if not (0.0 <= F_prev < F_cur <= 1.0):
        raise DomainError(f"need 0 <= F_prev < F_cur <= 1, got ({F_prev!r}, {F_cur!r})")


def midp(F_prev: float, F_cur: float) -> float:
    """Lancaster's mid-p, (F_prev + F_cur) / 2."""
    _check_cell(F_prev, F_cur)
    return 0.5 * (F_prev + F_cur)


def mean_value_chi2(F_prev: float, F_cur: float) -> float:
    """Average of -2 log w over w in [F_prev, F_cur]."""
    _check_cell(F_prev, F_cur)
    return float(_meanchi_cells(np.array([F_prev]), np.array([F_cur - F_prev]), np.array([1.0 - F_cur]))[0])


def median_value_chi2(F_prev: float, F_cur: float) -> float:
    """-2 log of the mid-p."""
    _check_cell(F_prev, F_cur)
    return -2.0 * math.log(0.5 * (F_prev + F_cur))


_TAIL_SWITCH = 0.25
_TAIL_TERMS = 64


def _meanchi_upper_tail(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Mean of -2 log(1 - t) for t in [B, A], i.e. the cell [1 - A, 1 - B].

    Expands -log(1 - t) = sum_k t^k / k and integrates term by term. With
    h_k = (A^{k+1} - B^{k+1}) / (A - B) built by h_k = A h_{k-1} + B^k the sum
    has no cancellation, which matters for cells that round to F = 1.
    """
    h = np.ones_like(A)
    Bk = np.ones_like(B)
    total = np.zeros_like(A)
    for k in range(1, _TAIL_TERMS + 1):
        Bk = Bk * B
        h = A * h + Bk
        total += h / (k * (k + 1))
    return 2.0 * total


def _meanchi_cells(lo: np.ndarray, mass: np.ndarray, sf: np.ndarray | None = None) -> np.ndarray:
    """Mean of -2 log w on [lo, lo + mass], vectorized.

    With t = mass / lo the cell average is
    2 - 2 log(lo) - 2 (1 + t) log1p(t) / t, which stays accurate for narrow
    cells where the textbook difference of w log w terms cancels. Cells in
    the top quarter use an upper-tail series when ``sf`` (1 - upper end) is
    given.
    """
    lo = np.asarray(lo, dtype=float)
    mass = np.asarray(mass, dtype=float)
    out = np.empty_like(lo)
    zero = lo <= 0.0
    out[zero] = 2.0 - 2.0 * np.log(mass[zero])
    tail = np.zeros_like(zero)
    if sf is not None:
        sf = np.asarray(sf, dtype=float)
        tail = ~zero & (sf + mass <= _TAIL_SWITCH)
        out[tail] = _meanchi_upper_tail(sf[tail] + mass[tail], sf[tail])
    rest = ~zero & ~tail
    a = lo[rest]
    t = mass[rest] / a
    narrow = t <= 1.0
    r = np.empty_like(a)
    tn = t[narrow]
    r[narrow] = 2.0 - 2.0 * np.log(a[narrow]) - 2.0 * (1.0 + tn) * np.log1p(tn) / tn
    wide = ~narrow
    aw, mw = a[wide], mass[rest][wide]
    bw = aw + mw
    r[wide] = 2.0 - 2.0 * (bw * np.log(bw) - aw * np.log(aw)) / mw
    out[rest] = r
    return np.maximum(out, 0.0)


def _medchi_cells(d: DiscreteDist) -> np.ndarray:
    mid = d.cdf_prev + 0.5 * d.masses
    mid_sf = d.sf + 0.5 * d.masses
    upper = mid > 0.5
    out = -2.0 * np.log(mid)
    out[upper] = -2.0 * np.log1p(-mid_sf[upper])
    return out


_CACHE: "weakref.WeakKeyDictionary[DiscreteDist, dict[str, AdjustedTable]]" = weakref.WeakKeyDictionary()


def _cached(d: DiscreteDist, key: str, build) -> AdjustedTable:
    slot = _CACHE.setdefault(d, {})
    table = slot.get(key)
    if table is None:
        table = slot[key] = build()
    return table


def midp_table(d: DiscreteDist) -> AdjustedTable:
    """Mid-p for each support point of ``d``."""
    return _cached(
        d,
        "midp",
        lambda: AdjustedTable(d, d.cdf_prev + 0.5 * d.masses, order=2.0, target=UNIFORM01, name="midp"),
    )


def meanchi_table(d: DiscreteDist) -> AdjustedTable:
    """Mean-value-chi2 statistic for each support point of ``d``."""
    return _cached(
        d,
        "meanchi",
        lambda: AdjustedTable(d, _meanchi_cells(d.cdf_prev, d.masses, d.sf), order=2.0, target=CHISQ2, name="meanchi"),
    )


def medchi_table(d: DiscreteDist) -> AdjustedTable:
    """Median-value-chi2 statistic for each support point of ``d``.

    Not a transport optimum, so the table carries no target.
    """
    return _cached(d, "medchi", lambda: AdjustedTable(d, _medchi_cells(d), order=None, target=None, name="medchi"))


def neg2log_dist(d: DiscreteDist) -> DiscreteDist:
    """Law of -2 log P for the left p-value of ``d``, on an increasing support.

    The order of atoms is reversed relative to ``d``: the largest input value
    (P = 1) becomes the smallest, at 0.
    """
    near_one = d.sf < 0.5
    x = -2.0 * np.log(d.cdf)
    x[near_one] = -2.0 * np.log1p(-d.sf[near_one])
    x[-1] = 0.0
    return DiscreteDist.from_masses(x[::-1], d.masses[::-1])


def adjust_moments(d: DiscreteDist) -> AdjustMoments:
    """nu, m and v by exact summation over the support of ``d``."""
    zm = meanchi_table(d)
    zt = medchi_table(d)
    return AdjustMoments(zm.mean(), zm.variance(), zt.mean(), zt.variance())
