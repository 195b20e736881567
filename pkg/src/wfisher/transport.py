"""One-dimensional transport between a discrete law and a continuous target.

The optimal coupling sends atom i of the discrete law onto the target cell
A_i = [G^{-1}(F_{i-1}), G^{-1}(F_i)]. Distances, covariances, optimal
adjustments and the largest-atom lower bounds are all sums over these cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .dist import ContinuousTarget, DiscreteDist, TargetKind
from .errors import ContractError, DomainError, NumericError

__all__ = [
    "Partition",
    "AdjustedTable",
    "partition",
    "transport_cost",
    "wasserstein_p",
    "coupling_covariance",
    "w2_from_moments",
    "optimal_adjust",
    "w2_gap",
    "lower_bound_general",
    "lower_bound_meanchi",
    "lower_bound_medianchi",
]

P_MAX = 8.0
CELL_EPSABS = 1e-13
CELL_EPSREL = 1e-10


@dataclass(frozen=True)
class Partition:
    """Target cells aligned with the atoms of a discrete law."""

    lo: np.ndarray
    hi: np.ndarray
    masses: np.ndarray

    def __len__(self) -> int:
        return self.lo.size

    def target_probabilities(self, y: ContinuousTarget) -> np.ndarray:
        return np.array([y.partial_moment(0.0, a, b) for a, b in zip(self.lo, self.hi)])


@dataclass(frozen=True, eq=False)
class AdjustedTable:
    """Adjusted values z_i aligned index-by-index with ``base``.

    ``target`` and ``order`` record the optimization that produced the
    table; they are ``None`` for adjustments that are not transport optima.
    """

    base: DiscreteDist
    values: np.ndarray
    order: float | None = 2.0
    target: ContinuousTarget | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.values.shape != self.base.masses.shape:
            raise ContractError("adjusted values must align with the base support")

    def mean(self) -> float:
        return float(np.dot(self.base.masses, self.values))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot(self.base.masses, (self.values - mu) ** 2))

    def as_dist(self) -> DiscreteDist:
        """Law of Z; values equal in floating point are merged."""
        values, inverse = np.unique(self.values, return_inverse=True)
        return DiscreteDist.from_masses(values, np.bincount(inverse, weights=self.base.masses))


def _check_order(p: float) -> float:
    p = float(p)
    if not (1.0 < p <= P_MAX):
        raise DomainError(f"order p must lie in (1, {P_MAX:g}], got {p!r}")
    return p


def partition(d: DiscreteDist, y: ContinuousTarget) -> Partition:
    """Cells A_i; interior endpoints use the tail that keeps precision."""
    lo = np.empty(len(d))
    hi = np.empty(len(d))
    cdf_prev, sf_prev = d.cdf_prev, d.sf_prev
    for i in range(len(d)):
        lo[i] = y.lower if i == 0 else y.cell_endpoint(cdf_prev[i], sf_prev[i])
        hi[i] = y.upper if i == len(d) - 1 else y.cell_endpoint(d.cdf[i], d.sf[i])
    hi = np.maximum(hi, lo)
    return Partition(lo, hi, d.masses)


def _quad(f, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    res = integrate.quad(f, a, b, epsabs=CELL_EPSABS, epsrel=CELL_EPSREL, limit=200, full_output=1)
    value, abserr = res[0], res[1]
    if len(res) > 3 and abserr > 1e-9 * max(1.0, abs(value)):
        raise NumericError(f"quadrature failed on [{a}, {b}]: {res[3]}")
    return value


def _cell_cost(x: float, a: float, b: float, y: ContinuousTarget, p: float) -> float:
    f = lambda t: abs(x - t) ** p * y.pdf(t)  # noqa: E731
    if a < x < b:
        return _quad(f, a, x) + _quad(f, x, b)
    return _quad(f, a, b)


def transport_cost(d: DiscreteDist, y: ContinuousTarget, p: float = 2.0) -> float:
    """W_p^p(d, y) by adaptive quadrature over each cell.

    Each cell integral is taken in the target's own variable,
    int_{A_i} |x_i - t|^p g(t) dt, which equals the quantile-space integral
    over [F_{i-1}, F_i] and lets QUADPACK treat the unbounded last cell.
    """
    p = _check_order(p)
    part = partition(d, y)
    total = 0.0
    for x, a, b in zip(d.support, part.lo, part.hi):
        total += _cell_cost(float(x), float(a), float(b), y, p)
    return total


def wasserstein_p(d: DiscreteDist, y: ContinuousTarget, p: float = 2.0) -> float:
    """W_p(d, y) for p in (1, 8]."""
    return transport_cost(d, y, p) ** (1.0 / _check_order(p))


def _partial_moments(part: Partition, y: ContinuousTarget, k: float) -> np.ndarray:
    return np.array([y.partial_moment(k, a, b) for a, b in zip(part.lo, part.hi)])


def coupling_covariance(d: DiscreteDist, y: ContinuousTarget) -> float:
    """Covariance of (X, Y) under the cell-wise optimal coupling."""
    part = partition(d, y)
    m1 = _partial_moments(part, y, 1.0)
    return float(np.dot(d.support, m1) - d.mean() * y.mean())


def w2_from_moments(d: DiscreteDist, y: ContinuousTarget) -> float:
    """W_2^2 as Var X + Var Y + (EX - EY)^2 - 2 Cov under the coupling."""
    return d.variance() + y.variance() + (d.mean() - y.mean()) ** 2 - 2.0 * coupling_covariance(d, y)


def _closed_form_values(d: DiscreteDist, y: ContinuousTarget, part: Partition, p: float) -> np.ndarray:
    if p == 2.0 and y.kind is TargetKind.UNIFORM01:
        return 0.5 * (part.lo + part.hi)
    if p == 2.0 and y.kind is TargetKind.CHISQ2:
        # E[Y | lo <= Y <= hi] for the exponential with mean 2, written so the
        # subtraction never involves two nearly equal exponentials.
        z = np.empty(len(d))
        for i, (a, b) in enumerate(zip(part.lo, part.hi)):
            if math.isinf(b):
                z[i] = a + 2.0
            else:
                z[i] = a + 2.0 - (b - a) * d.sf[i] / d.masses[i]
        return z
    k = p - 1.0
    num = _partial_moments(part, y, k)
    den = _partial_moments(part, y, 0.0)
    return (num / den) ** (1.0 / k)


def _quadrature_values(y: ContinuousTarget, part: Partition, p: float) -> np.ndarray:
    k = p - 1.0
    z = np.empty(len(part))
    for i, (a, b) in enumerate(zip(part.lo, part.hi)):
        num = _quad(lambda t: t**k * y.pdf(t), a, b)
        den = _quad(y.pdf, a, b)
        z[i] = (num / den) ** (1.0 / k)
    return z


def optimal_adjust(d: DiscreteDist, y: ContinuousTarget, p: float = 2.0, method: str = "closed") -> AdjustedTable:
    """Values z_i = (E[Y^{p-1} | Y in A_i])^{1/(p-1)} minimizing W_p.

    ``method="quad"`` integrates the conditional moments numerically and is
    kept as an independent check on the closed forms.
    """
    p = _check_order(p)
    part = partition(d, y)
    if method == "closed":
        z = _closed_form_values(d, y, part, p)
    elif method == "quad":
        z = _quadrature_values(y, part, p)
    else:
        raise DomainError(f"unknown method {method!r}")
    z = np.clip(z, part.lo, part.hi)
    return AdjustedTable(d, z, order=p, target=y, name=f"optimal_p{p:g}")


def w2_gap(table: AdjustedTable, y: ContinuousTarget) -> float:
    """W_2^2(Z, Y) = Var(Y) - Var(Z) for a p = 2 optimal table."""
    if table.target is None or table.order != 2.0:
        raise ContractError("w2_gap needs a table produced by optimal_adjust with p = 2")
    if table.target != y:
        raise ContractError(f"table was optimized against {table.target}, not {y}")
    gap = y.variance() - table.variance()
    if gap < -1e-12:
        raise NumericError(f"negative variance gap {gap}")
    return max(gap, 0.0)


def lower_bound_general(d: DiscreteDist, y: ContinuousTarget) -> float:
    """Largest single-cell transport cost, sup_i int_{A_i} (x_i - t)^2 g(t) dt."""
    part = partition(d, y)
    m0 = _partial_moments(part, y, 0.0)
    m1 = _partial_moments(part, y, 1.0)
    m2 = _partial_moments(part, y, 2.0)
    x = d.support
    cell = x * x * m0 - 2.0 * x * m1 + m2
    return float(max(np.max(cell), 0.0))


def _pvalue_grid(d_pvals: DiscreteDist) -> tuple[np.ndarray, np.ndarray]:
    F = d_pvals.support
    if F[0] <= 0.0 or F[-1] > 1.0 + 1e-12:
        raise DomainError("p-value support must lie in (0, 1]")
    return np.concatenate([[0.0], F[:-1]]), F


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def _bound_terms(Fp: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    delta = F - Fp
    cross = np.zeros_like(F)
    pos = Fp > 0
    # F_{i-1} = 0 contributes nothing: F_{i-1} log^2 F_{i-1} -> 0.
    cross[pos] = F[pos] * Fp[pos] * (np.log(F[pos]) - np.log(Fp[pos])) ** 2 / delta[pos]
    return delta, cross


def lower_bound_meanchi(d_pvals: DiscreteDist) -> float:
    """Largest-atom lower bound on W_2^2 between the mean-value statistic and chi2_2."""
    Fp, F = _pvalue_grid(d_pvals)
    delta, cross = _bound_terms(Fp, F)
    return float(4.0 * np.max(delta - cross))


def lower_bound_medianchi(d_pvals: DiscreteDist) -> float:
    """Largest-atom lower bound on W_2^2 between the median-value statistic and chi2_2."""
    Fp, F = _pvalue_grid(d_pvals)
    delta, cross = _bound_terms(Fp, F)
    c = 1.0 - (_xlogx(F) - _xlogx(Fp)) / delta + np.log((F + Fp) / 2.0)
    return float(4.0 * np.max(delta * (1.0 + c * c) - cross))
