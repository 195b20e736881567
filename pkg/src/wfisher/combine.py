"""Fisher-type combination statistics and their gamma null approximations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import special
from .adjust import AdjustMoments
from .errors import DomainError, SupportLookupError
from .transport import AdjustedTable

__all__ = [
    "StatisticKind",
    "NullKind",
    "GammaParams",
    "TestReport",
    "fisher_raw",
    "combine_adjusted",
    "optimal_gamma",
    "chisq_null",
    "iid_null",
    "noniid_null",
    "gamma_quantile",
    "run_test",
    "exact_binomial_power",
    "lyapunov_ratio",
]


class StatisticKind(str, Enum):
    RAW_FISHER = "raw"
    MEAN_CHI = "meanchi"
    MEDIAN_CHI = "medchi"


class NullKind(str, Enum):
    CHISQ_2N = "chisq"
    OPTIMAL_GAMMA = "gamma"


@dataclass(frozen=True)
class GammaParams:
    """Gamma law by shape and scale."""

    shape: float
    scale: float

    def __post_init__(self) -> None:
        if not (self.shape > 0 and self.scale > 0 and math.isfinite(self.shape) and math.isfinite(self.scale)):
            raise DomainError(f"gamma parameters must be finite and positive, got ({self.shape}, {self.scale})")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale**2

    def cdf(self, x: float) -> float:
        return 0.0 if x <= 0 else special.reg_lower_gamma(self.shape, x / self.scale)

    def sf(self, x: float) -> float:
        return 1.0 if x <= 0 else special.reg_upper_gamma(self.shape, x / self.scale)

    def pdf(self, x: float) -> float:
        return math.exp(special.gamma_log_density(x, self.shape, self.scale)) if x > 0 else 0.0

    def quantile(self, p: float) -> float:
        return gamma_quantile(self.shape, self.scale, p)


@lru_cache(maxsize=4096)
def gamma_quantile(shape: float, scale: float, p: float) -> float:
    """q_{p; shape, scale}, memoized since simulations reuse a handful."""
    return scale * special.inv_reg_lower_gamma(shape, p)


@dataclass(frozen=True)
class TestReport:
    """Outcome of one combination test.

    ``pvalue`` is the upper tail P(null >= value); ``lower_tail`` is
    P(null <= value), reported for the all-ones illustration.
    """

    __test__ = False  # not a pytest class

    statistic_kind: StatisticKind
    value: float
    null_kind: NullKind
    null_params: GammaParams
    pvalue: float
    lower_tail: float
    alpha: float
    critical_value: float
    reject: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["statistic_kind"] = self.statistic_kind.value
        out["null_kind"] = self.null_kind.value
        return out


def fisher_raw(pvalues: Sequence[float]) -> float:
    """Fisher's T_n = -2 sum log P_j."""
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        raise DomainError("need at least one p-value")
    if np.any(~(p > 0)) or np.any(p > 1):
        raise DomainError("p-values must lie in (0, 1]")
    return float(-2.0 * math.fsum(np.log(p))) + 0.0


def combine_adjusted(tables: Sequence[AdjustedTable], observed: Sequence[int]) -> float:
    """Sum of adjusted values, one table lookup per test."""
    if len(tables) != len(observed):
        raise DomainError(f"{len(tables)} tables but {len(observed)} observations")
    total = []
    for table, i in zip(tables, observed):
        if int(i) != i or not (0 <= i < table.values.size):
            raise SupportLookupError(f"index {i!r} outside a table of size {table.values.size}")
        total.append(table.values[int(i)])
    return math.fsum(total)


def optimal_gamma(mean: float, variance: float) -> GammaParams:
    """Moment-matched gamma: shape mean^2/variance, scale variance/mean."""
    if not (mean > 0 and variance > 0):
        raise DomainError(f"mean and variance must be positive, got ({mean}, {variance})")
    return GammaParams(mean * mean / variance, variance / mean)


def chisq_null(n: int) -> GammaParams:
    """chi2 with 2n degrees of freedom, as Gamma(n, 2)."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    return GammaParams(float(n), 2.0)


def iid_null(kind: StatisticKind, moments: AdjustMoments, n: int) -> GammaParams:
    """Null law of the sum of n i.i.d. adjusted statistics."""
    kind = StatisticKind(kind)
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if kind is StatisticKind.MEAN_CHI:
        nu = moments.var_meanchi
        if not nu > 0:
            raise DomainError("degenerate null: the adjusted statistic has zero variance")
        return GammaParams(4.0 * n / nu, nu / 2.0)
    if kind is StatisticKind.MEDIAN_CHI:
        m, v = moments.mean_medchi, moments.var_medchi
        if not (v > 0 and m > 0):
            raise DomainError("degenerate null: the adjusted statistic has zero variance")
        return GammaParams(n * m * m / v, v / m)
    return chisq_null(n)


def noniid_null(kind: StatisticKind, moments_list: Sequence[AdjustMoments], n: int | None = None) -> GammaParams:
    """Gamma null built from the moments averaged over ``moments_list``.

    Each entry is weighted equally. ``n`` defaults to the list length; pass it
    explicitly when the list holds the distinct settings of a design that
    uses them with equal frequency.
    """
    kind = StatisticKind(kind)
    if len(moments_list) == 0:
        raise DomainError("moments_list is empty")
    n = len(moments_list) if n is None else int(n)
    mean = AdjustMoments(
        2.0,
        float(np.mean([mo.var_meanchi for mo in moments_list])),
        float(np.mean([mo.mean_medchi for mo in moments_list])),
        float(np.mean([mo.var_medchi for mo in moments_list])),
    )
    return iid_null(kind, mean, n)


def run_test(
    statistic_value: float,
    null_params: GammaParams,
    alpha: float,
    kind: StatisticKind = StatisticKind.MEAN_CHI,
    null_kind: NullKind = NullKind.OPTIMAL_GAMMA,
) -> TestReport:
    """Reject when the statistic reaches the (1 - alpha) null quantile."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    q = null_params.quantile(1.0 - alpha)
    value = float(statistic_value)
    return TestReport(
        statistic_kind=StatisticKind(kind),
        value=value,
        null_kind=NullKind(null_kind),
        null_params=null_params,
        pvalue=null_params.sf(value),
        lower_tail=null_params.cdf(value),
        alpha=float(alpha),
        critical_value=q,
        reject=value >= q,
    )


def _log_binom_pmf(N: int, theta: float) -> np.ndarray:
    k = np.arange(N + 1)
    log_c = np.array([special.log_gamma(N + 1.0) - special.log_gamma(i + 1.0) - special.log_gamma(N - i + 1.0) for i in k])
    return log_c + k * math.log(theta) + (N - k) * math.log1p(-theta)


def exact_binomial_power(n: int, K: int, theta0: float, theta: float, alpha: float) -> float:
    """Power at theta of the exact left-sided test on sum X_j ~ Binomial(nK, theta)."""
    if n < 1 or K < 1:
        raise DomainError("n and K must be positive")
    for name, v in (("theta0", theta0), ("theta", theta), ("alpha", alpha)):
        if not (0.0 < v < 1.0):
            raise DomainError(f"{name} must lie in (0, 1), got {v!r}")
    N = n * K
    null_pmf = np.exp(_log_binom_pmf(N, theta0))
    cdf = np.cumsum(null_pmf)
    admissible = np.nonzero(cdf <= alpha)[0]
    if admissible.size == 0:
        return 0.0
    k_crit = int(admissible[-1])
    alt = np.exp(_log_binom_pmf(N, theta)[: k_crit + 1])
    return float(min(math.fsum(alt), 1.0))


def lyapunov_ratio(tables: Sequence[AdjustedTable], delta: float = 1.0) -> float:
    """sum_j E|Z_j - mu_j|^{2+delta} / (sum_j Var Z_j)^{1 + delta/2}."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    num = 0.0
    var = 0.0
    for t in tables:
        mu = t.mean()
        dev = np.abs(t.values - mu)
        num += float(np.dot(t.base.masses, dev ** (2.0 + delta)))
        var += float(np.dot(t.base.masses, dev * dev))
    if var <= 0.0:
        raise DomainError("total variance is zero")
    return num / var ** (1.0 + delta / 2.0)
