"""Discrete input-statistic laws, continuous targets and left p-values."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from . import special
from .errors import DomainError, SupportLookupError

__all__ = [
    "DiscreteDist",
    "TargetKind",
    "ContinuousTarget",
    "UNIFORM01",
    "CHISQ2",
    "make_binomial",
    "make_fisher_nchg",
    "make_atom",
    "left_pvalue_dist",
    "observed_left_pvalue",
    "read_csv_dist",
]

log = logging.getLogger(__name__)

MIN_MASS = 1e-300


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """A finite discrete law on a strictly increasing support.

    ``cdf[i]`` is F_i = P(X <= x_i) and ``sf[i]`` is P(X > x_i). Both are
    stored because upper-tail cells lose every digit when written as 1 - F.
    Formulas downstream use ``(cdf_prev, masses)`` rather than differencing
    ``cdf``, which can repeat in floating point when masses are tiny.
    """

    support: np.ndarray
    masses: np.ndarray
    cdf: np.ndarray
    sf: np.ndarray

    @classmethod
    def from_masses(cls, support: Sequence[float], masses: Sequence[float]) -> "DiscreteDist":
        x = np.asarray(support, dtype=float).ravel()
        w = np.asarray(masses, dtype=float).ravel()
        if x.size == 0 or x.size != w.size:
            raise DomainError("support and masses must be non-empty and of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise DomainError("support and masses must be finite")
        if np.any(w < 0):
            raise DomainError("masses must be non-negative")
        if np.any(np.diff(x) <= 0):
            raise DomainError("support must be strictly increasing")
        total = math.fsum(w)
        if total <= 0:
            raise DomainError("masses sum to zero")
        w = w / total
        keep = w >= MIN_MASS
        x, w = x[keep], w[keep]
        w = w / math.fsum(w)
        cdf = np.cumsum(w)
        cdf[-1] = 1.0
        # P(X > x_i), summed from the top so the tail keeps full precision.
        sf = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
        np.minimum(cdf, 1.0, out=cdf)
        return cls(_frozen(x), _frozen(w), _frozen(cdf), _frozen(sf))

    def __len__(self) -> int:
        return self.support.size

    @property
    def cdf_prev(self) -> np.ndarray:
        """F_{i-1}, with F_0 = 0."""
        return np.concatenate([[0.0], self.cdf[:-1]])

    @property
    def sf_prev(self) -> np.ndarray:
        """P(X >= x_i) = 1 - F_{i-1}."""
        return self.sf + self.masses

    def mean(self) -> float:
        return float(np.dot(self.masses, self.support))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot(self.masses, (self.support - mu) ** 2))

    def index_of(self, x: float) -> int:
        """Index of ``x`` in the support (exact match, else 1e-12 relative)."""
        i = int(np.searchsorted(self.support, x))
        for j in (i, i - 1):
            if 0 <= j < self.support.size and (
                self.support[j] == x or math.isclose(self.support[j], x, rel_tol=1e-12, abs_tol=1e-300)
            ):
                return j
        raise SupportLookupError(f"{x!r} is not in the support")

    def __repr__(self) -> str:
        return f"DiscreteDist(n_atoms={self.support.size}, support=[{self.support[0]:g}..{self.support[-1]:g}])"


class TargetKind(str, Enum):
    UNIFORM01 = "uniform01"
    CHISQ2 = "chisq2"
    GAMMA = "gamma"


@dataclass(frozen=True)
class ContinuousTarget:
    """Continuous law Y with density, CDF and quantile.

    ``ChiSq2`` is Gamma(1, 2) but keeps its own kind so the closed forms
    for the mean-value statistic can be used.
    """

    kind: TargetKind
    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind is TargetKind.GAMMA:
            if not (self.shape > 0 and self.scale > 0 and math.isfinite(self.shape) and math.isfinite(self.scale)):
                raise DomainError(f"gamma parameters must be positive, got ({self.shape}, {self.scale})")

    @classmethod
    def gamma(cls, shape: float, scale: float) -> "ContinuousTarget":
        return cls(TargetKind.GAMMA, float(shape), float(scale))

    @property
    def gamma_params(self) -> tuple[float, float]:
        if self.kind is TargetKind.CHISQ2:
            return 1.0, 2.0
        if self.kind is TargetKind.GAMMA:
            return self.shape, self.scale
        raise DomainError("uniform target has no gamma parameters")

    @property
    def is_gamma_family(self) -> bool:
        return self.kind is not TargetKind.UNIFORM01

    @property
    def lower(self) -> float:
        return 0.0

    @property
    def upper(self) -> float:
        return 1.0 if self.kind is TargetKind.UNIFORM01 else math.inf

    def mean(self) -> float:
        if self.kind is TargetKind.UNIFORM01:
            return 0.5
        a, b = self.gamma_params
        return a * b

    def variance(self) -> float:
        if self.kind is TargetKind.UNIFORM01:
            return 1.0 / 12.0
        a, b = self.gamma_params
        return a * b * b

    def pdf(self, y: float) -> float:
        if self.kind is TargetKind.UNIFORM01:
            return 1.0 if 0.0 <= y <= 1.0 else 0.0
        if y <= 0.0:
            return 0.0
        a, b = self.gamma_params
        return math.exp(special.gamma_log_density(y, a, b))

    def cdf(self, y: float) -> float:
        if self.kind is TargetKind.UNIFORM01:
            return min(max(y, 0.0), 1.0)
        if y <= 0.0:
            return 0.0
        a, b = self.gamma_params
        return special.reg_lower_gamma(a, y / b)

    def sf(self, y: float) -> float:
        if self.kind is TargetKind.UNIFORM01:
            return 1.0 - min(max(y, 0.0), 1.0)
        if y <= 0.0:
            return 1.0
        a, b = self.gamma_params
        return special.reg_upper_gamma(a, y / b)

    def quantile(self, w: float) -> float:
        """G^{-1}(w); endpoints map to the support endpoints."""
        if not (0.0 <= w <= 1.0):
            raise DomainError(f"quantile level must lie in [0, 1], got {w!r}")
        if self.kind is TargetKind.UNIFORM01:
            return float(w)
        if w == 0.0:
            return 0.0
        if w == 1.0:
            return math.inf
        if self.kind is TargetKind.CHISQ2:
            return -2.0 * math.log1p(-w)
        a, b = self.gamma_params
        return b * special.inv_reg_lower_gamma(a, w)

    def isf(self, s: float) -> float:
        """Inverse survival function: y with P(Y > y) = s."""
        if not (0.0 <= s <= 1.0):
            raise DomainError(f"survival level must lie in [0, 1], got {s!r}")
        if self.kind is TargetKind.UNIFORM01:
            return 1.0 - s
        if s == 0.0:
            return math.inf
        if s == 1.0:
            return 0.0
        if self.kind is TargetKind.CHISQ2:
            return -2.0 * math.log(s)
        a, b = self.gamma_params
        return b * special.inv_reg_upper_gamma(a, s)

    def cell_endpoint(self, w: float, s: float) -> float:
        """Quantile at level w = 1 - s, using whichever side is accurate."""
        if w <= 0.5:
            return self.quantile(w)
        return self.isf(s)

    def partial_moment(self, k: float, lo: float, hi: float) -> float:
        """Closed-form integral of y**k * g(y) over [lo, hi] (k > -shape)."""
        if hi <= lo:
            return 0.0
        if self.kind is TargetKind.UNIFORM01:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
            if hi <= lo:
                return 0.0
            return (hi ** (k + 1.0) - lo ** (k + 1.0)) / (k + 1.0)
        a, b = self.gamma_params
        if k <= -a:
            raise DomainError(f"moment of order {k} diverges for shape {a}")
        ak = a + k
        factor = math.exp(k * math.log(b) + special.log_gamma(ak) - special.log_gamma(a))
        return factor * _gamma_interval_prob(ak, lo / b, hi / b)

    def __str__(self) -> str:
        if self.kind is TargetKind.GAMMA:
            return f"gamma:{self.shape:g},{self.scale:g}"
        return self.kind.value


def _gamma_interval_prob(a: float, lo: float, hi: float) -> float:
    """P(lo <= G <= hi) for G ~ Gamma(a, 1), differencing the accurate tail."""
    lo_res = special.reg_lower_gamma_result(a, lo)
    hi_res = special.reg_lower_gamma_result(a, hi) if math.isfinite(hi) else special.RegularizedGammaResult(1.0, 0, True, 0.0)
    if lo_res.value > 0.5:
        return max(lo_res.upper - hi_res.upper, 0.0)
    return max(hi_res.value - lo_res.value, 0.0)


UNIFORM01 = ContinuousTarget(TargetKind.UNIFORM01)
CHISQ2 = ContinuousTarget(TargetKind.CHISQ2)


def _from_log_weights(support: np.ndarray, logw: np.ndarray) -> DiscreteDist:
    w = np.exp(logw - logw.max())
    return DiscreteDist.from_masses(support, w)


def make_binomial(K: int, theta: float) -> DiscreteDist:
    """Binomial(K, theta) on {0, ..., K}, masses accumulated in log space."""
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    K = int(K)
    if not (0.0 < theta < 1.0):
        raise DomainError(f"theta must lie in (0, 1), got {theta!r}")
    k = np.arange(K + 1)
    log_c = np.array([math.log(math.comb(K, int(i))) for i in k])
    logw = log_c + k * math.log(theta) + (K - k) * math.log1p(-theta)
    return _from_log_weights(k.astype(float), logw)


def make_fisher_nchg(m: int, M: int, K: int, omega: float) -> DiscreteDist:
    """Fisher's noncentral hypergeometric law of x given the margin K.

    Mass at x is proportional to C(m, x) C(M, K - x) omega**x on
    max(0, K - M) <= x <= min(K, m).
    """
    for name, v in (("m", m), ("M", M), ("K", K)):
        if int(v) != v or v < 1:
            raise DomainError(f"{name} must be a positive integer, got {v!r}")
    m, M, K = int(m), int(M), int(K)
    if K > m + M:
        raise DomainError(f"K={K} exceeds m + M = {m + M}")
    if not (omega > 0 and math.isfinite(omega)):
        raise DomainError(f"omega must be positive, got {omega!r}")
    x = np.arange(max(0, K - M), min(K, m) + 1)
    log_omega = math.log(omega)
    logw = np.array(
        [math.log(math.comb(m, int(i))) + math.log(math.comb(M, K - int(i))) + int(i) * log_omega for i in x]
    )
    return _from_log_weights(x.astype(float), logw)


def make_atom(x: float) -> DiscreteDist:
    """Point mass at x."""
    return DiscreteDist.from_masses([x], [1.0])


def left_pvalue_dist(d: DiscreteDist) -> DiscreteDist:
    """Law of the left-tailed p-value P = F_i (mass p_i at F_i).

    Upper-tail CDF values that coincide in floating point are merged; the
    merged masses are below double resolution relative to one.
    """
    values, inverse = np.unique(d.cdf, return_inverse=True)
    if values.size == len(d):
        # nothing merged: keep the masses bit-for-bit
        return DiscreteDist(d.cdf, d.masses, d.cdf, d.sf)
    masses = np.bincount(inverse, weights=d.masses)
    return DiscreteDist.from_masses(values, masses)


def observed_left_pvalue(d: DiscreteDist, x: float) -> float:
    """F_i for the support point x."""
    return float(d.cdf[d.index_of(x)])


def read_csv_dist(path: str | Path) -> DiscreteDist:
    """Read a tabulated law from a CSV with an ``x,mass`` header.

    Lines starting with ``#`` are ignored and extra columns are allowed.
    Masses are renormalized, with a warning when they were off by > 1e-6.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [line for line in fh if line.strip() and not line.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or "x" not in reader.fieldnames or "mass" not in reader.fieldnames:
        raise DomainError(f"{path}: CSV must have a header with 'x' and 'mass' columns")
    xs, ws = [], []
    for row in reader:
        try:
            xs.append(float(row["x"]))
            ws.append(float(row["mass"]))
        except (TypeError, ValueError) as exc:
            raise DomainError(f"{path}: malformed row {row!r}") from exc
    if not xs:
        raise DomainError(f"{path}: no data rows")
    total = math.fsum(ws)
    if abs(total - 1.0) > 1e-6:
        log.warning("%s: masses sum to %.12g, normalizing", path, total)
    order = np.argsort(xs, kind="stable")
    return DiscreteDist.from_masses(np.asarray(xs)[order], np.asarray(ws)[order])
