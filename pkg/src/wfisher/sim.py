"""Seeded Monte Carlo engine for type I error, power and null histograms.

Random numbers come from numpy's Philox4x64 counter-based generator keyed by
the seed. Replicate r owns counter blocks [r*B, (r+1)*B) with
B = ceil(n_tests / 4), so its uniforms depend only on (seed, r). Any split of
the replicate range across calls or threads reproduces the same draws.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .adjust import adjust_moments, meanchi_table, medchi_table
from .combine import (
    GammaParams,
    NullKind,
    StatisticKind,
    chisq_null,
    exact_binomial_power,
    noniid_null,
)
from .dist import DiscreteDist, make_binomial, make_fisher_nchg
from .errors import ContractError, DomainError

__all__ = [
    "IIDBinomial",
    "IIDHypergeometric",
    "NonIIDBinomial",
    "BINOMIAL_SETTINGS",
    "SimConfig",
    "RateRow",
    "SimResult",
    "HistogramTable",
    "simulate_type1",
    "simulate_power",
    "simulate_histogram",
    "uniforms",
]

BINOMIAL_SETTINGS: tuple[tuple[int, float], ...] = tuple(
    (K, th) for K in (5, 10, 20) for th in (0.01, 0.1, 0.5)
)

# Cap on uniforms held in memory per shard.
_SHARD_DRAWS = 4_000_000


@dataclass(frozen=True)
class IIDBinomial:
    K: int
    theta0: float
    theta: float | None = None

    @property
    def alt_theta(self) -> float:
        return self.theta0 if self.theta is None else self.theta

    def is_null(self) -> bool:
        return self.alt_theta == self.theta0

    def settings(self) -> list[tuple[DiscreteDist, DiscreteDist]]:
        null = make_binomial(self.K, self.theta0)
        alt = null if self.is_null() else make_binomial(self.K, self.alt_theta)
        return [(null, alt)]


@dataclass(frozen=True)
class IIDHypergeometric:
    m: int
    M: int
    K: int
    omega: float = 1.0

    def is_null(self) -> bool:
        return self.omega == 1.0

    def settings(self) -> list[tuple[DiscreteDist, DiscreteDist]]:
        null = make_fisher_nchg(self.m, self.M, self.K, 1.0)
        alt = null if self.is_null() else make_fisher_nchg(self.m, self.M, self.K, self.omega)
        return [(null, alt)]


@dataclass(frozen=True)
class NonIIDBinomial:
    """Test j uses setting j mod len(settings); alternatives scale theta by kappa."""

    settings_list: tuple[tuple[int, float], ...] = BINOMIAL_SETTINGS
    kappa: float = 1.0

    def is_null(self) -> bool:
        return self.kappa == 1.0

    def settings(self) -> list[tuple[DiscreteDist, DiscreteDist]]:
        out = []
        for K, th in self.settings_list:
            null = make_binomial(K, th)
            if self.is_null():
                out.append((null, null))
            else:
                alt_th = self.kappa * th
                if not (0.0 < alt_th < 1.0):
                    raise DomainError(f"kappa * theta0 = {alt_th} is outside (0, 1)")
                out.append((null, make_binomial(K, alt_th)))
        return out


Scenario = Union[IIDBinomial, IIDHypergeometric, NonIIDBinomial]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings. ``first_rep`` offsets the replicate counter."""

    n_tests: int
    n_reps: int
    seed: int
    alpha_levels: tuple[float, ...]
    scenario: Scenario
    first_rep: int = 0
    include_raw: bool = False
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.n_tests < 1 or self.n_reps < 1:
            raise DomainError("n_tests and n_reps must be at least 1")
        if self.first_rep < 0:
            raise DomainError("first_rep must be non-negative")
        if not self.alpha_levels or not all(0.0 < a < 1.0 for a in self.alpha_levels):
            raise DomainError("alpha levels must lie in (0, 1)")
        if not (0 <= self.seed < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class RateRow:
    statistic: StatisticKind
    null: NullKind
    alpha: float
    rejections: int
    n_reps: int
    critical_value: float

    @property
    def rate(self) -> float:
        return self.rejections / self.n_reps

    @property
    def se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.n_reps)


@dataclass
class SimResult:
    rows: list[RateRow]
    n_reps: int
    null_params: dict[tuple[StatisticKind, NullKind], GammaParams]
    exact_power: dict[float, float] = field(default_factory=dict)

    def rate(self, statistic, null, alpha: float) -> float:
        return self.row(statistic, null, alpha).rate

    def row(self, statistic, null, alpha: float) -> RateRow:
        statistic, null = StatisticKind(statistic), NullKind(null)
        for r in self.rows:
            if r.statistic is statistic and r.null is null and r.alpha == alpha:
                return r
        raise KeyError((statistic, null, alpha))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "null", "alpha", "rate", "se"])
        for r in self.rows:
            w.writerow([r.statistic.value, r.null.value, repr(r.alpha), repr(r.rate), repr(r.se)])
        for a, p in self.exact_power.items():
            w.writerow(["exact", "binomial", repr(a), repr(p), "0.0"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_reps": self.n_reps,
                "rows": [
                    {
                        "statistic": r.statistic.value,
                        "null": r.null.value,
                        "alpha": r.alpha,
                        "rate": r.rate,
                        "se": r.se,
                        "critical_value": r.critical_value,
                    }
                    for r in self.rows
                ],
                "exact_power": {repr(a): p for a, p in self.exact_power.items()},
            },
            indent=2,
        )


@dataclass
class HistogramTable:
    edges: np.ndarray
    density_s: np.ndarray
    density_stilde: np.ndarray
    gamma_pdf: np.ndarray
    gamma_pdf_stilde: np.ndarray
    chisq_pdf: np.ndarray
    samples_s: np.ndarray = field(repr=False)
    samples_stilde: np.ndarray = field(repr=False)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "density_Sn", "density_Stilde", "gamma_pdf", "chisq_pdf", "gamma_pdf_Stilde"])
        for i in range(self.density_s.size):
            w.writerow(
                [
                    repr(float(self.edges[i])),
                    repr(float(self.edges[i + 1])),
                    repr(float(self.density_s[i])),
                    repr(float(self.density_stilde[i])),
                    repr(float(self.gamma_pdf[i])),
                    repr(float(self.chisq_pdf[i])),
                    repr(float(self.gamma_pdf_stilde[i])),
                ]
            )
        return buf.getvalue()


def _blocks_per_rep(n_tests: int) -> int:
    return -(-n_tests // 4)


def uniforms(seed: int, first_rep: int, n_reps: int, n_tests: int) -> np.ndarray:
    """Uniforms on [0, 1) for replicates first_rep .. first_rep + n_reps - 1.

    Row r depends only on (seed, first_rep + r).
    """
    B = _blocks_per_rep(n_tests)
    bitgen = np.random.Philox(key=seed, counter=first_rep * B)
    raw = bitgen.random_raw(n_reps * B * 4).reshape(n_reps, B * 4)[:, :n_tests]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass
class _Plan:
    n_tests: int
    groups: list[np.ndarray]  # column indices per setting
    alt_cdfs: list[np.ndarray]
    meanchi: list[np.ndarray]
    medchi: list[np.ndarray]
    raw: list[np.ndarray]
    nulls: dict[tuple[StatisticKind, NullKind], GammaParams]


def _plan(cfg: SimConfig) -> _Plan:
    settings = cfg.scenario.settings()
    groups = [np.arange(g, cfg.n_tests, len(settings)) for g in range(len(settings))]
    alt_cdfs, zm, zt, raw, moments = [], [], [], [], []
    for null, alt in settings:
        if not np.array_equal(null.support, alt.support):
            raise ContractError("null and alternative laws must share a support")
        alt_cdfs.append(np.asarray(alt.cdf))
        zm.append(np.asarray(meanchi_table(null).values))
        zt.append(np.asarray(medchi_table(null).values))
        raw.append(-2.0 * np.log(np.asarray(null.cdf)))
        moments.append(adjust_moments(null))
    n = cfg.n_tests
    nulls = {}
    for kind in (StatisticKind.MEAN_CHI, StatisticKind.MEDIAN_CHI):
        nulls[(kind, NullKind.CHISQ_2N)] = chisq_null(n)
        nulls[(kind, NullKind.OPTIMAL_GAMMA)] = noniid_null(kind, moments, n)
    if cfg.include_raw:
        nulls[(StatisticKind.RAW_FISHER, NullKind.CHISQ_2N)] = chisq_null(n)
    return _Plan(n, groups, alt_cdfs, zm, zt, raw, nulls)


def _statistics(plan: _Plan, u: np.ndarray, include_raw: bool) -> dict[StatisticKind, np.ndarray]:
    reps = u.shape[0]
    out = {StatisticKind.MEAN_CHI: np.zeros(reps), StatisticKind.MEDIAN_CHI: np.zeros(reps)}
    if include_raw:
        out[StatisticKind.RAW_FISHER] = np.zeros(reps)
    for g, cols in enumerate(plan.groups):
        if cols.size == 0:
            continue
        cdf = plan.alt_cdfs[g]
        idx = np.searchsorted(cdf, u[:, cols], side="right")
        np.minimum(idx, cdf.size - 1, out=idx)
        out[StatisticKind.MEAN_CHI] += plan.meanchi[g][idx].sum(axis=1)
        out[StatisticKind.MEDIAN_CHI] += plan.medchi[g][idx].sum(axis=1)
        if include_raw:
            out[StatisticKind.RAW_FISHER] += plan.raw[g][idx].sum(axis=1)
    return out


def _workers(cfg: SimConfig) -> int:
    if cfg.workers is not None:
        return max(1, cfg.workers)
    env = os.environ.get("WFISHER_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, min(cap, int(env)))
        except ValueError:
            pass
    return cap


def _shards(cfg: SimConfig) -> list[tuple[int, int]]:
    size = max(1, _SHARD_DRAWS // cfg.n_tests)
    start = cfg.first_rep
    stop = cfg.first_rep + cfg.n_reps
    return [(s, min(s + size, stop)) for s in range(start, stop, size)]


def _run(cfg: SimConfig, keep_samples: bool):
    plan = _plan(cfg)
    crit = {
        (key, a): params.quantile(1.0 - a) for key, params in plan.nulls.items() for a in cfg.alpha_levels
    }
    samples = {k: np.empty(cfg.n_reps) for k in (StatisticKind.MEAN_CHI, StatisticKind.MEDIAN_CHI)} if keep_samples else None

    def work(shard: tuple[int, int]) -> dict:
        lo, hi = shard
        u = uniforms(cfg.seed, lo, hi - lo, cfg.n_tests)
        stats = _statistics(plan, u, cfg.include_raw)
        if samples is not None:
            off = lo - cfg.first_rep
            for k in samples:
                samples[k][off : off + hi - lo] = stats[k]
        return {ka: int(np.count_nonzero(stats[ka[0][0]] >= q)) for ka, q in crit.items()}

    shards = _shards(cfg)
    nworkers = min(_workers(cfg), len(shards))
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            counts = list(pool.map(work, shards))
    else:
        counts = [work(s) for s in shards]
    rows = []
    for (key, a), q in crit.items():
        rows.append(RateRow(key[0], key[1], a, sum(c[(key, a)] for c in counts), cfg.n_reps, q))
    return SimResult(rows, cfg.n_reps, plan.nulls), plan, samples


def simulate_type1(cfg: SimConfig) -> SimResult:
    """Empirical rejection rates of all rules under the null scenario."""
    if not cfg.scenario.is_null():
        raise DomainError("type I simulation needs a null scenario (theta = theta0, omega = 1 or kappa = 1)")
    return _run(cfg, keep_samples=False)[0]


def simulate_power(cfg: SimConfig) -> SimResult:
    """Empirical rejection rates under the scenario's alternative.

    For i.i.d. binomial scenarios the exact-test power is attached.
    """
    result = _run(cfg, keep_samples=False)[0]
    sc = cfg.scenario
    if isinstance(sc, IIDBinomial):
        result.exact_power = {
            a: exact_binomial_power(cfg.n_tests, sc.K, sc.theta0, sc.alt_theta, a) for a in cfg.alpha_levels
        }
    return result


def simulate_histogram(cfg: SimConfig, bins: int = 60) -> HistogramTable:
    """Binned densities of S_n and S~_n on shared bins, with null densities at midpoints."""
    if bins < 10:
        raise DomainError("need at least 10 bins")
    _, plan, samples = _run(cfg, keep_samples=True)
    s = samples[StatisticKind.MEAN_CHI]
    st = samples[StatisticKind.MEDIAN_CHI]
    lo = min(s.min(), st.min())
    hi = max(s.max(), st.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    dens_s, _ = np.histogram(s, bins=edges, density=True)
    dens_st, _ = np.histogram(st, bins=edges, density=True)
    mids = 0.5 * (edges[:-1] + edges[1:])
    g_s = plan.nulls[(StatisticKind.MEAN_CHI, NullKind.OPTIMAL_GAMMA)]
    g_st = plan.nulls[(StatisticKind.MEDIAN_CHI, NullKind.OPTIMAL_GAMMA)]
    chi = chisq_null(cfg.n_tests)
    return HistogramTable(
        edges=edges,
        density_s=dens_s,
        density_stilde=dens_st,
        gamma_pdf=np.array([g_s.pdf(x) for x in mids]),
        gamma_pdf_stilde=np.array([g_st.pdf(x) for x in mids]),
        chisq_pdf=np.array([chi.pdf(x) for x in mids]),
        samples_s=s,
        samples_stilde=st,
    )


def run_many(configs: Sequence[SimConfig]) -> list[SimResult]:
    return [simulate_type1(c) if c.scenario.is_null() else simulate_power(c) for c in configs]
