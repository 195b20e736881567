"""Combining discrete p-values with Wasserstein-optimal adjustments and gamma nulls."""

from .adjust import (
    AdjustMoments,
    adjust_moments,
    mean_value_chi2,
    meanchi_table,
    median_value_chi2,
    medchi_table,
    midp,
    midp_table,
)
from .combine import (
    GammaParams,
    NullKind,
    StatisticKind,
    TestReport,
    chisq_null,
    combine_adjusted,
    exact_binomial_power,
    fisher_raw,
    iid_null,
    lyapunov_ratio,
    noniid_null,
    optimal_gamma,
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
    observed_left_pvalue,
    read_csv_dist,
)
from .errors import ContractError, DomainError, NumericError, SupportLookupError
from .transport import (
    AdjustedTable,
    optimal_adjust,
    transport_cost,
    w2_gap,
    wasserstein_p,
)

__version__ = "0.1.0"
