import math

import numpy as np
import pytest
from scipy import integrate

from oracles import random_dist, random_target, raw_moment
from wfisher import (
    CHISQ2,
    UNIFORM01,
    ContinuousTarget,
    DiscreteDist,
    left_pvalue_dist,
    make_atom,
    make_binomial,
    meanchi_table,
    medchi_table,
    midp_table,
)
from wfisher.adjust import neg2log_dist
from wfisher.errors import ContractError, DomainError
from wfisher.transport import (
    coupling_covariance,
    lower_bound_general,
    lower_bound_meanchi,
    lower_bound_medianchi,
    optimal_adjust,
    partition,
    transport_cost,
    w2_from_moments,
    w2_gap,
    wasserstein_p,
)

SEEDS = range(50)


def uniform_grid(K: int) -> DiscreteDist:
    return DiscreteDist.from_masses(np.arange(K, dtype=float), np.full(K, 1.0 / K))


# -- distances ------------------------------------------------------------------


def test_atom_vs_uniform():
    assert transport_cost(make_atom(0.5), UNIFORM01) == pytest.approx(1 / 12, abs=1e-12)


def test_atom_at_two_vs_chisq2():
    assert transport_cost(make_atom(2.0), CHISQ2) == pytest.approx(4.0, abs=1e-9)


def test_step_meanchi_distance(step_grid):
    z = meanchi_table(step_grid).as_dist()
    assert transport_cost(z, CHISQ2) == pytest.approx(1.2479188, abs=1e-7)


def test_wasserstein_p_is_root_of_cost():
    d = make_binomial(4, 0.3)
    assert wasserstein_p(d, CHISQ2, 3.0) == pytest.approx(transport_cost(d, CHISQ2, 3.0) ** (1 / 3), rel=1e-14)


def test_quantile_space_oracle():
    # Independent route: integrate |x(w) - G^{-1}(w)|^p over w in (0, 1).
    d = DiscreteDist.from_masses([0.2, 1.1, 3.0], [0.3, 0.5, 0.2])
    y = ContinuousTarget.gamma(2.3, 1.7)
    F = np.r_[0.0, d.cdf]
    for p in (1.5, 2.0, 3.0):
        ref = sum(
            integrate.quad(lambda w: abs(x - y.quantile(w)) ** p, a, b, epsabs=1e-12, limit=200)[0]
            for x, a, b in zip(d.support, F[:-1], F[1:])
        )
        assert transport_cost(d, y, p) == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("p", [1.0, 0.5, 8.5, float("nan")])
def test_order_domain(p):
    with pytest.raises(DomainError):
        transport_cost(make_atom(1.0), UNIFORM01, p)


def test_random_six_atoms_vs_gamma_covariance():
    rng = np.random.default_rng(6)
    d = DiscreteDist.from_masses(np.sort(rng.uniform(0, 8, 6)), rng.dirichlet(np.ones(6)))
    y = ContinuousTarget.gamma(2.3, 1.7)
    assert w2_from_moments(d, y) == pytest.approx(transport_cost(d, y), abs=1e-7)


@pytest.mark.parametrize("seed", range(20))
def test_covariance_identity_random(seed):
    rng = np.random.default_rng(1000 + seed)
    d, y = random_dist(rng), random_target(rng)
    assert w2_from_moments(d, y) == pytest.approx(transport_cost(d, y), abs=1e-7)


# -- coupling -------------------------------------------------------------------


def test_single_atom_covariance_is_zero():
    assert coupling_covariance(make_atom(3.0), CHISQ2) == pytest.approx(0.0, abs=1e-12)


def test_binomial_pvalues_covariance_vs_quadrature():
    p = left_pvalue_dist(make_binomial(5, 0.5))
    assert w2_from_moments(p, UNIFORM01) == pytest.approx(transport_cost(p, UNIFORM01), abs=1e-7)


def test_midp_covariance_equals_variance():
    d = make_binomial(7, 0.3)
    z = midp_table(d).as_dist()
    assert coupling_covariance(z, UNIFORM01) == pytest.approx(z.variance(), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_partition_invariants(seed):
    rng = np.random.default_rng(seed)
    d, y = random_dist(rng), random_target(rng)
    part = partition(d, y)
    assert part.lo[0] == y.lower and part.hi[-1] == y.upper
    np.testing.assert_array_equal(part.lo[1:], part.hi[:-1])
    np.testing.assert_allclose(part.target_probabilities(y), d.masses, atol=1e-9)


# -- optimal adjustment ------------------------------------------------------------


def test_uniform_p2_gives_midp():
    d = make_binomial(6, 0.35)
    pv = left_pvalue_dist(d)
    z = optimal_adjust(pv, UNIFORM01, 2.0)
    np.testing.assert_allclose(z.values, midp_table(d).values, atol=1e-15)


def test_chisq_p2_gives_meanchi():
    for d in (make_binomial(5, 0.1), make_binomial(20, 0.5), make_binomial(10, 0.01)):
        z = optimal_adjust(neg2log_dist(d), CHISQ2, 2.0)
        np.testing.assert_allclose(z.values[::-1], meanchi_table(d).values, atol=1e-9)


def test_single_cell_p3():
    z = optimal_adjust(make_atom(0.0), UNIFORM01, 3.0)
    assert z.values[0] == pytest.approx(math.sqrt(1 / 3), rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.5, 4.0])
def test_closed_form_matches_quadrature(p):
    d = make_binomial(6, 0.4)
    y = ContinuousTarget.gamma(1.7, 0.8)
    a = optimal_adjust(d, y, p, method="closed")
    b = optimal_adjust(d, y, p, method="quad")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-8)


def test_unknown_method():
    with pytest.raises(DomainError):
        optimal_adjust(make_atom(1.0), UNIFORM01, 2.0, method="magic")


@pytest.mark.parametrize("seed", SEEDS)
def test_gap_identity(seed):
    rng = np.random.default_rng(seed)
    d, y = random_dist(rng), random_target(rng)
    table = optimal_adjust(d, y, 2.0)
    quad = transport_cost(table.as_dist(), y)
    assert abs(quad - w2_gap(table, y)) <= 1e-7
    assert abs(quad - w2_from_moments(table.as_dist(), y)) <= 1e-7


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_cell_membership_and_monotonicity(seed, p):
    rng = np.random.default_rng(seed)
    d, y = random_dist(rng), random_target(rng)
    table = optimal_adjust(d, y, p)
    part = partition(d, y)
    assert np.all(part.lo <= table.values) and np.all(table.values <= part.hi)
    assert np.all(np.diff(table.values) > 0)


@pytest.mark.parametrize("seed", range(20))
def test_bias_and_variance_contraction(seed):
    rng = np.random.default_rng(seed)
    d, y = random_dist(rng), random_target(rng)
    EY = y.mean()
    for p in (1.5, 2.0, 3.0):
        table = optimal_adjust(d, y, p)
        mean = table.mean()
        if p == 2.0:
            assert mean == pytest.approx(EY, abs=1e-9)
        elif p < 2.0:
            assert mean < EY
        else:
            assert mean > EY
        k = p - 1.0
        zk = table.values**k
        var_zk = float(np.dot(d.masses, zk**2) - np.dot(d.masses, zk) ** 2)
        var_yk = raw_moment(y, 2 * k) - raw_moment(y, k) ** 2
        assert var_zk < var_yk


def _jitter(table, part, rng):
    lo, hi = part.lo, part.hi
    u = rng.uniform(0.01, 0.99, lo.size)
    width = np.where(np.isinf(hi), 1.0, hi - lo)
    out = lo + u * width
    return out


@pytest.mark.parametrize("seed", SEEDS)
def test_optimality_against_jitter(seed):
    rng = np.random.default_rng(5000 + seed)
    d, y = random_dist(rng, max_atoms=6), random_target(rng)
    table = optimal_adjust(d, y, 2.0)
    best = transport_cost(table.as_dist(), y)
    part = partition(d, y)
    for _ in range(50):
        v = _jitter(table, part, rng)
        if np.any(np.diff(v) <= 0):
            continue
        assert transport_cost(DiscreteDist.from_masses(v, d.masses), y) >= best - 1e-10


# -- gap -------------------------------------------------------------------------


def test_gap_binomial_meanchi():
    assert w2_gap(meanchi_table(make_binomial(5, 0.1)), CHISQ2) == pytest.approx(2.39, abs=0.01)


def test_gap_midp_formula():
    d = make_binomial(5, 0.3)
    F, Fp = d.cdf, d.cdf_prev
    ref = 1 / 12 - np.sum(F * Fp * (F - Fp)) / 4
    assert w2_gap(midp_table(d), UNIFORM01) == pytest.approx(ref, abs=1e-14)


def test_gap_decreases_with_finer_grids():
    gaps = [w2_gap(optimal_adjust(uniform_grid(K), CHISQ2), CHISQ2) for K in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_gap_contract_errors():
    d = make_binomial(5, 0.3)
    with pytest.raises(ContractError):
        w2_gap(meanchi_table(d), UNIFORM01)
    with pytest.raises(ContractError):
        w2_gap(medchi_table(d), CHISQ2)
    with pytest.raises(ContractError):
        w2_gap(optimal_adjust(d, CHISQ2, 3.0), CHISQ2)


# -- lower bounds ------------------------------------------------------------------


def test_step_bounds(step_grid):
    pv = left_pvalue_dist(step_grid)
    z = meanchi_table(step_grid).as_dist()
    assert lower_bound_general(z, CHISQ2) == pytest.approx(1.2436, abs=1e-4)
    assert lower_bound_meanchi(pv) == pytest.approx(1.2436, abs=1e-4)
    assert lower_bound_medianchi(pv) == pytest.approx(1.32, abs=5e-3)


def test_closed_form_bound_value(step_grid):
    ref = 4 * (0.9 - 0.1 * math.log(0.1) ** 2 / 0.9)
    assert lower_bound_meanchi(left_pvalue_dist(step_grid)) == pytest.approx(ref, rel=1e-13)


def test_single_atom_at_mean():
    y = ContinuousTarget.gamma(2.0, 1.5)
    assert lower_bound_general(make_atom(y.mean()), y) == pytest.approx(y.variance(), rel=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_general_bound_below_distance(seed):
    rng = np.random.default_rng(900 + seed)
    d, y = random_dist(rng), random_target(rng)
    assert lower_bound_general(d, y) <= transport_cost(d, y) + 1e-10


def test_meanchi_bound_decreases():
    vals = [lower_bound_meanchi(left_pvalue_dist(uniform_grid(K))) for K in (4, 16, 64)]
    assert vals[0] > vals[1] > vals[2]


def test_two_point_cross_check():
    d = DiscreteDist.from_masses([0, 1], [0.5, 0.5])
    pv = left_pvalue_dist(d)
    assert lower_bound_meanchi(pv) == pytest.approx(lower_bound_general(meanchi_table(d).as_dist(), CHISQ2), abs=1e-9)
    assert lower_bound_medianchi(pv) == pytest.approx(lower_bound_general(medchi_table(d).as_dist(), CHISQ2), abs=1e-9)


@pytest.mark.parametrize("d", [make_binomial(5, 0.1), make_binomial(10, 0.5), uniform_grid(7)])
def test_median_bound_dominates_and_bounds(d):
    pv = left_pvalue_dist(d)
    assert lower_bound_medianchi(pv) >= lower_bound_meanchi(pv)
    assert lower_bound_meanchi(pv) <= transport_cost(meanchi_table(d).as_dist(), CHISQ2) + 1e-10
    assert lower_bound_medianchi(pv) <= transport_cost(medchi_table(d).as_dist(), CHISQ2) + 1e-10


def test_fine_grid_bounds_converge():
    pv = left_pvalue_dist(uniform_grid(10_000))
    assert 0.0 <= lower_bound_medianchi(pv) - lower_bound_meanchi(pv) < 1e-3
