import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from stochclock.guichardet import (
    Chain,
    IntensityProfile,
    ProductVector,
    TruncatedSectorGrid,
    annihilation_apply,
    creation_apply,
    fock_pseudo_norm_sq,
    grid_exp,
    poisson_law_mass,
    poisson_weight,
    sample_poisson_chain,
    sample_poisson_chains,
    simplex_integrate,
    simplex_nodes,
    vacuum_embedding,
    weyl_on_vacuum,
)
from stochclock.minkowski_clock import FUTURE, TemporalVector

ONE = IntensityProfile.constant(1.0)


# -- chains ---------------------------------------------------------------------

def test_chain_validation():
    Chain(())
    with pytest.raises(ValueError):
        Chain((0.5, 0.2))
    with pytest.raises(ValueError):
        Chain((0.2, 0.2))
    with pytest.raises(ValueError):
        Chain((-0.1,))


def test_chain_count_and_restrict():
    c = Chain((0.1, 0.5, 0.9))
    assert c.count(0.5) == 1
    assert c.count(0.50001) == 2
    assert c.restrict(0.9).times == (0.1, 0.5)
    assert Chain.from_json(c.to_json()) == c


@given(st.lists(st.floats(0, 10), unique=True, max_size=6), st.lists(st.floats(0, 10), unique=True, max_size=6))
def test_product_vector_multiplicative_over_unions(a, b):
    a, b = sorted(a), sorted(b)
    if set(a) & set(b):
        return
    v = ProductVector(lambda x: np.stack([np.sin(x) + 1j, np.cos(x)], axis=-1))
    ca, cb = Chain(tuple(a)), Chain(tuple(b))
    joint = v.evaluate(ca.union(cb))
    # reorder the union's slots into (a-points, b-points)
    order = np.argsort(np.concatenate([a, b]), kind="stable")
    pos = np.argsort(order)
    split = np.transpose(joint, pos) if len(pos) else joint
    # same factors, different multiplication order
    assert np.allclose(split, np.multiply.outer(v.evaluate(ca), v.evaluate(cb)), rtol=1e-14, atol=0)


# -- simplex quadrature -------------------------------------------------------

def test_simplex_volumes():
    ones = lambda p: np.ones(len(p))
    assert simplex_integrate(ones, 2, 1.0, 4) == pytest.approx(0.5, abs=1e-14)
    assert simplex_integrate(ones, 3, 2.0, 3) == pytest.approx(8 / 6, abs=1e-13)
    assert simplex_integrate(lambda p: np.full(len(p), 2.5 - 1j), 0, 1.0) == 2.5 - 1j


def test_simplex_gauss_exactness():
    # int_{0<x1<x2<1} x1^3 x2^5 dx = 1 / (4 * 10)
    f = lambda p: p[:, 0] ** 3 * p[:, 1] ** 5
    assert simplex_integrate(f, 2, 1.0, 5) == pytest.approx(1 / 40, abs=1e-15)


def test_simplex_points_ordered():
    pts, w = simplex_nodes(3, 1.5, 5)
    assert np.all(np.diff(pts, axis=1) > 0) and np.all(pts < 1.5)
    assert w.sum() == pytest.approx(1.5**3 / 6)


def test_simplex_errors():
    with pytest.raises(ValueError):
        simplex_integrate(lambda p: np.ones(len(p)), -1, 1.0)
    with pytest.raises(ValueError):
        simplex_integrate(lambda p: np.full(len(p), np.nan), 1, 1.0)


# -- Poisson law ----------------------------------------------------------------

def test_poisson_weight_examples():
    assert poisson_weight(Chain(), ONE, 2, 1) == pytest.approx(math.exp(-2), abs=1e-15)
    assert poisson_weight(Chain((0.5,)), ONE, 2, 1) == pytest.approx(2 * math.exp(-2), abs=1e-15)
    with pytest.raises(ValueError):
        poisson_weight(Chain((1.5,)), ONE, 2, 1)


@pytest.mark.parametrize("nu", [0.25, 1.0, 1.5])
def test_poisson_normalization(nu):
    prof = IntensityProfile.constant(nu)
    total = sum(
        simplex_integrate(lambda p: np.array([poisson_weight(Chain(tuple(r)), prof, 2, 1.0) for r in p]), n, 1.0, 3)
        for n in range(4)
    )
    F = 2 * nu
    total += math.exp(-F) * sum(F**n / math.factorial(n) for n in range(4, 21))
    assert total == pytest.approx(1.0, abs=1e-10)
    assert poisson_law_mass(prof, 1.0) == pytest.approx(1.0, abs=1e-10)


def test_poisson_series_deficit_at_rate_four_is_the_tail():
    # with 2 nu t = 4 the n <= 20 partial sum misses about 2e-9
    F = 4.0
    partial = math.exp(-F) * sum(F**n / math.factorial(n) for n in range(21))
    assert 1 - partial == pytest.approx(stats.poisson.sf(20, F), rel=1e-6)
    assert poisson_law_mass(IntensityProfile.constant(2.0), 1.0, n_max=40) == pytest.approx(1, abs=1e-10)


def test_poisson_law_mass_tabulated():
    assert poisson_law_mass(IntensityProfile.tabulated([0, 1], [0.5, 2]), 1.0) == pytest.approx(1, abs=1e-10)


def test_sampler_determinism():
    assert sample_poisson_chain(ONE, 2, 1, seed=11) == sample_poisson_chain(ONE, 2, 1, seed=11)


def test_sampler_mean_cardinality():
    n = 20_000
    counts = sample_poisson_chains(ONE, 1.0, n, np.random.default_rng(5)).counts
    assert abs(counts.mean() - 2.0) <= 3 * math.sqrt(2.0 / n)


def test_sampler_order_statistics():
    batch = sample_poisson_chains(ONE, 1.0, 10_000, np.random.default_rng(6))
    for k in (1, 2, 3):
        rows = batch.times[batch.counts == k, :k]
        # the first of k uniform order statistics is Beta(1, k)
        assert stats.kstest(rows[:, 0], stats.beta(1, k).cdf).pvalue > 1e-3
        assert stats.kstest(rows.ravel(), "uniform").pvalue > 1e-3


def test_sampler_sector_probabilities_chi2():
    nu = IntensityProfile.tabulated([0, 1], [0.5, 1.5])
    counts = sample_poisson_chains(nu, 1.0, 100_000, np.random.default_rng(7)).counts
    F = 2 * nu.integral(0, 1)
    kmax = 7
    probs = np.array([stats.poisson.pmf(k, F) for k in range(kmax)] + [stats.poisson.sf(kmax - 1, F)])
    observed = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
    assert stats.chisquare(observed, probs * counts.size).pvalue > 1e-3


def test_sampler_thinning_density():
    # ramp intensity: accepted points have density proportional to nu
    nu = IntensityProfile.tabulated([0, 1], [0.2, 1.8])
    batch = sample_poisson_chains(nu, 1.0, 20_000, np.random.default_rng(8))
    x = batch.times[np.isfinite(batch.times)]
    cdf = lambda s: (0.2 * s + 0.8 * s**2) / 1.0
    assert stats.kstest(x, cdf).pvalue > 1e-3


# -- Fock calculus ----------------------------------------------------------------

def test_fock_norm_examples():
    vac = ProductVector.constant(FUTURE)
    for n_max in (0, 3, 12):
        assert fock_pseudo_norm_sq(vac, 1.0, n_max) == 1.0
    pv = ProductVector.constant(TemporalVector(1, 1))
    assert fock_pseudo_norm_sq(pv, 1.0, 20) == pytest.approx(math.e**2, abs=1e-10)
    assert fock_pseudo_norm_sq(pv, 1.0, 0) == 1.0


def test_fock_norm_quadrature_matches_closed_form():
    pv = ProductVector(lambda x: np.stack([0.5 + x, np.ones_like(x)], axis=-1).astype(complex))
    a = fock_pseudo_norm_sq(pv, 1.0, 3, method="closed")
    b = fock_pseudo_norm_sq(pv, 1.0, 3, method="quadrature")
    assert a == pytest.approx(b, abs=1e-12)


def test_vacuum_embedding():
    assert vacuum_embedding([1, 0]).pseudo_norm() == 1.0
    with pytest.warns(UserWarning):
        assert vacuum_embedding([0, 0]).pseudo_norm() == 0.0
    rng = np.random.default_rng(2)
    eta = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    eta /= np.linalg.norm(eta)
    assert vacuum_embedding(eta).pseudo_norm() == pytest.approx(1.0, abs=1e-12)


def test_weyl_examples():
    w0 = weyl_on_vacuum(0.0, 1.0)
    c = Chain((0.2, 0.7))
    assert np.array_equal(w0.evaluate(c), ProductVector.constant(FUTURE).evaluate(c))
    w1 = weyl_on_vacuum(ONE, 1.0)
    assert w1.prefactor == pytest.approx(math.exp(-1))
    assert np.allclose(w1.components(np.array([0.3])), [[1, 1]])


@pytest.mark.parametrize("total,n_max", [(0.25, 12), (0.5, 12), (1.0, 16)])
def test_weyl_pseudo_unitarity(total, n_max):
    w = weyl_on_vacuum(IntensityProfile.constant(total), 1.0, n_max)
    assert abs(fock_pseudo_norm_sq(w, 1.0) - 1.0) <= 1e-8


def test_weyl_truncation_defect_is_poisson_tail():
    # at int nu = 1 the n <= 12 truncation misses exactly the Poisson(2) tail
    w = weyl_on_vacuum(ONE, 1.0, 12)
    tail = stats.poisson.sf(12, 2.0)
    assert 1.0 - fock_pseudo_norm_sq(w, 1.0) == pytest.approx(tail, rel=1e-6)


def _random_grid(g, rng):
    return g.like([rng.normal(size=s.shape) + 1j * rng.normal(size=s.shape) for s in g.sectors]).symmetrize()


def test_creation_annihilation_adjoint():
    rng = np.random.default_rng(0)
    g = TruncatedSectorGrid(1.0, 3, 4)
    psi, phi = _random_grid(g, rng), _random_grid(g, rng)
    xi = lambda x: np.stack([np.sin(x) + 1j, np.cos(3 * x)], axis=-1)
    lhs = creation_apply(xi, psi).pairing(phi)
    rhs = psi.pairing(annihilation_apply(xi, phi))
    assert abs(lhs - rhs) <= 1e-8 * max(1, abs(lhs))


def test_annihilation_on_vacuum_is_zero():
    vac = TruncatedSectorGrid.vacuum(1.0, 3, 4)
    out = annihilation_apply(TemporalVector(0.3, 1.0), vac)
    assert all(np.count_nonzero(s) == 0 for s in out.sectors)


def test_create_then_annihilate_null_vector():
    vac = TruncatedSectorGrid.vacuum(1.0, 3, 6)
    out = annihilation_apply(FUTURE, creation_apply(FUTURE, vac))
    assert abs(out.sectors[0]) == 0


def test_create_then_annihilate_gives_pseudo_square():
    xi = TemporalVector(0.4, 1.0)
    vac = TruncatedSectorGrid.vacuum(1.0, 3, 6)
    out = annihilation_apply(xi, creation_apply(xi, vac))
    assert complex(out.sectors[0]) == pytest.approx(0.8, abs=1e-14)


def test_weyl_closed_form_against_operator_series():
    # exp(A^dag(xi) - A(xi^dag)) on the pseudo-vacuum; sectors far below the
    # grid cap are unaffected by the truncation
    t, nu = 1.0, 0.05
    vac = TruncatedSectorGrid.from_product(ProductVector.constant(FUTURE), t, 8, 2)
    xi = TemporalVector(nu, 0)
    op = lambda h: creation_apply(xi, h) - annihilation_apply(xi, h)
    series = grid_exp(op, vac, 10)
    closed = TruncatedSectorGrid.from_product(weyl_on_vacuum(nu, t), t, 8, 2)
    for n in range(4):
        assert np.max(np.abs(series.sectors[n] - closed.sectors[n])) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.1, 2.0))
def test_intensity_integral_constant(v, t):
    assert IntensityProfile.constant(v).integral(0, t) == pytest.approx(v * t)
