import math

import numpy as np
import pytest
import scipy.stats

from edgelab import ensemble as ens
from edgelab.errors import CollisionError, DimensionMismatch, InsufficientSamples, InvalidParams
from edgelab.spectra import eigen_decompose
from edgelab.stats import ks_two_sample

from conftest import er_entries, within_sigma


def test_params_validation():
    with pytest.raises(InvalidParams):
        ens.EnsembleParams(1, q=1.0)
    with pytest.raises(InvalidParams):
        ens.EnsembleParams(10, q=0.5)
    with pytest.raises(InvalidParams):
        ens.EnsembleParams(10, q=4.0)
    p = ens.EnsembleParams(100, q=5.0)
    assert p.p == pytest.approx(0.25)
    assert ens.EnsembleParams(16, model=ens.Model.GOE).q == 4.0


def test_p_equal_one_is_rejected_by_sampler():
    p = ens.EnsembleParams(4, q=2.0)
    with pytest.raises(InvalidParams):
        ens.sample_erdos_renyi(p, 0)


def test_samplers_symmetric_and_reproducible():
    p = ens.EnsembleParams(60, q=4.0)
    a = ens.sample_erdos_renyi(p, 9)
    b = ens.sample_erdos_renyi(p, 9)
    c = ens.sample_erdos_renyi(p, 10)
    assert np.array_equal(a.entries, a.entries.T)
    assert np.array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, c.entries)
    assert a.dim == 60 and a.params == p
    g = ens.sample_goe(40, 3)
    assert np.array_equal(g.entries, g.entries.T)
    assert np.array_equal(g.entries, ens.sample_goe(40, 3).entries)
    with pytest.raises(ValueError):
        a.entries[0, 0] = 1.0


def test_er_entries_take_two_values():
    N, q = 50, 3.0
    p = q * q / N
    h = np.unique(ens.sample_erdos_renyi(ens.EnsembleParams(N, q=q), 1).entries)
    scale = q * math.sqrt(1 - p)
    assert np.allclose(sorted(h), sorted({-p / scale, (1 - p) / scale}))


def test_er_mean_and_variance_monte_carlo():
    N, q = 100, 5.0
    x = er_entries(N, q, 1_000_000, seed=1)
    assert within_sigma(x, 0.0)
    assert within_sigma(x**2, 1.0 / N)


@pytest.mark.parametrize("N,q", [(100, 5.0), (40, math.sqrt(20))])
def test_er_moments_match_closed_form(N, q):
    x = er_entries(N, q, 10_000_000, seed=2)
    for k in (2, 3, 4):
        assert within_sigma(x**k, ens.entry_moment_exact(k, N, q)), k


def test_entry_moment_second_order_and_oracle():
    for N, q in [(10, 2.0), (1000, 7.0)]:
        assert ens.entry_moment_exact(2, N, q) == pytest.approx(1 / N, rel=1e-14)
    # direct expectation over the two-point law
    N, q = 100, 5.0
    p = q * q / N
    s = q * math.sqrt(1 - p)
    for k in range(2, 9):
        direct = p * ((1 - p) / s) ** k + (1 - p) * (-p / s) ** k
        assert ens.entry_moment_exact(k, N, q) == pytest.approx(direct, rel=1e-12)


def test_exact_cumulants_against_scipy_bernoulli():
    N, q = 400, 5.0
    p = q * q / N
    s = q * math.sqrt(1 - p)
    prof = ens.exact_cumulant_profile(N, q, kmax=6)
    assert prof[2] == pytest.approx(1.0, abs=1e-12)
    # cumulants of the Bernoulli law with increasing order, rescaled
    from mpmath import mp, mpf, diff, exp, log

    mp.dps = 40
    K = lambda t: log(1 - mpf(p) + mpf(p) * exp(t))  # noqa: E731
    for k in range(2, 7):
        kappa = float(diff(K, 0, k)) / s**k
        assert prof.kappa(k) == pytest.approx(kappa, rel=1e-9)
    prof.check(bound=10.0, c4_min=0.1)


def test_empirical_cumulants():
    N, q = 400, 5.0
    x = er_entries(N, q, 2_000_000, seed=3)
    prof = ens.empirical_cumulants(x, 4, N, q)
    exact = ens.exact_cumulant_profile(N, q, 4)
    assert prof[2] == pytest.approx(1.0, abs=0.01)
    assert prof[4] > 0
    assert prof[4] == pytest.approx(exact[4], rel=0.1)
    g = np.random.default_rng(0).normal(scale=1 / math.sqrt(N), size=2_000_000)
    gp = ens.empirical_cumulants(g, 6, N, q)
    assert abs(gp[4]) < 0.05 and gp[2] == pytest.approx(1.0, abs=0.01)
    with pytest.raises(InsufficientSamples):
        ens.empirical_cumulants(x[:100], 4, N, q)


def test_goe_variances_monte_carlo():
    n = 1_000_000
    w12 = np.empty(n)
    w11 = np.empty(n)
    for i in range(n):
        w = ens.sample_goe(2, i).entries
        w12[i] = w[0, 1]
        w11[i] = w[0, 0]
    assert within_sigma(w12**2, 0.5)
    assert within_sigma(w11**2, 1.0)


def test_goe_top_eigenvalue_near_two():
    lam = [eigen_decompose(ens.sample_goe(1000, s)).eigenvalues[0] for s in range(100)]
    assert np.mean((np.array(lam) > 1.8) & (np.array(lam) < 2.2)) >= 0.99


def test_gaussian_divisible_limits():
    H = ens.sample_erdos_renyi(ens.EnsembleParams(30, q=3.0), 1)
    W = ens.sample_goe(30, 2)
    assert np.array_equal(ens.gaussian_divisible(H, W, 0.0).entries, H.entries)
    assert np.allclose(ens.gaussian_divisible(H, W, 700.0).entries, W.entries, atol=1e-300, rtol=1e-15)
    mid = ens.gaussian_divisible(H, W, math.log(2)).entries
    assert np.max(np.abs(mid - (H.entries + W.entries) / math.sqrt(2))) < 1e-15
    with pytest.raises(DimensionMismatch):
        ens.gaussian_divisible(H, ens.sample_goe(31, 0), 1.0)


def test_gaussian_divisible_variance_is_preserved():
    N, t = 20, 0.7
    params = ens.EnsembleParams(N, q=2.0)
    x = np.array(
        [ens.gaussian_divisible(ens.sample(params, s), ens.sample_goe(N, 10**6 + s), t).entries[0, 1] for s in range(200_000)]
    )
    assert within_sigma(x**2, 1.0 / N)


def test_dbm_free_particle_mean():
    lam = np.zeros((100_000, 1))
    out = ens.dbm_step(lam, 0.01, seed=4)
    assert within_sigma(out[:, 0], 0.0)
    assert out[:, 0].std() == pytest.approx(math.sqrt(0.02), rel=0.02)


def test_dbm_two_particle_drift():
    dt = 0.01
    lam = np.tile([1.0, -1.0], (100_000, 1))
    out = ens.dbm_step(lam, dt, seed=5)
    assert within_sigma((out[:, 0] - 1.0) / dt, -0.25)


def test_dbm_collision_and_ordering_guards():
    with pytest.raises(CollisionError):
        ens.dbm_step(np.array([1e-13, 0.0]), 1e-30, seed=0)
    with pytest.raises(InvalidParams):
        ens.dbm_step(np.array([0.0, 1.0]), 0.1, seed=0)
    out = ens.dbm_evolve(np.array([1.0, 0.0, -1.0]), 0.01, 10, seed=0)
    assert np.all(np.diff(out) < 0)


def test_dbm_matches_gaussian_divisible_in_law():
    N, t, reps = 50, 0.1, 500
    params = ens.EnsembleParams(N, q=N**0.3)
    spec0 = np.empty((reps, N))
    direct = np.empty(reps)
    for r in range(reps):
        H = ens.sample(params, r)
        spec0[r] = eigen_decompose(H).eigenvalues
        W = ens.sample_goe(N, 10**5 + r)
        direct[r] = eigen_decompose(ens.gaussian_divisible(H, W, t)).eigenvalues[0]
    evolved = ens.dbm_evolve(spec0, t, 400, seed=77)
    assert ks_two_sample(direct, evolved[:, 0]) < 0.1
    assert scipy.stats.ks_2samp(direct, evolved[:, 0]).statistic == pytest.approx(ks_two_sample(direct, evolved[:, 0]))
