"""Metropolis eigenvalue sampler checked against its own action and the solvers."""

import numpy as np
import pytest

from fuzzydirac import (
    McChain,
    McConfig,
    ModelParams,
    ParamError,
    action,
    expectation_estimator,
    histogram_density,
    metropolis_sample,
    solve_equilibrium,
    solve_massless,
)
from fuzzydirac.estimators import semicircle_ds_2f2


MASSIVE_P = ModelParams.from_g2_eff(g4=1.0, g2_eff=1.0, beta=2.0, beta2=2.0,
                                    masses=(1.0,))


def hist_l1(chain, sol, n_bins=61):
    hist = histogram_density(chain, n_bins)
    ref = sol.rho_H.density(hist.nodes)
    return float(np.sum(hist.weights * np.abs(hist.values - ref)))


def test_action_sign_flip_exact():
    rng = np.random.default_rng(3)
    lam = rng.normal(0.0, 0.8, 24)
    assert action(-lam, MASSIVE_P) == action(lam, MASSIVE_P)


def test_action_permutation_invariance():
    rng = np.random.default_rng(4)
    lam = rng.normal(0.0, 0.8, 24)
    s0 = action(lam, MASSIVE_P)
    for _ in range(5):
        s1 = action(rng.permutation(lam), MASSIVE_P)
        assert abs(s1 - s0) < 1e-12 * max(1.0, abs(s0))


def test_action_coincident_points_divergent():
    lam = np.array([0.3, 0.3, -0.5])
    p0 = ModelParams(g4=1.0, g2=1.0, beta=2.0, beta2=2.0, masses=(0.0,))
    assert action(lam, p0) == np.inf


def test_diagonal_terms_are_constants():
    # off-diagonal-only action differs from the full one by a configuration-
    # independent constant, so Metropolis ratios are unchanged
    p = MASSIVE_P

    def off_diag_part(lam):
        d = lam[:, None] - lam[None, :]
        off = ~np.eye(len(lam), dtype=bool)
        r2 = d[off] ** 2
        total = float(np.sum(2.0 * p.g4 * r2 * r2 + 2.0 * p.g2_eff * r2
                             - 0.25 * p.beta * np.log(r2)))
        for m in p.masses:
            total -= 0.25 * p.beta2 * float(np.sum(np.log(m * m + r2)))
        s = float(np.sum(lam))
        return total + p.trace_reg * s * s

    rng = np.random.default_rng(5)
    lam1 = rng.normal(0.0, 0.8, 16)
    lam2 = rng.normal(0.0, 0.8, 16)
    full_delta = action(lam2, p) - action(lam1, p)
    bare_delta = off_diag_part(lam2) - off_diag_part(lam1)
    assert abs(full_delta - bare_delta) < 1e-9 * max(1.0, abs(full_delta))


def test_seed_determinism():
    cfg = McConfig(n_eigen=12, n_sweeps=200, burn_in=100, seed=42)
    c1 = metropolis_sample(MASSIVE_P, cfg)
    c2 = metropolis_sample(MASSIVE_P, cfg)
    assert np.array_equal(c1.samples, c2.samples)
    assert c1.acceptance_rate == c2.acceptance_rate
    c3 = metropolis_sample(MASSIVE_P, McConfig(n_eigen=12, n_sweeps=200,
                                               burn_in=100, seed=43))
    assert not np.array_equal(c1.samples, c3.samples)


def test_pure_python_kernel_matches_compiled(monkeypatch):
    cfg = McConfig(n_eigen=8, n_sweeps=60, burn_in=40, seed=7)
    compiled = metropolis_sample(MASSIVE_P, cfg)
    monkeypatch.setenv("FUZZYDIRAC_NO_NUMBA", "1")
    pure = metropolis_sample(MASSIVE_P, cfg)
    assert np.array_equal(compiled.samples, pure.samples)
    assert compiled.acceptance_rate == pure.acceptance_rate


def test_thinning_keeps_every_kth(monkeypatch):
    # thin=k retains the state after every k-th sweep of the same stream
    monkeypatch.setenv("FUZZYDIRAC_NO_NUMBA", "1")
    dense = metropolis_sample(MASSIVE_P, McConfig(n_eigen=6, n_sweeps=90,
                                                  burn_in=30, seed=11, thin=1))
    thinned = metropolis_sample(MASSIVE_P, McConfig(n_eigen=6, n_sweeps=90,
                                                    burn_in=30, seed=11, thin=3))
    assert thinned.samples.shape == (30, 6)
    assert np.array_equal(thinned.samples, dense.samples[2::3])


def test_two_eigenvalue_marginal_matches_action():
    # N=2 joint weight e^{-S} integrated numerically: an end-to-end check of
    # the sweep kernel against the action it claims to sample
    p = MASSIVE_P
    cfg = McConfig(n_eigen=2, n_sweeps=60000, burn_in=3000, seed=20260814)
    chain = metropolis_sample(p, cfg)
    hist = histogram_density(chain, 41)

    L = max(1.05 * np.max(np.abs(chain.samples)), 2.4)
    ys = np.linspace(-L, L, 481)
    xs = hist.nodes
    logw = np.empty((len(xs), len(ys)))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            logw[i, j] = -action(np.array([x, y]), p) if x != y else -np.inf
    logw -= np.max(logw)
    marg = np.trapezoid(np.exp(logw), ys, axis=1)
    marg /= np.sum(marg * hist.weights)
    l1 = float(np.sum(hist.weights * np.abs(hist.values - marg)))
    assert l1 < 0.06


def test_mean_drift_suppressed():
    cfg = McConfig(n_eigen=24, n_sweeps=4000, burn_in=1000, seed=99)
    chain = metropolis_sample(MASSIVE_P, cfg)
    per_sweep_mean = chain.samples.mean(axis=1)
    assert abs(per_sweep_mean.mean()) < 3.0 * per_sweep_mean.std()
    assert abs(per_sweep_mean.mean()) < 0.05


def test_acceptance_rate_adapted():
    cfg = McConfig(n_eigen=30, n_sweeps=1500, burn_in=1500, seed=13)
    chain = metropolis_sample(MASSIVE_P, cfg)
    assert 0.2 <= chain.acceptance_rate <= 0.6


def test_histogram_density_normalized():
    cfg = McConfig(n_eigen=10, n_sweeps=300, burn_in=100, seed=21)
    chain = metropolis_sample(MASSIVE_P, cfg)
    hist = histogram_density(chain, 31)
    assert abs(hist.total_mass() - 1.0) < 1e-12
    assert len(hist.nodes) == 31


def test_histogram_l1_shrinks_with_n():
    # finite-N bias dominates: the histogram closes in on the large-N density
    points = [
        (ModelParams.from_g2_eff(g4=1.0, g2_eff=1.0, beta=2.0, beta2=2.0,
                                 masses=(1.0,)), solve_equilibrium),
        (ModelParams.from_g2_eff(g4=1.0, g2_eff=-4.0, beta=2.0, beta2=2.0,
                                 masses=(1.0,)), solve_equilibrium),
        (ModelParams(g4=0.0, g2=1.0, beta=2.0, beta2=2.0, masses=(0.0,)),
         solve_massless),
    ]
    monotone = 0
    for k, (p, solver) in enumerate(points):
        sol = solver(p)
        dists = []
        for n in (20, 50, 100):
            cfg = McConfig(n_eigen=n, n_sweeps=12000, burn_in=1500,
                           seed=51000 + 7 * k + n)
            dists.append(hist_l1(metropolis_sample(p, cfg), sol))
        if dists[0] > dists[1] > dists[2]:
            monotone += 1
    assert monotone >= 2


def test_expectation_estimator_against_closed_form():
    p = ModelParams(g4=0.0, g2=1.0, beta=2.0, beta2=2.0, masses=(0.0,))
    cfg = McConfig(n_eigen=50, n_sweeps=6000, burn_in=1500, seed=31)
    chain = metropolis_sample(p, cfg)
    sol = solve_massless(p)
    a = sol.rho_H.support.a
    t = 1.0
    est = expectation_estimator(chain, t, kind="d_s")
    ref = semicircle_ds_2f2(a, t)
    assert est.stderr > 0 and est.tau >= 1.0
    assert abs(est.value - ref) < 5.0 * est.stderr + 0.05 * ref
    k_est = expectation_estimator(chain, 0.0, kind="k_D2")
    assert abs(k_est.value - 1.0) < 1e-12
    with pytest.raises(ParamError):
        expectation_estimator(chain, 1.0, kind="nope")


def test_config_validation():
    with pytest.raises(ParamError):
        McConfig(n_eigen=0)
    with pytest.raises(ParamError):
        McConfig(step_scale=0.0)
    with pytest.raises(ParamError):
        McConfig(thin=0)
