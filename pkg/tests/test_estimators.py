"""Heat kernels, spectral dimension and variance, Dirac densities."""

import dataclasses
import math

import numpy as np
import pytest

from fuzzydirac import (
    ModelParams,
    ParamError,
    SingularInputError,
    dirac_density,
    estimator_table,
    heat_kernel_kD2,
    heat_kernel_kD2_factorized,
    heat_kernel_kH,
    low_energy_exponent,
    mass_transform,
    moments_D_from_H,
    moments_massless,
    solve_massless,
    spectral_dimension,
    spectral_variance,
)
from fuzzydirac.estimators import (
    EstimatorCurve,
    cosine_transform,
    one_cut_kH_bessel,
    one_cut_khat_bessel,
    semicircle_ds_2f2,
    semicircle_kD2_2f2,
    semicircle_vs_2f2,
)


@pytest.fixture(scope="module")
def gauss():
    p = ModelParams(g4=0.0, g2=1.0, beta=2.0, beta2=2.0, masses=(0.0,))
    sol = solve_massless(p)
    return sol, dirac_density(sol.rho_H)


@pytest.fixture(scope="module")
def one_cut():
    p = ModelParams(g4=1.0, g2=1.0, beta=2.0, beta2=2.0, masses=(0.0,))
    sol = solve_massless(p)
    return sol, dirac_density(sol.rho_H)


@pytest.fixture(scope="module")
def two_cut():
    p = ModelParams(g4=1.0, g2=-8.0, beta=2.0, beta2=2.0, masses=(0.0,))
    sol = solve_massless(p)
    return sol, dirac_density(sol.rho_H)


def test_dirac_density_basic_properties(one_cut):
    sol, rho_D = one_cut
    a = sol.rho_H.support.a
    assert abs(rho_D.support.a - 2 * a) < 1e-14
    assert np.allclose(rho_D.nodes, -rho_D.nodes[::-1])
    assert np.allclose(rho_D.values, rho_D.values[::-1], atol=1e-12)
    assert np.all(rho_D.values >= -1e-14)
    assert abs(rho_D.total_mass() - 1.0) < 1e-8


@pytest.mark.parametrize("fix", ["gauss", "one_cut", "two_cut"])
def test_dirac_moments_match_binomial_formula(fix, request):
    sol, rho_D = request.getfixturevalue(fix)
    mh = moments_massless(sol.params, 4)
    md = moments_D_from_H(mh, 4)
    for k in range(5):
        got = rho_D.moment(2 * k)
        assert abs(got - md[k]) < 1e-8 * max(1.0, abs(md[k]))


def test_mass_transform_preserves_mass_and_symmetry(one_cut):
    _, rho_D = one_cut
    m = 1.3
    rho_m = mass_transform(rho_D, m)
    assert rho_m.support.kind == "two-cut"
    assert abs(rho_m.support.b - m) < 1e-14
    assert np.min(np.abs(rho_m.nodes)) >= m
    # node-wise pushforward: quadrature mass is bit-for-bit unchanged
    assert rho_m.total_mass() == rho_D.total_mass()
    assert np.allclose(rho_m.values, rho_m.values[::-1], atol=1e-12)
    assert mass_transform(rho_D, 0.0) is rho_D
    with pytest.raises(ParamError):
        mass_transform(rho_D, -1.0)


def test_mass_transform_consistent_with_analytic_factor(one_cut):
    _, rho_D = one_cut
    m, ts = 0.8, np.array([0.05, 0.7, 3.0])
    via_density = heat_kernel_kD2(mass_transform(rho_D, m), ts)
    via_factor = heat_kernel_kD2(rho_D, ts, m=m)
    assert np.max(np.abs(via_density - via_factor)) < 1e-14


def test_heat_kernel_kH_normalization_and_symmetry(one_cut):
    sol, _ = one_cut
    assert abs(heat_kernel_kH(sol.rho_H, 0.0) - 1.0) < 1e-12
    ts = np.array([0.3, 1.7])
    assert np.allclose(heat_kernel_kH(sol.rho_H, ts),
                       heat_kernel_kH(sol.rho_H, -ts), atol=1e-12)


@pytest.mark.parametrize("fix", ["gauss", "one_cut"])
def test_kH_bessel_closed_form(fix, request):
    sol, _ = request.getfixturevalue(fix)
    ts = np.array([1e-10, 0.1, 1.0, 10.0, 40.0])
    direct = heat_kernel_kH(sol.rho_H, ts)
    closed = one_cut_kH_bessel(sol, ts)
    # k_H grows like e^{a t}, so compare relative
    assert np.max(np.abs(direct - closed) / np.maximum(np.abs(closed), 1.0)) < 1e-10
    us = np.array([0.2, 2.0, 15.0])
    assert np.max(np.abs(cosine_transform(sol.rho_H, us)
                         - one_cut_khat_bessel(sol, us))) < 1e-10


def test_kH_bessel_rejects_wrong_phase(two_cut):
    sol, _ = two_cut
    with pytest.raises(ParamError):
        one_cut_kH_bessel(sol, 1.0)


@pytest.mark.parametrize("fix", ["gauss", "one_cut", "two_cut"])
@pytest.mark.parametrize("m", [0.0, 1.0])
def test_kD2_direct_vs_factorized(fix, m, request):
    sol, rho_D = request.getfixturevalue(fix)
    for t in (0.01, 1.0, 50.0):
        direct = heat_kernel_kD2(rho_D, t, m=m)
        fact = heat_kernel_kD2_factorized(sol.rho_H, t, m=m)
        assert abs(direct - fact) < 1e-6 * max(abs(direct), 1e-12)


def test_semicircle_2f2_closed_forms(gauss):
    sol, rho_D = gauss
    a = sol.rho_H.support.a
    for t in (0.01, 0.5, 5.0, 50.0):
        k_ref = semicircle_kD2_2f2(a, t)
        assert abs(heat_kernel_kD2(rho_D, t) - k_ref) < 1e-6 * abs(k_ref)
        ds_ref = semicircle_ds_2f2(a, t)
        assert abs(spectral_dimension(sol, t, rho_D) - ds_ref) < 1e-6 * max(ds_ref, 1.0)
        vs_ref = semicircle_vs_2f2(a, t)
        assert abs(spectral_variance(sol, t, rho_D) - vs_ref) < 1e-6 * max(vs_ref, 1.0)


@pytest.mark.parametrize("m", [1.0, 4.0])
def test_mass_enters_estimators_analytically(one_cut, m):
    sol0, rho_D = one_cut
    solm = dataclasses.replace(
        sol0, params=dataclasses.replace(sol0.params, masses=(m,)))
    ts = np.geomspace(1e-2, 1e2, 25)
    ds0 = spectral_dimension(sol0, ts, rho_D)
    dsm = spectral_dimension(solm, ts, rho_D)
    assert np.max(np.abs(dsm - 2.0 * ts * m * m - ds0)) < 1e-10
    vs0 = spectral_variance(sol0, ts, rho_D)
    vsm = spectral_variance(solm, ts, rho_D)
    assert np.max(np.abs(vsm - vs0)) < 1e-10


def test_equal_masses_reduce_to_single_mass(one_cut):
    sol0, rho_D = one_cut
    one = dataclasses.replace(
        sol0, params=dataclasses.replace(sol0.params, masses=(2.0,)))
    two = dataclasses.replace(
        sol0, params=dataclasses.replace(sol0.params, masses=(2.0, 2.0)))
    ts = np.array([0.03, 0.4, 6.0])
    assert np.allclose(spectral_dimension(one, ts, rho_D),
                       spectral_dimension(two, ts, rho_D), atol=1e-12)
    assert np.allclose(spectral_variance(one, ts, rho_D),
                       spectral_variance(two, ts, rho_D), atol=1e-12)


def test_estimators_positive(two_cut):
    sol, rho_D = two_cut
    ts = np.geomspace(1e-2, 1e2, 40)
    assert np.all(spectral_dimension(sol, ts, rho_D) > 0)
    assert np.all(spectral_variance(sol, ts, rho_D) > 0)


def test_low_energy_exponent(gauss, one_cut):
    for sol, rho_D in (gauss, one_cut):
        # self-convolution is finite and positive at zero: exponent 1
        assert abs(low_energy_exponent(rho_D) - 1.0) < 0.05
    _, rho_D = one_cut
    with pytest.raises(SingularInputError):
        low_energy_exponent(mass_transform(rho_D, 1.0))


def test_estimator_table(one_cut):
    sol, rho_D = one_cut
    ts = np.geomspace(0.1, 10.0, 7)
    k_curve, ds_curve, vs_curve = estimator_table(sol, ts, rho_D)
    assert (k_curve.kind, ds_curve.kind, vs_curve.kind) == ("k_D2", "d_s", "v_s")
    assert np.allclose(k_curve.values, heat_kernel_kD2(rho_D, ts), atol=1e-14)
    assert np.allclose(ds_curve.values, spectral_dimension(sol, ts, rho_D))
    assert np.allclose(vs_curve.values, spectral_variance(sol, ts, rho_D))


def test_estimator_curve_validation():
    with pytest.raises(ParamError):
        EstimatorCurve(np.array([1.0, 0.5]), np.array([1.0, 1.0]), "k")
    with pytest.raises(ParamError):
        EstimatorCurve(np.array([1.0, 2.0]), np.array([1.0]), "k")
