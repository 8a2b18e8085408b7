from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpgeo.errors import DomainError, NoContractionError
from warpgeo.grid import SphereGrid
from warpgeo.metric import WarpFunction, warp_eval
from warpgeo.nonrigid import (
    ConstructionParams,
    PerturbationProfile,
    build_surface,
    cgl_diff_matrix,
    curvature_deviation_fit,
    curvature_deviation_report,
    first_order_profile,
    fixed_point_solve,
    isometry_defect,
    isometry_residual,
    mass_expansion,
    mass_expansion_target,
    predicted_deviation_coefficient,
    t_map,
    w_eval,
)
from warpgeo.surface import curvatures

ADS = WarpFunction.ads(0.1, 0.2)
ALPHA = (0.2 - 0.1) / (2 * (1 - 0.1 + 0.2))


# -- profiles --------------------------------------------------------------------------

def test_profile_interpolates_polynomials():
    poly = np.polynomial.Polynomial([0.3, -1.0, 0.5, 2.0, 0.0, -0.7])
    prof = PerturbationProfile.from_function(poly, 16)
    s = np.linspace(-1, 1, 101)
    assert np.max(np.abs(prof(s) - poly(s))) <= 1e-12
    assert np.max(np.abs(prof(s, deriv=1) - poly.deriv()(s))) <= 1e-11
    assert np.max(np.abs(prof.derivative_values() - poly.deriv()(prof.nodes))) <= 1e-11
    anti = prof.antiderivative()
    assert anti(0.0) == pytest.approx(0.0, abs=1e-15)
    exact = poly.integ() - poly.integ()(0.0)
    assert np.max(np.abs(anti(s) - exact(s))) <= 1e-12


def test_cgl_diff_matrix_annihilates_constants():
    D = cgl_diff_matrix(32)
    assert np.max(np.abs(D @ np.ones(32))) <= 1e-12


def test_params_validation():
    with pytest.raises(ValueError):
        ConstructionParams(ADS, eps=0.0)
    with pytest.raises(ValueError):
        ConstructionParams(ADS, quad_order=8)
    with pytest.raises(DomainError):
        ConstructionParams(WarpFunction.schwarzschild(1.0), r=0.5)


# -- the integrand W ----------------------------------------------------------------------

def test_w_flat_space():
    p = ConstructionParams(WarpFunction.euclidean(), eps=0.02)
    s = np.linspace(-1, 1, 7)
    assert np.allclose(w_eval(p, s, 0.02, 0.0), 0.0)
    assert np.allclose(w_eval(p, s, 0.02, 0.3), 0.09)


@settings(max_examples=60)
@given(
    s=st.floats(-1, 1),
    g=st.floats(-0.1, 0.1),
    gp=st.floats(-0.1, 0.1),
    r=st.floats(0.6, 2.0),
)
def test_w_matches_closed_form(s, g, gp, r):
    p = ConstructionParams(ADS, r=r)
    assert w_eval(p, s, g, gp) == pytest.approx(float(isometry_defect(p, s, g, gp)), rel=1e-11, abs=1e-14)


def test_w_leading_order_constant_profile():
    r = 1.0
    psi = float(ADS.psi(np.array(r))[0])
    ratios = []
    for eps in (0.01, 0.005, 0.0025):
        p = ConstructionParams(ADS, r=r, eps=eps)
        ratios.append(w_eval(p, 0.3, eps, 0.0) / (eps * eps * psi * r * r))
    dev = np.abs(np.array(ratios) - 1)
    assert dev[-1] < 0.01
    assert dev[1] / dev[2] == pytest.approx(2.0, rel=0.05)


def test_w_quadrature_converged():
    p = ConstructionParams(ADS, eps=0.04)
    s = np.linspace(-1, 1, 21)
    g = 0.04 + 0.0016 * np.sin(2 * s)
    gp = 0.0032 * np.cos(2 * s)
    a = w_eval(p, s, g, gp)
    b = w_eval(replace(p, quad_order=64), s, g, gp)
    assert np.max(np.abs(a - b) / np.abs(b)) <= 1e-12


def test_w_domain_error():
    p = ConstructionParams(WarpFunction.schwarzschild(1.0), r=1.1, eps=0.05)
    with pytest.raises(DomainError):
        w_eval(p, -1.0, 0.2, 0.0)


# -- the profile map and its fixed point ------------------------------------------------------

def test_t_map_flat_is_zero():
    p = ConstructionParams(WarpFunction.euclidean())
    assert not np.any(t_map(p, PerturbationProfile.zeros(64)).values)


def test_t_map_vanishes_at_zero():
    p = ConstructionParams(ADS)
    out = t_map(p, PerturbationProfile.from_function(lambda s: 0.3 * s * s, 64))
    assert out(0.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("r", [1.0, 1.7])
def test_t_map_small_eps_limit(r):
    slope = -0.5 * float(ADS.psi(np.array(r))[0]) * r
    if r == 1.0:
        assert slope == pytest.approx(ALPHA, rel=1e-12)
        assert ALPHA == pytest.approx(0.04545455, abs=1e-8)
    s = np.linspace(-1, 1, 9)
    errs = []
    for eps in (0.004, 0.002, 0.001):
        out = t_map(ConstructionParams(ADS, r=r, eps=eps), PerturbationProfile.zeros(64))
        errs.append(np.max(np.abs(out(s) - slope * s)))
    assert errs[-1] <= 5e-3 * abs(slope)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)


def test_flat_fixed_point_is_trivial():
    for eps in (0.1, 0.02):
        h, diag = fixed_point_solve(ConstructionParams(WarpFunction.euclidean(), eps=eps))
        assert diag.iterations == 1
        assert not np.any(h.values)


def test_fixed_point_properties():
    base = ConstructionParams(ADS)
    ratios, dists = [], []
    for eps in (0.04, 0.02, 0.01):
        p = replace(base, eps=eps)
        h, diag = fixed_point_solve(p)
        assert diag.residual <= p.tol
        assert diag.posthoc_residual <= 10 * p.tol
        ratios.append(diag.lipschitz_ratio)
        dists.append(h.sup_distance(first_order_profile(p)))
    ratios, dists = np.array(ratios), np.array(dists)
    assert np.all(ratios < 0.5)
    assert np.allclose(ratios[:-1] / ratios[1:], 2.0, rtol=0.2)
    assert np.allclose(dists[:-1] / dists[1:], 2.0, rtol=0.2)


def test_contraction_failures():
    with pytest.raises(ValueError):
        fixed_point_solve(ConstructionParams(ADS, eps=0.2))
    with pytest.raises(NoContractionError):
        fixed_point_solve(ConstructionParams(ADS, eps=0.02, max_iter=2))


# -- the surface --------------------------------------------------------------------------

def test_flat_surface_is_translate():
    p = ConstructionParams(WarpFunction.euclidean(), eps=0.03)
    h, _ = fixed_point_solve(p)
    grid = SphereGrid(24, 48)
    Y = build_surface(p, h, grid)
    dirs = np.moveaxis(grid.directions(), -1, 0)
    assert np.allclose(Y.position - dirs, np.array([0, 0, 0.03])[:, None, None], atol=1e-15)
    assert isometry_residual(Y, 1.0) <= 1e-12
    U, _ = grid.mesh()
    tab = curvature_deviation_report(p, h, np.linspace(-1.2, 1.2, 5))
    assert np.max(np.abs(tab.dev1)) <= 1e-10 and np.max(np.abs(tab.dev2)) <= 1e-10


def test_radius_expansion():
    p = ConstructionParams(ADS, eps=0.01)
    h, _ = fixed_point_solve(p)
    Y = build_surface(p, h, SphereGrid(12, 24))
    U, _ = Y.grid.mesh()
    assert np.max(np.abs(Y.r - (1 + p.eps * np.sin(U)))) <= 2 * p.eps**2


def test_perturbed_surface_is_convex():
    p = ConstructionParams(ADS, eps=0.02)
    h, _ = fixed_point_solve(p)
    assert np.min(curvatures(build_surface(p, h, SphereGrid(24, 48))).kappa1) > 0


def test_isometry_residual_refines():
    p = ConstructionParams(ADS, eps=0.02)
    h, _ = fixed_point_solve(p)
    res = [isometry_residual(build_surface(p, h, SphereGrid(n, 2 * n)), 1.0) for n in (24, 48, 96)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders >= 3.5)
    assert res[-1] <= 1e-7


def test_isometry_residual_other_radius():
    p = ConstructionParams(ADS, r=2.0, eps=0.02)
    h, _ = fixed_point_solve(p)
    assert isometry_residual(build_surface(p, h, SphereGrid(48, 96)), 2.0) <= 1e-10


def test_isometry_residual_independent_of_eps():
    grid = SphereGrid(48, 96)
    res = []
    for eps in (0.02, 0.01):
        p = ConstructionParams(ADS, eps=eps)
        h, _ = fixed_point_solve(p)
        res.append(isometry_residual(build_surface(p, h, grid), 1.0))
    assert max(res) <= 1e-10


def test_first_order_truncation_scales_cubically():
    grid = SphereGrid(48, 96)
    eps = np.array([0.04, 0.02, 0.01])
    res = []
    for e in eps:
        p = ConstructionParams(ADS, eps=float(e))
        res.append(isometry_residual(build_surface(p, first_order_profile(p), grid), 1.0))
    slope = np.polyfit(np.log(eps), np.log(res), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.2)


# -- curvature deviation ----------------------------------------------------------------------

def test_predicted_coefficients():
    f = np.sqrt(1.1)
    assert predicted_deviation_coefficient(ADS, 1.0) == pytest.approx(0.15 / f, rel=1e-14)
    # m/(2r^3) + m/r^3 at m = 0.2, r = 1, divided by f
    assert predicted_deviation_coefficient(WarpFunction.schwarzschild(0.2), 1.0) == pytest.approx(
        0.3 / np.sqrt(0.8), rel=1e-14
    )
    for k in (-0.5, 0.3, 1.0):
        assert predicted_deviation_coefficient(WarpFunction.space_form(k), 0.9) == pytest.approx(0.0, abs=1e-15)


def test_predicted_coefficient_from_warp():
    # [f f'/r + (1 - f^2)/r^2] / f evaluated from warp_eval
    for w, r in ((ADS, 1.3), (WarpFunction.schwarzschild(0.2), 1.0)):
        f, fp, _ = warp_eval(w, np.array(r))
        direct = (f * fp / r + (1 - f * f) / r**2) / f
        assert predicted_deviation_coefficient(w, r) == pytest.approx(float(direct), rel=1e-10)


def test_deviation_law():
    fit = curvature_deviation_fit(ConstructionParams(ADS))
    assert fit.max_relative_error <= 0.05


@pytest.mark.parametrize("kappa", [0.3, -0.2])
def test_deviation_vanishes_for_space_forms(kappa):
    fit = curvature_deviation_fit(ConstructionParams(WarpFunction.space_form(kappa)))
    assert fit.max_abs_slope <= 1e-8


# -- mass expansion ---------------------------------------------------------------------------

def test_mass_expansion_target_value():
    assert mass_expansion_target(ADS) == pytest.approx(0.03409091, abs=1e-8)
    assert mass_expansion_target(ADS) == pytest.approx(0.075 * 0.5 / 1.1, rel=1e-14)


def test_mass_expansion_fit():
    fit = mass_expansion(ADS, [0.04, 0.02, 0.01])
    assert fit.relative_error <= 0.05
    zero = mass_expansion(WarpFunction.ads(0.0, 0.3), [0.02, 0.01])
    assert abs(zero.coefficient) <= 1e-8


@settings(max_examples=10, deadline=None)
@given(m=st.floats(0.02, 0.3), kappa=st.floats(-0.005, 0.4))
def test_mass_expansion_positive(m, kappa):
    w = WarpFunction.ads(m, kappa)
    fit = mass_expansion(w, [0.02, 0.01, 0.005])
    assert fit.coefficient > 0
    assert fit.values[-1] > 0
