import csv

import numpy as np
import pytest

from warpgeo.errors import DegenerateSurfaceError, NotStarShapedError
from warpgeo.grid import SphereGrid
from warpgeo.metric import WarpFunction, warp_eval
from warpgeo.nonrigid import ConstructionParams, build_surface, fixed_point_solve
from warpgeo.surface import (
    CSV_COLUMNS,
    area_integral,
    centering_integral,
    curvatures,
    darboux_shape,
    embed,
    geodesic_sphere,
    induced_metric,
    intrinsic_gauss_curvature,
    second_fundamental_form,
    sigma2_via_darboux,
    sigma_dot,
    support_identity_residual,
    write_surface_csv,
)

WARPS = [
    WarpFunction.euclidean(),
    WarpFunction.space_form(1.0),
    WarpFunction.schwarzschild(0.5),
    WarpFunction.ads(0.1, 0.2),
]
IDS = ["euclidean", "spaceform", "schwarzschild", "ads"]


def _round_metric(r, grid):
    U, _ = grid.mesh()
    g = np.zeros((2, 2) + grid.shape)
    g[0, 0] = r * r
    g[1, 1] = (r * np.cos(U)) ** 2
    return g


@pytest.fixture(scope="module")
def perturbed():
    p = ConstructionParams(WarpFunction.ads(0.1, 0.2), 1.0, 0.02)
    h, _ = fixed_point_solve(p)
    return p, h


def test_euclidean_unit_sphere():
    emb = geodesic_sphere(WarpFunction.euclidean(), 1.0, SphereGrid(24, 48))
    cr = curvatures(emb)
    assert np.allclose(emb.phi, 1.0, atol=1e-12)
    assert np.max(np.abs(emb.h - emb.g)) <= 2e-5
    assert np.allclose(cr.H, 2.0, atol=5e-5)
    assert np.allclose(cr.sigma2, 1.0, atol=5e-5)
    assert np.allclose(sigma2_via_darboux(emb), 1.0, atol=5e-5)


def test_schwarzschild_sphere_ratio():
    emb = geodesic_sphere(WarpFunction.schwarzschild(0.5), 2.0, SphereGrid(96, 192))
    ratio = emb.h[0, 0] / emb.g[0, 0]
    assert np.allclose(ratio, np.sqrt(0.75) / 2, rtol=1e-6)
    assert np.sqrt(0.75) / 2 == pytest.approx(0.4330127, abs=1e-7)


def test_space_form_support_data():
    emb = geodesic_sphere(WarpFunction.space_form(1.0), 0.5, SphereGrid(12, 24))
    assert np.allclose(emb.phi, 0.5, atol=1e-14)
    assert np.allclose(emb.rho, 0.125, atol=1e-15)


def test_ads_mean_curvature():
    emb = geodesic_sphere(WarpFunction.ads(0.1, 0.2), 1.0, SphereGrid(48, 96))
    H = curvatures(emb).H
    assert np.allclose(H, 2 * np.sqrt(1.1), rtol=1e-6)
    assert 2 * np.sqrt(1.1) == pytest.approx(2.0976177, abs=1e-7)


def test_round_mean_curvature_for_mass_section():
    # with r = 1 the round-sphere value is 2 sqrt(1 - m + kappa)
    m, kappa = 0.3, 0.4
    emb = geodesic_sphere(WarpFunction.ads(m, kappa), 1.0, SphereGrid(48, 96))
    assert np.allclose(curvatures(emb).H, 2 * np.sqrt(1 - m + kappa), rtol=1e-6)


@pytest.mark.parametrize("w", WARPS, ids=IDS)
def test_embedding_invariants(w):
    emb = geodesic_sphere(w, 0.9, SphereGrid(24, 48))
    psi_n = sigma_dot(w, emb.position, emb.normal, emb.normal)
    assert np.max(np.abs(psi_n - 1)) <= 1e-10
    assert np.all(emb.det_g > 0) and np.all(emb.g[0, 0] > 0)
    assert np.max(support_identity_residual(emb)) <= 1e-8
    hn = np.max(np.abs(emb.h))
    assert np.max(np.abs(emb.h[0, 1] - emb.h[1, 0])) <= 1e-10 * hn


@pytest.mark.parametrize("w", WARPS, ids=IDS)
@pytest.mark.parametrize("method", ["parametric", "darboux"])
def test_geodesic_sphere_shape_order(w, method):
    r = 1.2
    f = float(warp_eval(w, np.array(r))[0])
    errs = []
    for n in (24, 48, 96):
        grid = SphereGrid(n, 2 * n)
        emb = geodesic_sphere(w, r, grid)
        exact = (f / r) * _round_metric(r, grid)
        h = second_fundamental_form(emb, method)
        errs.append(np.max(np.abs(h - exact)) / np.max(np.abs(exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert errs[-1] <= 1e-6
    assert np.all(orders >= 3.5)


def test_metric_refinement_and_translation():
    w = WarpFunction.euclidean()
    errs = []
    for n in (24, 48, 96):
        grid = SphereGrid(n, 2 * n)
        pos = 0.7 * np.moveaxis(grid.directions(), -1, 0)
        pos[2] += 0.4
        g = induced_metric(pos, grid, w)
        errs.append(np.max(np.abs(g - _round_metric(0.7, grid))))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 3.5)


def test_perturbed_surface_methods_agree(perturbed):
    p, h = perturbed
    emb = build_surface(p, h, SphereGrid(96, 192))
    hd = darboux_shape(emb)
    assert np.max(np.abs(hd - emb.h)) / np.max(np.abs(emb.h)) <= 1e-5
    cr = curvatures(emb)
    assert np.max(np.abs(sigma2_via_darboux(emb) - cr.sigma2) / cr.sigma2) <= 1e-5
    assert np.min(cr.kappa1) > 0


@pytest.mark.parametrize("w", WARPS, ids=IDS)
def test_sigma2_via_darboux_on_geodesic_sphere(w):
    r = 0.8
    emb = geodesic_sphere(w, r, SphereGrid(48, 96))
    f = float(warp_eval(w, np.array(r))[0])
    assert np.allclose(sigma2_via_darboux(emb), (f / r) ** 2, rtol=1e-6)


@pytest.mark.parametrize("w", WARPS, ids=IDS)
def test_gauss_residual_refines(w):
    res = []
    for n in (24, 48):
        res.append(np.max(np.abs(curvatures(geodesic_sphere(w, 1.0, SphereGrid(n, 2 * n))).gauss_residual)))
    assert res[1] < res[0] / 8
    assert res[1] <= 1e-5


def test_gauss_residual_on_perturbed_surface(perturbed):
    p, h = perturbed
    res = [np.max(np.abs(curvatures(build_surface(p, h, SphereGrid(n, 2 * n))).gauss_residual)) for n in (24, 48, 96)]
    assert res[2] < res[1] < res[0]
    assert res[2] <= 1e-6


def test_area_integrals():
    for w in WARPS:
        emb = geodesic_sphere(w, 1.0, SphereGrid(48, 96))
        U, _ = emb.grid.mesh()
        assert area_integral(emb, np.sin(U) ** 2) == pytest.approx(4 * np.pi / 3, rel=1e-6)
        assert abs(area_integral(emb, 1 - 3 * np.sin(U) ** 2)) <= 1e-6


@pytest.mark.slow
def test_area_high_resolution():
    r = 1.3
    emb = geodesic_sphere(WarpFunction.ads(0.1, 0.2), r, SphereGrid(512, 1024))
    area = area_integral(emb, np.ones(emb.grid.shape))
    assert abs(area / (4 * np.pi * r * r) - 1) <= 1e-10


def test_centering():
    grid = SphereGrid(24, 48)
    emb = geodesic_sphere(WarpFunction.ads(0.1, 0.2), 1.0, grid)
    assert np.max(np.abs(centering_integral(emb))) <= 1e-12
    pos = np.moveaxis(grid.directions(), -1, 0).copy()
    pos[2] += 0.3
    c = centering_integral(embed(pos, grid, WarpFunction.euclidean()))
    assert np.allclose(c, [0, 0, 0.3 * 4 * np.pi], atol=1e-4)


def test_centering_of_perturbed_sphere(perturbed):
    p, h = perturbed
    c = centering_integral(build_surface(p, h, SphereGrid(24, 48)))
    assert abs(c[0]) < 1e-12 and abs(c[1]) < 1e-12
    assert c[2] == pytest.approx(4 * np.pi * p.eps, rel=0.1)


def test_intrinsic_curvature_round():
    # the discrete metric and curvature stencils are consistent: exact up to rounding
    for n in (24, 48, 96):
        grid = SphereGrid(n, 2 * n)
        emb = geodesic_sphere(WarpFunction.schwarzschild(0.5), 2.0, grid)
        assert np.max(np.abs(intrinsic_gauss_curvature(emb.g, grid) - 0.25)) <= 1e-8


def test_intrinsic_curvature_order():
    # g = du^2 + b(u)^2 dv^2 with b = cos u (1 + 0.2 sin^2 u), K = -b''/b
    errs = []
    for n in (24, 48, 96):
        grid = SphereGrid(n, 2 * n)
        U, _ = grid.mesh()
        s2, c2 = np.sin(U) ** 2, np.cos(U) ** 2
        g = np.zeros((2, 2) + grid.shape)
        g[0, 0] = 1.0
        g[1, 1] = (np.cos(U) * (1 + 0.2 * s2)) ** 2
        exact = (1 - 0.2 * (2 * c2 - 7 * s2)) / (1 + 0.2 * s2)
        errs.append(np.max(np.abs(intrinsic_gauss_curvature(g, grid) - exact)))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 3.5)


def test_intrinsic_curvature_non_orthogonal():
    errs = []
    for n in (24, 48, 96):
        grid = SphereGrid(n, 2 * n)
        U, V = grid.mesh()
        V2 = V + 0.3 * np.sin(U)  # sheared longitude, g_12 != 0
        pos = np.stack([np.cos(U) * np.cos(V2), np.cos(U) * np.sin(V2), np.sin(U)])
        g = induced_metric(pos, grid, WarpFunction.euclidean())
        assert np.max(np.abs(g[0, 1])) > 0.1
        errs.append(np.max(np.abs(intrinsic_gauss_curvature(g, grid) - 1)))
    # the general formula loses two orders at the poles
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 1.8)
    assert errs[-1] <= 5e-3


def test_degenerate_and_non_star_shaped():
    grid = SphereGrid(12, 24)
    with pytest.raises(DegenerateSurfaceError):
        embed(np.ones((3,) + grid.shape), grid, WarpFunction.euclidean())
    pos = np.moveaxis(grid.directions(), -1, 0).copy()
    pos[2] += 3.0
    emb = embed(pos, grid, WarpFunction.euclidean())
    with pytest.raises(NotStarShapedError):
        darboux_shape(emb)
    with pytest.raises(ValueError):
        second_fundamental_form(emb, "other")


def test_surface_csv(tmp_path):
    emb = geodesic_sphere(WarpFunction.ads(0.1, 0.2), 1.0, SphereGrid(6, 12))
    path = tmp_path / "s.csv"
    write_surface_csv(emb, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 6 * 12
    assert float(rows[1][11]) == pytest.approx(1.0, abs=1e-14)
