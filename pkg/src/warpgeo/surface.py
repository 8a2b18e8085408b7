"""Gridded surfaces in a warped product space.

Fields are stored component-first: positions are ``(3, n_lat, n_lon)`` and
2-tensors are ``(2, 2, n_lat, n_lon)`` with index 0 = latitude ``u``,
index 1 = longitude ``v``.

The unit normal points outward and the second fundamental form is
``h_ij = -sigma(D_i d_j Y, nu)``, so round spheres have positive curvature.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSurfaceError, NotStarShapedError
from .grid import SphereGrid
from .metric import WarpFunction, ambient_sigma2_source, psi_fields, warp_eval


def _dot(a, b):
    return np.einsum("i...,i...->...", a, b)


def sigma_dot(w, z, a, b, psi=None):
    """Ambient inner product of vector fields ``a, b`` based at ``z``."""
    if psi is None:
        psi, _ = psi_fields(w, np.moveaxis(z, 0, -1))
    return _dot(a, b) + psi * _dot(z, a) * _dot(z, b)


def _inv2(g):
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    inv = np.empty_like(g)
    inv[0, 0] = g[1, 1] / det
    inv[1, 1] = g[0, 0] / det
    inv[0, 1] = inv[1, 0] = -g[0, 1] / det
    return inv, det


def _sym(a11, a12, a22):
    return np.stack([np.stack([a11, a12]), np.stack([a12, a22])])


@dataclass(frozen=True, eq=False)
class SurfaceEmbedding:
    """Immutable snapshot of a gridded surface and its first-order data.

    Build with :func:`embed`; the shape operator field ``h`` is the parametric
    second fundamental form unless another method was requested.
    """

    grid: SphereGrid
    warp: WarpFunction
    position: np.ndarray
    tangents: np.ndarray  # (2, 3, n_lat, n_lon): Y_u, Y_v
    g: np.ndarray
    normal: np.ndarray
    phi: np.ndarray
    rho: np.ndarray
    r: np.ndarray
    h: np.ndarray

    @property
    def grad_rho(self):
        """``d_i rho`` as ``(2, n_lat, n_lon)`` (exact chain rule on the tangents)."""
        return np.stack([_dot(self.position, self.tangents[0]), _dot(self.position, self.tangents[1])])

    @property
    def det_g(self):
        return self.g[0, 0] * self.g[1, 1] - self.g[0, 1] ** 2

    @property
    def nu1_sq(self):
        """Squared radial component of the unit normal, ``(phi/r)^2``."""
        return np.clip((self.phi / self.r) ** 2, 0.0, 1.0)


def _tangents(grid, pos):
    return np.stack([grid.d_lat(pos), grid.d_lon(pos)])


def induced_metric(position, grid: SphereGrid, w: WarpFunction):
    """Pullback metric ``g_ij = sigma(d_i Y, d_j Y)`` of a position field."""
    pos = np.asarray(position, dtype=float)
    T = _tangents(grid, pos)
    psi, _ = psi_fields(w, np.moveaxis(pos, 0, -1))
    g11 = sigma_dot(w, pos, T[0], T[0], psi)
    g12 = sigma_dot(w, pos, T[0], T[1], psi)
    g22 = sigma_dot(w, pos, T[1], T[1], psi)
    g = _sym(g11, g12, g22)
    if np.any(g11 * g22 - g12 * g12 <= 0) or np.any(g11 <= 0):
        raise DegenerateSurfaceError("induced metric is not positive definite")
    return g


def _unit_normal(w, pos, T, psi):
    N = np.cross(T[1], T[0], axis=0)  # outward for latitude/longitude order
    R2 = _dot(pos, pos)
    f2 = 1.0 / (1.0 + psi * R2)
    nu = N - (psi * f2 * _dot(pos, N)) * pos  # sigma^{-1} N
    norm = np.sqrt(sigma_dot(w, pos, nu, nu, psi))
    return nu / norm


def parametric_shape(w, grid, pos, T, nu):
    """Second fundamental form from the ambient Hessian of the position map."""
    psi, psi1 = psi_fields(w, np.moveaxis(pos, 0, -1))
    Yuu = grid.d2_lat(pos)
    Yvv = grid.d2_lon(pos)
    Yuv = grid.d_lat(grid.d_lon(pos))
    zn = _dot(pos, nu)
    zt = [_dot(pos, T[0]), _dot(pos, T[1])]

    def comp(Yij, i, j):
        gamma_part = zn * (psi * _dot(T[i], T[j]) + 0.5 * psi1 * zt[i] * zt[j])
        return -(sigma_dot(w, pos, Yij, nu, psi) + gamma_part)

    return _sym(comp(Yuu, 0, 0), comp(Yuv, 0, 1), comp(Yvv, 1, 1))


def metric_christoffels(grid, g):
    """``Gamma^l_ij`` of a gridded 2-metric, shape ``(2, 2, 2, n_lat, n_lon)``."""
    par = np.array([[1.0, -1.0], [-1.0, 1.0]])
    dg = np.empty((2,) + g.shape)  # dg[k, i, j] = d_k g_ij
    for i in range(2):
        for j in range(2):
            dg[0, i, j] = grid.d_lat(g[i, j], parity=par[i, j])
            dg[1, i, j] = grid.d_lon(g[i, j])
    first = 0.5 * (
        np.einsum("ijk...->kij...", dg)  # d_i g_jk arranged as [k, i, j]
        + np.einsum("jik...->kij...", dg)
        - dg
    )
    ginv, _ = _inv2(g)
    return np.einsum("lk...,kij...->lij...", ginv, first)


def darboux_shape(emb: SurfaceEmbedding):
    """Second fundamental form from the support function and ``rho = r^2/2``.

    Uses ``h_ij f phi = (f_rho/f) rho_i rho_j + f^2 g_ij - rho_{;ij}`` with the
    covariant Hessian built from Christoffel symbols of the discrete metric.
    """
    if np.any(emb.phi <= 0):
        raise NotStarShapedError("support function is not positive")
    grid, w, rho, g = emb.grid, emb.warp, emb.rho, emb.g
    f, fp, _ = warp_eval(w, emb.r)
    f_rho = fp / emb.r
    d = np.stack([grid.d_lat(rho), grid.d_lon(rho)])
    hess = _sym(grid.d2_lat(rho), grid.d_lat(grid.d_lon(rho)), grid.d2_lon(rho))
    Gam = metric_christoffels(grid, g)
    cov = hess - np.einsum("lij...,l...->ij...", Gam, d)
    num = (f_rho / f) * d[:, None] * d[None, :] + f * f * g - cov
    return num / (f * emb.phi)


def embed(position, grid: SphereGrid, w: WarpFunction) -> SurfaceEmbedding:
    """Compute metric, normal, support data and parametric shape of a position field."""
    pos = np.array(position, dtype=float)
    if pos.shape != (3,) + grid.shape:
        raise ValueError(f"position must have shape {(3,) + grid.shape}")
    r = np.sqrt(_dot(pos, pos))
    w.check_domain(r)
    T = _tangents(grid, pos)
    psi, _ = psi_fields(w, np.moveaxis(pos, 0, -1))
    g = _sym(
        sigma_dot(w, pos, T[0], T[0], psi),
        sigma_dot(w, pos, T[0], T[1], psi),
        sigma_dot(w, pos, T[1], T[1], psi),
    )
    if np.any(g[0, 0] * g[1, 1] - g[0, 1] ** 2 <= 0) or np.any(g[0, 0] <= 0):
        raise DegenerateSurfaceError("induced metric is not positive definite")
    nu = _unit_normal(w, pos, T, psi)
    f, _, _ = warp_eval(w, r)
    phi = _dot(pos, nu) / f
    h = parametric_shape(w, grid, pos, T, nu)
    return SurfaceEmbedding(grid, w, pos, T, g, nu, phi, 0.5 * r * r, r, h)


def geodesic_sphere(w: WarpFunction, r, grid: SphereGrid) -> SurfaceEmbedding:
    """Coordinate sphere of radius ``r`` centred at the origin."""
    w.check_domain(r)
    pos = float(r) * np.moveaxis(grid.directions(), -1, 0)
    return embed(pos, grid, w)


def second_fundamental_form(emb: SurfaceEmbedding, method="parametric"):
    if method == "parametric":
        return emb.h
    if method == "darboux":
        return darboux_shape(emb)
    raise ValueError(f"unknown method {method!r}")


def intrinsic_gauss_curvature(g, grid: SphereGrid):
    """Gauss curvature of a gridded metric.

    Orthogonal metrics (``g_12 = 0``) use ``K = -(1/ab)[(b_u/a)_u + (a_v/b)_v]``
    with ``a = sqrt(E)`` and ``b = sqrt(G)``; ``b`` changes sign across a pole
    like ``cos u`` does, which keeps the stencils 4th order up to the poles.
    Other metrics fall back to the Brioschi formula, whose pole terms cancel
    only to 2nd order.
    """
    E, Fm, G = g[0, 0], g[0, 1], g[1, 1]
    det = E * G - Fm * Fm
    if np.any(det <= 0):
        raise DegenerateSurfaceError("metric is not positive definite")
    if np.max(np.abs(Fm)) <= 1e-13 * np.max(np.abs(E) + np.abs(G)):
        a, b = np.sqrt(E), np.sqrt(G)
        t1 = grid.d_lat(grid.d_lat(b, parity=-1.0) / a)
        t2 = grid.d_lon(grid.d_lon(a) / b)
        return -(t1 + t2) / (a * b)
    E_u, E_v = grid.d_lat(E), grid.d_lon(E)
    G_u, G_v = grid.d_lat(G), grid.d_lon(G)
    F_u, F_v = grid.d_lat(Fm, parity=-1.0), grid.d_lon(Fm)
    E_vv = grid.d2_lon(E)
    G_uu = grid.d2_lat(G)
    F_uv = grid.d_lat(grid.d_lon(Fm), parity=-1.0)
    a = -0.5 * E_vv + F_uv - 0.5 * G_uu
    m1 = np.array(
        [[a, 0.5 * E_u, F_u - 0.5 * E_v], [F_v - 0.5 * G_u, E, Fm], [0.5 * G_v, Fm, G]]
    )
    zero = np.zeros_like(E)
    m2 = np.array([[zero, 0.5 * E_v, 0.5 * G_u], [0.5 * E_v, E, Fm], [0.5 * G_u, Fm, G]])
    d1 = np.linalg.det(np.moveaxis(m1, (0, 1), (-2, -1)))
    d2 = np.linalg.det(np.moveaxis(m2, (0, 1), (-2, -1)))
    return (d1 - d2) / det**2


@dataclass(frozen=True)
class CurvatureReport:
    kappa1: np.ndarray
    kappa2: np.ndarray
    H: np.ndarray
    sigma2: np.ndarray
    K: np.ndarray
    source: np.ndarray
    gauss_residual: np.ndarray
    literal_residual: np.ndarray


def principal_curvatures(g, h):
    """Eigenvalues of ``g^{-1} h`` (ascending), mean curvature and ``sigma_2``."""
    ginv, det = _inv2(g)
    H = np.einsum("ij...,ji...->...", ginv, h)
    s2 = (h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]) / det
    disc = np.sqrt(np.maximum(0.25 * H * H - s2, 0.0))
    return 0.5 * H - disc, 0.5 * H + disc, H, s2


def curvatures(emb: SurfaceEmbedding, h=None) -> CurvatureReport:
    """Principal curvatures plus the Gauss-equation cross-check.

    ``gauss_residual`` is ``sigma2 - K - source`` in the anchored convention;
    ``literal_residual`` is the residual of the sign-flipped variant
    ``sigma2 = -K + source`` and is reported, never asserted.
    """
    h = emb.h if h is None else h
    k1, k2, H, s2 = principal_curvatures(emb.g, h)
    K = intrinsic_gauss_curvature(emb.g, emb.grid)
    src = ambient_sigma2_source(emb.warp, emb.r, emb.nu1_sq, n=3)
    return CurvatureReport(k1, k2, H, s2, K, src, s2 - K - src, s2 + K - src)


def sigma2_via_darboux(emb: SurfaceEmbedding, K=None):
    """``sigma_2`` from ``rho``, ``|grad rho|`` and ``f`` through the Gauss equation.

    The radial normal component comes from the support identity
    ``(nu^1)^2 = 1 - |grad rho|^2 / (2 rho f^2)``.  ``K`` is the intrinsic
    curvature (computed from the discrete metric when omitted; it equals 1 for
    surfaces isometric to the unit sphere).
    """
    if np.any(emb.phi <= 0):
        raise NotStarShapedError("support function is not positive")
    grid = emb.grid
    f, _, _ = warp_eval(emb.warp, emb.r)
    d = np.stack([grid.d_lat(emb.rho), grid.d_lon(emb.rho)])
    ginv, _ = _inv2(emb.g)
    grad2 = np.einsum("ij...,i...,j...->...", ginv, d, d)
    nu1_sq = np.clip(1.0 - grad2 / (2.0 * emb.rho * f * f), 0.0, 1.0)
    if K is None:
        K = intrinsic_gauss_curvature(emb.g, grid)
    return K + ambient_sigma2_source(emb.warp, emb.r, nu1_sq, n=3)


def support_identity_residual(emb: SurfaceEmbedding):
    """Relative residual of ``phi^2 = 2 rho - |grad rho|^2 / f^2`` per node."""
    f, _, _ = warp_eval(emb.warp, emb.r)
    ginv, _ = _inv2(emb.g)
    d = emb.grad_rho
    grad2 = np.einsum("ij...,i...,j...->...", ginv, d, d)
    rhs = 2.0 * emb.rho - grad2 / (f * f)
    return np.abs(emb.phi**2 - rhs) / (2.0 * emb.rho)


def area_integral(emb: SurfaceEmbedding, field_):
    """``int field d sigma`` with fixed-order summation."""
    return emb.grid.integrate(field_, np.sqrt(emb.det_g))


def centering_integral(emb: SurfaceEmbedding):
    """``int Y d sigma`` componentwise."""
    return np.array([area_integral(emb, emb.position[k]) for k in range(3)])


CSV_COLUMNS = ("u1", "u2", "z1", "z2", "z3", "g11", "g12", "g22", "h11", "h12", "h22", "phi", "H", "sigma2")


def write_surface_csv(emb: SurfaceEmbedding, path):
    """One row per node, 17 significant digits."""
    U, V = emb.grid.mesh()
    rep = principal_curvatures(emb.g, emb.h)
    cols = [
        U, V, emb.position[0], emb.position[1], emb.position[2],
        emb.g[0, 0], emb.g[0, 1], emb.g[1, 1], emb.h[0, 0], emb.h[0, 1], emb.h[1, 1],
        emb.phi, rep[2], rep[3],
    ]
    flat = np.stack([np.ravel(c) for c in cols], axis=1)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for row in flat:
            wr.writerow([format(x, ".17g") for x in row])
