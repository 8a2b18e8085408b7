"""Perturbed spheres that stay isometric to a round sphere.

The surface is ``Y = r x + y(sin u) e3`` with ``x`` the unit direction and a
vertical displacement ``y = eps + eps^2 h``.  Writing ``s = sin u`` the
isometry condition is the scalar ODE

    2 r y' + W(s, y, y') = 0,

where ``W`` collects ``y'^2`` and the ``psi`` terms of the ambient metric.  The
profile ``h`` is the fixed point of

    (T h)(t) = -1/(2 r eps^2) int_0^t W(s, eps + eps^2 h, eps^2 h') ds,

solved by Picard iteration on Chebyshev-Gauss-Lobatto nodes.  For ``r = 1`` the
factor ``1/r`` is invisible; for other radii it is what makes ``Y`` isometric.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import DomainError, NoContractionError
from .grid import SphereGrid
from .metric import WarpFunction, warp_eval
from .profile import Meridian, gauss_legendre_latitudes, revolution_geometry, surface_integral
from .surface import SurfaceEmbedding, embed, geodesic_sphere


@lru_cache(maxsize=8)
def _cgl(n_nodes):
    """CGL nodes ascending in ``[-1, 1]`` and the values-to-coefficients map."""
    deg = n_nodes - 1
    s = -np.cos(np.pi * np.arange(n_nodes) / deg)
    if deg % 2 == 0:
        s[deg // 2] = 0.0
    inv = np.linalg.inv(C.chebvander(s, deg))
    s.setflags(write=False)
    inv.setflags(write=False)
    return s, inv


def cgl_diff_matrix(n_nodes):
    """Barycentric differentiation matrix on the ascending CGL nodes."""
    s, _ = _cgl(n_nodes)
    n = n_nodes
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    X = s[:, None] - s[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return D


@dataclass(frozen=True, eq=False)
class PerturbationProfile:
    """A function of ``s in [-1, 1]`` sampled on Chebyshev-Gauss-Lobatto nodes."""

    values: np.ndarray
    coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 3:
            raise ValueError("profile needs at least 3 nodal values")
        _, inv = _cgl(vals.size)
        coef = inv @ vals
        vals.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "coef", coef)

    @classmethod
    def from_function(cls, func, n_nodes=64):
        s, _ = _cgl(n_nodes)
        return cls(func(s))

    @classmethod
    def zeros(cls, n_nodes=64):
        return cls(np.zeros(n_nodes))

    @property
    def nodes(self):
        return _cgl(self.values.size)[0]

    @property
    def n_nodes(self):
        return self.values.size

    def __call__(self, s, deriv=0):
        c = C.chebder(self.coef, deriv) if deriv else self.coef
        return C.chebval(np.asarray(s, dtype=float), c)

    def derivative_values(self):
        return cgl_diff_matrix(self.n_nodes) @ self.values

    def antiderivative(self):
        """Profile of ``int_0^s`` (vanishes at ``s = 0``)."""
        c = C.chebint(self.coef, lbnd=0.0)
        return PerturbationProfile(C.chebval(self.nodes, c))

    def sup_distance(self, other):
        return float(np.max(np.abs(self.values - other.values)))


@dataclass(frozen=True)
class ConstructionParams:
    warp: WarpFunction
    r: float = 1.0
    eps: float = 0.02
    quad_order: int = 32
    tol: float = 1e-12
    max_iter: int = 100
    n_nodes: int = 64
    eps_guard: float = 0.1

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.quad_order < 16:
            raise ValueError("quad_order must be at least 16")
        if self.n_nodes < 8:
            raise ValueError("n_nodes must be at least 8")
        self.warp.check_domain(self.r)


@lru_cache(maxsize=16)
def _gauss01(order):
    x, wts = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * wts


def w_eval(params: ConstructionParams, s, g, gp):
    """Integrand ``W`` of the profile map at ``s`` for displacement ``g`` and ``dg/ds``.

    The ``psi`` contributions are written as integrals over ``t in [0, 1]`` of
    quantities evaluated at ``|r x + t g e3|`` and computed by Gauss-Legendre.
    """
    w, r = params.warp, params.r
    s, g, gp = (np.asarray(a, dtype=float) for a in (s, g, gp))
    s, g, gp = np.broadcast_arrays(s, g, gp)
    if w.is_flat:
        return gp * gp
    tq, wq = _gauss01(params.quad_order)
    t = tq.reshape((1,) * s.ndim + (-1,))
    S, G, GP = s[..., None], g[..., None], gp[..., None]
    rt = np.sqrt(r * r + t * t * G * G + 2.0 * t * r * S * G)
    try:
        p, dp, d2p = w.psi(rt)
    except DomainError as exc:
        raise DomainError(f"perturbation reaches outside the warp domain: {exc}") from exc
    p1 = dp / rt
    p1p = (d2p / rt - dp / rt**2) / rt  # (1/r) d/dr (psi'/r)
    a = r * S + t * G
    i1 = (1 - t) * t**2 * G**4 * (p1p * a**2 + p1) * r**2
    i2 = 4 * (1 - t) * t * G**3 * p1 * a * r**2
    i3 = 2 * (1 - t) * G**2 * p * r**2
    i4 = G * p1 * a**2 * (2 * t * r * G * GP + a * GP**2)
    i5 = G * p * (2 * r * GP * (r * S + 2 * t * G) + 2 * GP**2 * a)
    p_r = w.psi(np.asarray(r, dtype=float))[0]
    lead = (r * r * p_r * s * s + 1.0) * gp * gp
    return lead + np.sum((i1 + i2 + i3 + i4 + i5) * wq, axis=-1)


def isometry_defect(params: ConstructionParams, s, g, gp):
    """Closed form of ``W``: ``g'^2 + psi(|Y|) (Y . dY/ds)^2`` (used as an oracle)."""
    w, r = params.warp, params.r
    rt = np.sqrt(r * r + 2 * r * s * g + g * g)
    p = w.psi(rt)[0] if not w.is_flat else 0.0
    rs = r * s * gp + r * g + g * gp
    return gp * gp + p * rs * rs


def _apply_t(params, h: PerturbationProfile, quad_order=None):
    if quad_order is not None:
        params = replace(params, quad_order=quad_order)
    eps, r = params.eps, params.r
    s = h.nodes
    y = eps + eps * eps * h.values
    yp = eps * eps * h(s, deriv=1)
    W = PerturbationProfile(w_eval(params, s, y, yp))
    return PerturbationProfile(-W.antiderivative().values / (2.0 * r * eps * eps))


def t_map(params: ConstructionParams, h: PerturbationProfile) -> PerturbationProfile:
    if h.n_nodes != params.n_nodes:
        raise ValueError("profile node count does not match params")
    return _apply_t(params, h)


@dataclass
class SolveDiagnostics:
    iterations: int
    residual: float
    lipschitz_ratio: float
    ratios: list
    posthoc_residual: float
    converged: bool = True


def fixed_point_solve(params: ConstructionParams):
    """Picard iteration ``h <- T h`` from ``h = 0``.

    The empirical Lipschitz ratio is ``|h_{k+1} - h_k| / |h_k - h_{k-1}|``;
    ratios are only recorded while the step is well above rounding noise.
    """
    if params.eps > params.eps_guard:
        raise ValueError(f"eps={params.eps} exceeds eps_guard={params.eps_guard}")
    h = PerturbationProfile.zeros(params.n_nodes)
    prev_step = None
    ratios, bad = [], 0
    noise = 1e-13
    for it in range(1, params.max_iter + 1):
        Th = t_map(params, h)
        step = Th.sup_distance(h)
        if prev_step is not None and prev_step > noise * 1e2:
            ratio = step / prev_step
            ratios.append(ratio)
            bad = bad + 1 if ratio >= 1.0 else 0
            if bad >= 3:
                raise NoContractionError(
                    f"Picard ratio >= 1 for 3 consecutive iterations (eps={params.eps})"
                )
        h, prev_step = Th, step
        if step <= params.tol:
            break
    else:
        raise NoContractionError(
            f"no convergence in {params.max_iter} iterations (last step {prev_step:.3e})"
        )
    post = _apply_t(params, h, quad_order=2 * params.quad_order).sup_distance(h)
    diag = SolveDiagnostics(
        iterations=it,
        residual=step,
        lipschitz_ratio=max(ratios) if ratios else 0.0,
        ratios=ratios,
        posthoc_residual=post,
    )
    return h, diag


def first_order_profile(params: ConstructionParams) -> PerturbationProfile:
    """Leading-order fixed point ``h = -psi(r) r s / 2``."""
    w, r = params.warp, params.r
    alpha = 0.0 if w.is_flat else -0.5 * float(w.psi(np.asarray(r))[0]) * r
    return PerturbationProfile.from_function(lambda s: alpha * s, params.n_nodes)


def displacement(params, h: PerturbationProfile, s, deriv=0):
    eps = params.eps
    base = eps if deriv == 0 else 0.0
    return base + eps * eps * h(s, deriv=deriv)


def build_surface(params: ConstructionParams, h: PerturbationProfile, grid: SphereGrid) -> SurfaceEmbedding:
    dirs = np.moveaxis(grid.directions(), -1, 0)
    s = dirs[2]
    pos = params.r * dirs
    pos[2] = pos[2] + displacement(params, h, s)
    return embed(pos, grid, params.warp)


def isometry_residual(Y: SurfaceEmbedding, r):
    """Max relative deviation of ``g_Y`` from the metric of the radius-``r`` sphere.

    The reference metric is computed with the same stencils on the same grid,
    so the number measures the construction rather than differencing error.
    """
    base = geodesic_sphere(Y.warp, r, Y.grid)
    return float(np.max(np.abs(Y.g - base.g)) / (r * r))


def meridian(params, h: PerturbationProfile, u):
    u = np.asarray(u, dtype=float)
    r = params.r
    s, c = np.sin(u), np.cos(u)
    y = displacement(params, h, s)
    yp = displacement(params, h, s, 1)
    ypp = displacement(params, h, s, 2)
    return Meridian(
        u, r * c, -r * s, -r * c,
        r * s + y, (r + yp) * c, -r * s + ypp * c * c - yp * s,
    )


def predicted_deviation_coefficient(w: WarpFunction, r):
    """``[f f'/r + (1 - f^2)/r^2] / f``, the slope of ``kappa_i - f/r`` in ``eps sin u``."""
    f, _, _ = warp_eval(w, np.asarray(r, dtype=float))
    c = 0.5 * w.m / r**3 + w.kappa + (w.m / r - w.kappa * r * r) / r**2
    return float(c / f)


@dataclass
class CurvatureTable:
    u: np.ndarray
    dev1: np.ndarray  # meridian curvature minus f/r
    dev2: np.ndarray  # parallel curvature minus f/r
    predicted: np.ndarray

    def rows(self):
        return [
            {"u1": float(a), "dev_meridian": float(b), "dev_parallel": float(c), "predicted": float(d)}
            for a, b, c, d in zip(self.u, self.dev1, self.dev2, self.predicted)
        ]


def curvature_deviation_report(params: ConstructionParams, h: PerturbationProfile, latitudes):
    """Principal curvatures minus ``f(r)/r`` against the first-order law."""
    geom = revolution_geometry(params.warp, meridian(params, h, latitudes))
    f0 = float(warp_eval(params.warp, np.asarray(params.r))[0])
    base = f0 / params.r
    c = predicted_deviation_coefficient(params.warp, params.r)
    u = np.asarray(latitudes, dtype=float)
    return CurvatureTable(u, geom.kappa1 - base, geom.kappa2 - base, c * params.eps * np.sin(u))


@dataclass
class DeviationFit:
    latitudes: np.ndarray
    eps: np.ndarray
    slopes1: np.ndarray  # Richardson-extrapolated coefficient per latitude
    slopes2: np.ndarray
    predicted: float
    max_relative_error: float
    max_abs_slope: float
    raw: np.ndarray = field(repr=False, default=None)


def _richardson_to_zero(eps, vals):
    """Value at eps -> 0 of a polynomial fit in eps through all samples."""
    V = np.vander(np.asarray(eps), len(eps), increasing=True)
    return np.linalg.solve(V, vals)[0]


def curvature_deviation_fit(params: ConstructionParams, eps_list=(0.04, 0.02, 0.01), latitudes=None):
    """Extrapolate ``(kappa_i - f/r)/(eps sin u)`` to ``eps -> 0``."""
    if latitudes is None:
        latitudes = np.linspace(-1.2, 1.2, 9)
        latitudes = latitudes[np.abs(np.sin(latitudes)) > 0.1]
    u = np.asarray(latitudes, dtype=float)
    raw = []
    for eps in eps_list:
        p = replace(params, eps=float(eps))
        h, _ = fixed_point_solve(p)
        tab = curvature_deviation_report(p, h, u)
        raw.append(np.stack([tab.dev1, tab.dev2]) / (eps * np.sin(u)))
    raw = np.array(raw)  # (n_eps, 2, n_lat)
    slopes = np.apply_along_axis(lambda col: _richardson_to_zero(eps_list, col), 0, raw)
    pred = predicted_deviation_coefficient(params.warp, params.r)
    if pred != 0.0:
        rel = float(np.max(np.abs(slopes - pred)) / abs(pred))
    else:
        rel = float("inf") if np.max(np.abs(slopes)) > 0 else 0.0
    return DeviationFit(u, np.asarray(eps_list, float), slopes[0], slopes[1], pred, rel,
                        float(np.max(np.abs(slopes))), raw)


def mass_integral(params: ConstructionParams, h: PerturbationProfile, n_quad=200):
    """``(6/4pi) int [(H/2) f - f(1) f] d sigma`` over the perturbed unit sphere."""
    u, wts = gauss_legendre_latitudes(n_quad)
    geom = revolution_geometry(params.warp, meridian(params, h, u))
    f_ref = float(warp_eval(params.warp, np.asarray(params.r))[0])
    vals = (0.5 * geom.H - f_ref) * geom.f
    return 6.0 / (4.0 * np.pi) * surface_integral(geom, vals, wts)


def mass_expansion_target(w: WarpFunction):
    return 0.75 * w.m * (w.m + 2 * w.kappa) / (1 - w.m + w.kappa)


@dataclass
class MassExpansionFit:
    eps: list
    values: list
    coefficient: float
    target: float
    relative_error: float


def mass_expansion(w: WarpFunction, eps_list, quad_order=32, tol=1e-13, n_nodes=64):
    """Fit the ``eps^2`` coefficient of :func:`mass_integral` on the unit sphere."""
    eps_arr = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if eps_arr.size < 1:
        raise ValueError("need at least one eps")
    if 1 - w.m + w.kappa <= 0:
        raise DomainError("need 1 - m + kappa > 0")
    vals = []
    for eps in eps_arr:
        p = ConstructionParams(w, 1.0, float(eps), quad_order=quad_order, tol=tol, n_nodes=n_nodes)
        h, _ = fixed_point_solve(p)
        vals.append(mass_integral(p, h))
    vals = np.array(vals)
    k = min(len(eps_arr), 3)
    A = np.stack([eps_arr ** (2 + j) for j in range(k)], axis=1)
    coef = float(np.linalg.lstsq(A, vals, rcond=None)[0][0])
    target = mass_expansion_target(w)
    rel = abs(coef - target) / abs(target) if target != 0 else abs(coef)
    return MassExpansionFit(eps_arr.tolist(), vals.tolist(), coef, target, float(rel))
