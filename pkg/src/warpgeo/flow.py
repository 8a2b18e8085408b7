"""Outward geodesic flow of a convex surface in a Schwarzschild exterior.

Each surface point moves along the ambient geodesic leaving it in the normal
direction, with unit speed.  Along such a geodesic

* ``r_t = f phi / r`` and ``phi_t = f`` so ``C = r^2 - phi^2`` is conserved,
* the principal curvatures obey the Riccati equation
  ``lambda_t = -lambda^2 + K(nu, mu)`` with ``K`` the ambient curvature of the
  plane spanned by the normal and the principal direction,
* the meridian and parallel lengths ``a, b`` grow like ``a_t = lambda_1 a``.

The conformal factor ``u`` solves ``H0 u_t = u^2 Lap u + (u - u^3) R/2`` where
``H0`` is the mean curvature and ``R`` the scalar curvature of the leaf.  The
mass quantity is

    Q = (1/8pi) int (H0 - H0/u) f d sigma + m/2,

normalized so that it tends to ``m0 + m/2`` when ``u = 1 + m0/t + ...``.

Two modes are provided: ``round`` (a single coordinate sphere, everything is a
scalar ODE) and ``axisymmetric`` (surface of revolution sampled on offset
latitudes).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import ClosenessError, ConvexityError, FitError, PositivityError, StabilityError
from .grid import fejer_weights, latitude_derivative_1d, offset_latitudes
from .metric import WarpFunction, sectional, warp_eval
from .profile import Meridian, revolution_geometry

if os.environ.get("WARPGEO_PURE_PYTHON"):
    from . import _flowkernel_py as _kernel
else:
    try:
        from . import _flowkernel as _kernel
    except ImportError:  # extension not built
        from . import _flowkernel_py as _kernel

BACKEND = "cython" if _kernel.__name__.endswith("_flowkernel") else "python"


@dataclass(frozen=True, eq=False)
class FlowState:
    """Snapshot of the flow.  Node arrays have length 1 in round mode."""

    t: float
    mode: str
    warp: WarpFunction
    r: np.ndarray
    phi: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    u: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lat: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def C(self):
        return self.r**2 - self.phi**2

    @property
    def H0(self):
        return self.lam1 + self.lam2

    @property
    def Q(self):
        return mass_Q(self)

    @property
    def area_density(self):
        return self.a * self.b


def _check_warp(w: WarpFunction):
    if w.kappa != 0.0:
        raise ValueError("the flow module supports kappa = 0 only (Schwarzschild or Euclidean)")


def _initial_u(u0, H0, H1):
    if u0 is not None and H1 is not None:
        raise ValueError("give either u0 or H1, not both")
    if H1 is not None:
        H1 = np.broadcast_to(np.asarray(H1, dtype=float), H0.shape)
        if np.any(H1 <= 0):
            raise ValueError("H1 must be positive")
        return H0 / H1
    u = np.broadcast_to(np.asarray(1.0 if u0 is None else u0, dtype=float), H0.shape).copy()
    if np.any(u <= 0):
        raise PositivityError("initial u must be positive")
    return u


def flow_init(w: WarpFunction, r0, u0=None, H1=None, mode="round", delta=0.0, n_lat=32):
    """Initial state for a round sphere or a radial graph ``r0 (1 + delta P2(sin u))``.

    ``u0`` fixes the conformal factor directly; ``H1`` gives it as ``H0/H1``.
    """
    _check_warp(w)
    w.check_domain(r0)
    if mode == "round":
        if delta:
            raise ValueError("delta applies to axisymmetric mode only")
        f = float(warp_eval(w, np.asarray(r0))[0])
        lam = np.array([f / r0])
        u = _initial_u(u0, 2 * lam, H1)
        one = np.array([1.0])
        return FlowState(0.0, "round", w, np.array([float(r0)]), np.array([float(r0)]),
                         lam, lam.copy(), u, one * r0, one * r0, np.zeros(1), np.array([2.0]))
    if mode != "axisymmetric":
        raise ValueError(f"unknown mode {mode!r}")
    lat = offset_latitudes(int(n_lat))
    s, c = np.sin(lat), np.cos(lat)
    R = r0 * (1 + delta * 0.5 * (3 * s * s - 1))
    dR = r0 * delta * 3 * s * c
    d2R = r0 * delta * 3 * np.cos(2 * lat)
    geom = revolution_geometry(w, Meridian.radial_graph(lat, R, dR, d2R))
    lam1, lam2 = geom.kappa1, geom.kappa2
    if np.min(np.minimum(lam1, lam2)) <= 0:
        raise ConvexityError("initial surface is not strictly convex")
    C = geom.r**2 - geom.phi**2
    if np.any(3 * C >= geom.r**2):
        raise ClosenessError("initial surface violates 3C < r^2")
    u = _initial_u(u0, lam1 + lam2, H1)
    wts = fejer_weights(int(n_lat))
    return FlowState(0.0, "axisymmetric", w, geom.r, geom.phi, lam1, lam2, u,
                     np.sqrt(geom.g11), np.sqrt(geom.g22), lat, wts)


def mass_Q(state: FlowState):
    f = warp_eval(state.warp, state.r)[0]
    H0 = state.H0
    integrand = (H0 - H0 / state.u) * f
    if state.mode == "round":
        total = 4 * np.pi * state.r[0] ** 2 * integrand[0]
    else:
        dens = state.a * state.b / np.cos(state.lat)
        total = 2 * np.pi * float(np.sum(state.weights * integrand * dens))
    return float(total / (8 * np.pi) + 0.5 * state.warp.m)


def leaf_gauss_curvature(state: FlowState):
    """Intrinsic curvature of an axisymmetric leaf from ``a`` and ``b`` alone."""
    h = np.pi / state.lat.size
    bu = latitude_derivative_1d(state.b, h, parity=-1.0)
    return -latitude_derivative_1d(bu / state.a, h) / (state.a * state.b)


def gauss_equation_curvature(state: FlowState):
    """Intrinsic curvature predicted by the Gauss equation (cross-check)."""
    m, r = state.warp.m, state.r
    return state.lam1 * state.lam2 - 0.5 * m / r**3 * (1 - 3 * state.phi**2 / r**2)


def _laplacian_bands(state: FlowState):
    """Tridiagonal conservative Laplacian ``(1/ab) d_u((b/a) d_u)`` with closed poles."""
    h = np.pi / state.lat.size
    ratio = state.b / state.a
    face = 0.5 * (ratio[1:] + ratio[:-1])
    scale = 1.0 / (state.a * state.b * h * h)
    lower = np.zeros_like(ratio)
    upper = np.zeros_like(ratio)
    upper[:-1] = face
    lower[1:] = face
    diag = -(upper + lower)
    return lower * scale, diag * scale, upper * scale


def _u_step(state: FlowState, u_old, dt, R, max_iter=50, tol=1e-13):
    """Backward-Euler step, lagging only the ``u^2`` coefficient."""
    lo, di, up = _laplacian_bands(state)
    H0 = state.H0
    rhs = H0 / dt * u_old + 0.5 * (u_old - u_old**3) * R
    u = u_old.copy()
    for _ in range(max_iter):
        coef = u * u
        ab = np.zeros((3, u.size))
        ab[0, 1:] = -coef[:-1] * up[:-1]
        ab[1] = H0 / dt - coef * di
        ab[2, :-1] = -coef[1:] * lo[1:]
        new = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(new)):
            raise StabilityError("semi-implicit u solve produced non-finite values")
        change = np.max(np.abs(new - u))
        u = new
        if change <= tol * max(1.0, np.max(np.abs(u))):
            return u
    raise StabilityError("lagged-coefficient iteration for u did not converge")


def stable_dt(state: FlowState):
    """``0.25 (min a du)^2 H0 / max(u)^2``, the u-step size used in axisymmetric mode."""
    h = np.pi / state.lat.size
    return float(0.25 * (np.min(state.a) * h) ** 2 * np.min(state.H0) / np.max(state.u) ** 2)


def flow_step(state: FlowState, dt) -> FlowState:
    """Advance by ``dt`` (sub-stepped in axisymmetric mode when ``dt`` is too large)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = state.warp.m
    if state.mode == "round":
        out = _kernel.round_integrate(m, state.r[0], state.phi[0], state.lam1[0], state.u[0], dt, 1, 1)
        _, r, phi, lam, u = out[-1]
        new = replace(state, t=state.t + dt, r=np.array([r]), phi=np.array([phi]),
                      lam1=np.array([lam]), lam2=np.array([lam]), u=np.array([u]),
                      a=np.array([r]), b=np.array([r]))
        _post_check(new)
        return new
    n_sub = max(1, int(np.ceil(dt / stable_dt(state))))
    sub = dt / n_sub
    for _ in range(n_sub):
        y = np.ascontiguousarray(np.stack([state.r, state.phi, state.lam1, state.lam2, state.a, state.b]))
        _kernel.nodes_rk4(m, y, sub)
        geo = replace(state, t=state.t + sub, r=y[0], phi=y[1], lam1=y[2], lam2=y[3], a=y[4], b=y[5])
        R = 2.0 * leaf_gauss_curvature(geo)
        u = _u_step(geo, state.u, sub, R)
        state = replace(geo, u=u)
        _post_check(state)
    return state


def _post_check(state):
    if np.min(np.minimum(state.lam1, state.lam2)) <= 0:
        raise ConvexityError(f"principal curvature became non-positive at t={state.t}")
    if np.min(state.u) <= 0:
        raise PositivityError(f"u became non-positive at t={state.t}")


@dataclass
class FlowTrace:
    """Append-only record of a run (columns of the trace CSV plus diagnostics)."""

    t: np.ndarray
    r: np.ndarray
    lam: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    u_mean: np.ndarray
    Q: np.ndarray
    C_drift: np.ndarray
    lam_gap: np.ndarray  # |lambda - f(r)/r| (round) or Gauss-equation gap (axisymmetric)
    final: FlowState = field(repr=False, default=None)
    truncation: float = 0.0

    def rows(self):
        return zip(self.t, self.r, self.lam, self.u_min, self.u_max, self.Q)


def _round_trace(state, dt, n_steps, record_every):
    m = state.warp.m
    out = _kernel.round_integrate(m, state.r[0], state.phi[0], state.lam1[0], state.u[0],
                                  dt, n_steps, record_every)
    t, r, phi, lam, u = (out[:, k] for k in range(5))
    if np.any(lam <= 0):
        raise ConvexityError("principal curvature became non-positive")
    if np.any(u <= 0):
        raise PositivityError("u became non-positive")
    f = warp_eval(state.warp, r)[0]
    Q = 0.5 * r * r * (2 * lam) * (1 - 1 / u) * f + 0.5 * m
    C = r * r - phi * phi
    C0 = state.C[0]
    drift = np.abs(C - C0) / max(r[0] ** 2, 1e-300)
    final = replace(state, t=float(t[-1]), r=r[-1:], phi=phi[-1:], lam1=lam[-1:], lam2=lam[-1:],
                    u=u[-1:], a=r[-1:], b=r[-1:])
    return FlowTrace(t, r, lam, u, u, u, Q, drift, np.abs(lam - f / r), final)


def _q_truncation(state, dt):
    """Step-doubling estimate of the local error of ``Q`` for one step ``dt``."""
    one = flow_step(state, dt)
    two = flow_step(flow_step(state, 0.5 * dt), 0.5 * dt)
    return abs(mass_Q(one) - mass_Q(two))


def run_flow(state: FlowState, dt, t_max, record_every=1) -> FlowTrace:
    """Integrate to ``t_max`` recording every ``record_every`` steps."""
    if not (dt > 0 and t_max > 0):
        raise ValueError("dt and t_max must be positive")
    n_steps = int(round(t_max / dt))
    if abs(n_steps * dt - t_max) > 1e-9 * t_max:
        raise ValueError("t_max must be a multiple of dt")
    record_every = max(1, int(record_every))
    if state.mode == "round":
        trace = _round_trace(state, dt, n_steps, record_every)
    else:
        trace = _axisymmetric_trace(state, dt, n_steps, record_every)
    trace.truncation = max(_q_truncation(state, dt), _q_truncation(trace.final, dt))
    return trace


def _axisymmetric_trace(state, dt, n_steps, record_every):
    C0 = state.C
    scale = np.max(state.r**2)
    cols = {k: [] for k in ("t", "r", "lam", "u_min", "u_max", "u_mean", "Q", "C", "gap")}

    def record(s):
        dens = s.a * s.b / np.cos(s.lat)
        area = np.sum(s.weights * dens)
        cols["t"].append(s.t)
        cols["r"].append(float(np.sum(s.weights * s.r * dens) / area))
        cols["lam"].append(float(np.min(np.minimum(s.lam1, s.lam2))))
        cols["u_min"].append(float(np.min(s.u)))
        cols["u_max"].append(float(np.max(s.u)))
        cols["u_mean"].append(float(np.sum(s.weights * s.u * dens) / area))
        cols["Q"].append(mass_Q(s))
        cols["C"].append(float(np.max(np.abs(s.C - C0)) / scale))
        gap = np.abs(leaf_gauss_curvature(s) - gauss_equation_curvature(s))
        cols["gap"].append(float(np.max(gap)))

    record(state)
    for i in range(1, n_steps + 1):
        state = flow_step(state, dt)
        state = replace(state, t=i * dt)
        if i % record_every == 0 or i == n_steps:
            record(state)
    arr = {k: np.array(v) for k, v in cols.items()}
    return FlowTrace(arr["t"], arr["r"], arr["lam"], arr["u_min"], arr["u_max"], arr["u_mean"],
                     arr["Q"], arr["C"], arr["gap"], state)


@dataclass
class AuditResult:
    value: float
    tolerance: float
    passed: bool


def monotonicity_audit(Q, truncation) -> AuditResult:
    """Largest increase of ``Q`` between records; passes within 10x the truncation estimate."""
    Q = np.asarray(Q, dtype=float)
    inc = float(np.max(np.diff(Q))) if Q.size > 1 else 0.0
    tol = 10.0 * float(truncation) + 1e-14 * max(1.0, float(np.max(np.abs(Q))))
    return AuditResult(inc, tol, inc <= tol)


def convexity_audit(trace: FlowTrace) -> AuditResult:
    lo = float(np.min(trace.lam))
    return AuditResult(lo, 0.0, lo > 0)


def sectional_bound_audit(state: FlowState):
    """Worst margin of ``K(nu, mu) - (m/2r^3)(1 - 3C/r^2)`` over nodes and both directions.

    Uses the generic component-sum sectional curvature with frame vectors built
    from ``nu^1 = phi/r``; a non-negative result confirms the lower bound.
    """
    w, r = state.warp, state.r
    n1 = np.clip(state.phi / r, -1.0, 1.0)
    n2 = np.sqrt(np.maximum(1 - n1 * n1, 0.0))
    zero = np.zeros_like(n1)
    nu = np.stack([n1, n2, zero], axis=-1)
    mu_mer = np.stack([-n2, n1, zero], axis=-1)
    mu_par = np.stack([zero, zero, np.ones_like(n1)], axis=-1)
    bound = 0.5 * w.m / r**3 * (1 - 3 * state.C / r**2)
    k_mer = sectional(w, r, nu, mu_mer)
    k_par = sectional(w, r, nu, mu_par)
    return float(np.min(np.minimum(k_mer, k_par) - bound))


@dataclass
class AsymptoticFit:
    m0: float
    residual: float
    Q_final: float
    Q_limit: float
    limit_gap: float
    window: tuple


def asymptotic_fit(t, u, Q, m, r0=None, window=None) -> AsymptoticFit:
    """Fit ``u = 1 + m0/t`` on ``[t_max/2, t_max]`` and compare ``2Q`` with ``2m0 + m``.

    ``Q_limit`` is a Richardson-style extrapolation ``Q = Q_inf + c/t`` on the
    same window.
    """
    t, u, Q = (np.asarray(a, dtype=float) for a in (t, u, Q))
    t_max = float(t[-1])
    if r0 is not None and t_max < 50 * max(r0, m):
        raise FitError(f"t_max={t_max} is below 50*max(r0, m); the window is too early")
    lo, hi = window if window is not None else (0.5 * t_max, t_max)
    sel = (t >= lo) & (t <= hi) & (t > 0)
    if sel.sum() < 3:
        raise FitError("fit window holds fewer than 3 samples")
    ts, us, Qs = t[sel], u[sel], Q[sel]
    inv = 1.0 / ts
    m0 = float(np.sum((us - 1) * inv) / np.sum(inv * inv))
    resid = float(np.sqrt(np.mean((us - 1 - m0 * inv) ** 2)))
    if resid > 0.1 * abs(m0 / t_max) and resid > 1e-13:
        raise FitError(f"fit residual {resid:.3e} exceeds 10% of |m0/t_max|")
    A = np.stack([np.ones_like(inv), inv], axis=1)
    Q_inf = float(np.linalg.lstsq(A, Qs, rcond=None)[0][0])
    target = 2 * m0 + m
    gap = abs(2 * Q[-1] - target) / abs(target) if target != 0 else abs(2 * Q[-1])
    return AsymptoticFit(m0, resid, float(Q[-1]), Q_inf, float(gap), (lo, hi))


def curvature_decay_constant(t, lam, t_min=10.0):
    """Smallest ``C`` with ``|t lambda - 1| <= C log t / t`` for ``t >= t_min``."""
    t, lam = np.asarray(t), np.asarray(lam)
    sel = t >= max(t_min, np.e)
    return float(np.max(np.abs(t[sel] * lam[sel] - 1) * t[sel] / np.log(t[sel])))
