"""Pure-Python flow kernels (fallback for the compiled ``_flowkernel``).

Both modules expose the same two functions with identical arithmetic order,
so results agree to rounding.
"""
import math

import numpy as np


def _round_rhs(m, r, phi, lam, u):
    f = math.sqrt(1.0 - m / r)
    dr = f * phi / r
    dphi = f
    dlam = -lam * lam + 0.5 * m / (r * r * r)
    du = (u - u * u * u) / (r * r * 2.0 * lam)
    return dr, dphi, dlam, du


def round_integrate(m, r0, phi0, lam0, u0, dt, n_steps, record_every):
    """RK4 for the round flow ``(r, phi, lambda, u)``.

    Returns an array of shape ``(n_rec, 5)`` with columns ``t, r, phi, lambda, u``.
    The initial state and every ``record_every``-th step (plus the last) are kept.
    """
    n_rec = n_steps // record_every + 1 + (1 if n_steps % record_every else 0)
    out = np.empty((n_rec, 5))
    r, phi, lam, u = float(r0), float(phi0), float(lam0), float(u0)
    out[0] = (0.0, r, phi, lam, u)
    k = 1
    h = float(dt)
    for i in range(1, n_steps + 1):
        a1 = _round_rhs(m, r, phi, lam, u)
        a2 = _round_rhs(m, r + 0.5 * h * a1[0], phi + 0.5 * h * a1[1], lam + 0.5 * h * a1[2], u + 0.5 * h * a1[3])
        a3 = _round_rhs(m, r + 0.5 * h * a2[0], phi + 0.5 * h * a2[1], lam + 0.5 * h * a2[2], u + 0.5 * h * a2[3])
        a4 = _round_rhs(m, r + h * a3[0], phi + h * a3[1], lam + h * a3[2], u + h * a3[3])
        r += h / 6.0 * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0])
        phi += h / 6.0 * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1])
        lam += h / 6.0 * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2])
        u += h / 6.0 * (a1[3] + 2.0 * a2[3] + 2.0 * a3[3] + a4[3])
        if i % record_every == 0 or i == n_steps:
            out[k] = (i * h, r, phi, lam, u)
            k += 1
    return out


def _node_rhs(m, y):
    r, phi, l1, l2, a, b = y
    f = np.sqrt(1.0 - m / r)
    r3 = r * r * r
    C = r * r - phi * phi
    return np.stack([
        f * phi / r,
        f,
        -l1 * l1 + 0.5 * m / r3,
        -l2 * l2 + 0.5 * m / r3 * (1.0 - 3.0 * C / (r * r)),
        l1 * a,
        l2 * b,
    ])


def nodes_rk4(m, state, dt):
    """One RK4 step for per-node data ``(r, phi, lambda1, lambda2, a, b)``.

    ``state`` has shape ``(6, n)`` and is updated in place.
    """
    y = np.asarray(state)
    k1 = _node_rhs(m, y)
    k2 = _node_rhs(m, y + 0.5 * dt * k1)
    k3 = _node_rhs(m, y + 0.5 * dt * k2)
    k4 = _node_rhs(m, y + dt * k3)
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y
