# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled flow kernels; same interface as ``_flowkernel_py``."""
import numpy as np
from libc.math cimport sqrt


cdef inline void _round_rhs(double m, double r, double phi, double lam, double u,
                            double* out) noexcept nogil:
    cdef double f = sqrt(1.0 - m / r)
    out[0] = f * phi / r
    out[1] = f
    out[2] = -lam * lam + 0.5 * m / (r * r * r)
    out[3] = (u - u * u * u) / (r * r * 2.0 * lam)


def round_integrate(double m, double r0, double phi0, double lam0, double u0,
                    double dt, Py_ssize_t n_steps, Py_ssize_t record_every):
    cdef Py_ssize_t n_rec = n_steps // record_every + 1 + (1 if n_steps % record_every else 0)
    res = np.empty((n_rec, 5))
    cdef double[:, ::1] out = res
    cdef double r = r0, phi = phi0, lam = lam0, u = u0, h = dt
    cdef double a1[4]
    cdef double a2[4]
    cdef double a3[4]
    cdef double a4[4]
    cdef Py_ssize_t i, k = 1
    out[0, 0] = 0.0
    out[0, 1] = r
    out[0, 2] = phi
    out[0, 3] = lam
    out[0, 4] = u
    with nogil:
        for i in range(1, n_steps + 1):
            _round_rhs(m, r, phi, lam, u, a1)
            _round_rhs(m, r + 0.5 * h * a1[0], phi + 0.5 * h * a1[1], lam + 0.5 * h * a1[2], u + 0.5 * h * a1[3], a2)
            _round_rhs(m, r + 0.5 * h * a2[0], phi + 0.5 * h * a2[1], lam + 0.5 * h * a2[2], u + 0.5 * h * a2[3], a3)
            _round_rhs(m, r + h * a3[0], phi + h * a3[1], lam + h * a3[2], u + h * a3[3], a4)
            r += h / 6.0 * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0])
            phi += h / 6.0 * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1])
            lam += h / 6.0 * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2])
            u += h / 6.0 * (a1[3] + 2.0 * a2[3] + 2.0 * a3[3] + a4[3])
            if i % record_every == 0 or i == n_steps:
                out[k, 0] = i * h
                out[k, 1] = r
                out[k, 2] = phi
                out[k, 3] = lam
                out[k, 4] = u
                k += 1
    return res


cdef inline void _node_rhs(double m, double* y, double* out) noexcept nogil:
    cdef double r = y[0], phi = y[1], l1 = y[2], l2 = y[3]
    cdef double f = sqrt(1.0 - m / r)
    cdef double r3 = r * r * r
    cdef double C = r * r - phi * phi
    out[0] = f * phi / r
    out[1] = f
    out[2] = -l1 * l1 + 0.5 * m / r3
    out[3] = -l2 * l2 + 0.5 * m / r3 * (1.0 - 3.0 * C / (r * r))
    out[4] = l1 * y[4]
    out[5] = l2 * y[5]


def nodes_rk4(double m, state, double dt):
    cdef double[:, :] y = state
    cdef Py_ssize_t n = y.shape[1], j, c
    cdef double y0[6]
    cdef double tmp[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    with nogil:
        for j in range(n):
            for c in range(6):
                y0[c] = y[c, j]
            _node_rhs(m, y0, k1)
            for c in range(6):
                tmp[c] = y0[c] + 0.5 * dt * k1[c]
            _node_rhs(m, tmp, k2)
            for c in range(6):
                tmp[c] = y0[c] + 0.5 * dt * k2[c]
            _node_rhs(m, tmp, k3)
            for c in range(6):
                tmp[c] = y0[c] + dt * k3[c]
            _node_rhs(m, tmp, k4)
            for c in range(6):
                y[c, j] = y0[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c])
    return state
