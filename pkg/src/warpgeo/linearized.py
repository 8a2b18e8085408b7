"""Linearized isometric-embedding operator and its kernel.

For a vector field ``tau`` along a surface ``Y`` the operator returns the
symmetric 2-tensor

    q_ij = sigma(d_i Y, D_j tau) + sigma(d_j Y, D_i tau),
    D_j tau = d_j tau + Gamma(d_j Y, tau),

i.e. the first variation of the induced metric.  Unknowns are the Euclidean
components of ``tau`` at the grid nodes.  Output rows are frame-normalized
(``q_11/g_11``, ``q_12/sqrt(g_11 g_22)``, ``q_22/g_22``) so that rows near the
poles carry the same weight as equatorial rows.

A nodal discretization has spurious near-null modes (the longitude Nyquist
mode and latitude checkerboards are invisible to the stencils), so the kernel
is measured on a band-limited subspace: products of ``cos/sin(m v)`` with
``cos(k theta)`` (even ``m``) or ``sin(k theta)`` (odd ``m``), ``theta = u - pi/2``,
which are exactly the functions that continue smoothly over both poles.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from .errors import AmbiguousSpectrumError, ConvexityError, NotStarShapedError
from .grid import SphereGrid
from .metric import psi_fields
from .surface import SurfaceEmbedding, principal_curvatures


def spectral_basis(grid: SphereGrid, k_max=None, m_max=None):
    """Orthonormal (nodal inner product) band-limited scalar basis, shape ``(N, K)``."""
    k_max = grid.n_lat // 2 if k_max is None else int(k_max)
    m_max = grid.n_lon // 4 if m_max is None else int(m_max)
    if not (0 < k_max < grid.n_lat and 0 <= m_max < grid.n_lon // 2):
        raise ValueError("band limits exceed what the grid resolves")
    theta = grid.lat - 0.5 * np.pi
    cols = []
    for m in range(m_max + 1):
        lon_parts = [np.cos(m * grid.lon)] if m == 0 else [np.cos(m * grid.lon), np.sin(m * grid.lon)]
        ks = range(0, k_max + 1) if m % 2 == 0 else range(1, k_max + 1)
        for k in ks:
            lat_part = np.cos(k * theta) if m % 2 == 0 else np.sin(k * theta)
            for lp in lon_parts:
                cols.append(np.outer(lat_part, lp).ravel())
    B = np.array(cols).T
    Q, _ = np.linalg.qr(B)
    return Q


@dataclass(eq=False)
class DeformationOperator:
    """Matrix-free operator on a surface plus its restriction to a spectral basis."""

    surface: SurfaceEmbedding
    k_max: int = None
    m_max: int = None
    tangents: np.ndarray = field(repr=False, default=None)  # defaults to the surface's own frame
    _basis: np.ndarray = field(repr=False, default=None)
    _coef: dict = field(repr=False, default=None)
    _restricted: np.ndarray = field(repr=False, default=None)
    _svd: tuple = field(repr=False, default=None)

    @property
    def basis(self):
        """``(N, K)`` scalar basis, built on first use."""
        if self._basis is None:
            self._basis = spectral_basis(self.surface.grid, self.k_max, self.m_max)
        return self._basis

    @property
    def N(self):
        return self.surface.grid.size

    @property
    def n_unknowns(self):
        return 3 * self.basis.shape[1]

    def apply(self, tau):
        """Apply to nodal fields ``tau`` of shape ``(..., 3, n_lat, n_lon)``.

        Returns frame-normalized components with shape ``(..., 3, n_lat, n_lon)``.
        """
        emb = self.surface
        grid = emb.grid
        c = self._coefficients()
        tau = np.asarray(tau, dtype=float)
        dtau = (grid.d_lat(tau), grid.d_lon(tau))
        T, z, psi, psi1 = c["T"], emb.position, c["psi"], c["psi1"]
        z_tau = np.einsum("...ijk,ijk->...jk", tau, z)

        def sig(i, vec):  # sigma(Y_i, vec) for a batched vec
            return np.einsum("ijk,...ijk->...jk", T[i], vec) + psi * c["zT"][i] * np.einsum(
                "ijk,...ijk->...jk", z, vec
            )

        def gamma_term(i, j):  # sigma(Y_i, Gamma(Y_j, tau))
            Yj_tau = np.einsum("ijk,...ijk->...jk", T[j], tau)
            return c["zT"][i] * (psi * Yj_tau + 0.5 * psi1 * c["zT"][j] * z_tau)

        def comp(i, j):
            return sig(i, dtau[j]) + gamma_term(i, j) + sig(j, dtau[i]) + gamma_term(j, i)

        q11 = comp(0, 0) / c["g11"]
        q12 = comp(0, 1) / c["s12"]
        q22 = comp(1, 1) / c["g22"]
        return np.stack([q11, q12, q22], axis=-3)

    def _coefficients(self):
        if self._coef is None:
            emb = self.surface
            T = emb.tangents if self.tangents is None else np.asarray(self.tangents, dtype=float)
            psi, psi1 = psi_fields(emb.warp, np.moveaxis(emb.position, 0, -1))
            zT = [np.einsum("ijk,ijk->jk", emb.position, T[i]) for i in range(2)]
            self._coef = {
                "T": T, "psi": psi, "psi1": psi1, "zT": zT,
                "g11": emb.g[0, 0], "g22": emb.g[1, 1], "s12": np.sqrt(emb.g[0, 0] * emb.g[1, 1]),
            }
        return self._coef

    def nodal_matrix(self, max_size=8000):
        """Dense ``3N x 3N`` nodal matrix (small grids only)."""
        n = 3 * self.N
        if n > max_size:
            raise MemoryError(f"nodal matrix of size {n} exceeds max_size={max_size}")
        shape = self.surface.grid.shape
        eye = np.eye(n).reshape(n, 3, *shape)
        return self.apply(eye).reshape(n, n).T

    def expand(self, coeffs):
        """Nodal field ``(3, n_lat, n_lon)`` from restricted coefficients (component-major)."""
        K = self.basis.shape[1]
        coeffs = np.asarray(coeffs).reshape(3, K, *np.shape(coeffs)[1:])
        fields = np.einsum("nk,ck...->...cn", self.basis, coeffs)
        return fields.reshape(fields.shape[:-1] + self.surface.grid.shape)

    def project(self, tau):
        """Restricted coefficients of a nodal field (least squares = orthogonal projection)."""
        tau = np.asarray(tau, dtype=float).reshape(3, self.N)
        return (tau @ self.basis).ravel()

    def restricted_matrix(self, chunk=256):
        """Dense ``3N x 3K`` matrix of the operator on the spectral basis."""
        if self._restricted is None:
            K = self.basis.shape[1]
            shape = self.surface.grid.shape
            cols = []
            for start in range(0, 3 * K, chunk):
                idx = np.arange(start, min(start + chunk, 3 * K))
                comp, k = np.divmod(idx, K)
                fields = np.zeros((idx.size, 3, self.N))
                fields[np.arange(idx.size), comp] = self.basis[:, k].T
                out = self.apply(fields.reshape(idx.size, 3, *shape))
                cols.append(out.reshape(idx.size, -1))
            self._restricted = np.ascontiguousarray(np.concatenate(cols).T)
        return self._restricted

    def svd(self):
        """Thin SVD ``(U, s, Vt)`` of the restricted matrix, singular values descending."""
        if self._svd is None:
            self._svd = np.linalg.svd(self.restricted_matrix(), full_matrices=False)
        return self._svd


def assemble_operator(
    surface: SurfaceEmbedding, k_max=None, m_max=None, check=True, tangents=None
) -> DeformationOperator:
    """Operator on a strictly convex, star-shaped surface.

    ``tangents`` replaces the differenced frame ``d_i Y``, e.g. with a closed
    form, so that only ``tau`` is differenced.  With the surface's own frame,
    rigid motions are annihilated exactly up to rounding.
    """
    if check:
        k1, k2, _, _ = principal_curvatures(surface.g, surface.h)
        if np.min(np.minimum(k1, k2)) <= 0:
            raise ConvexityError("surface is not strictly convex")
        if np.min(surface.phi) <= 0:
            raise NotStarShapedError("support function is not positive")
    return DeformationOperator(surface, k_max, m_max, tangents)


@dataclass
class KernelReport:
    count: int
    tail: np.ndarray  # smallest singular values, ascending
    gap_ratio: float
    vectors: np.ndarray = field(repr=False)  # (count, 3, n_lat, n_lon), orthonormal nodal fields


def kernel_dimension(op: DeformationOperator, gap_factor=100.0, n_tail=20) -> KernelReport:
    """Count singular values below the widest ratio gap among the smallest ``n_tail``."""
    _, s, Vt = op.svd()
    tail = s[::-1][:n_tail]
    safe = np.maximum(tail, np.finfo(float).tiny)
    ratios = safe[1:] / safe[:-1]
    i = int(np.argmax(ratios))
    gap = float(ratios[i])
    if gap < gap_factor:
        raise AmbiguousSpectrumError(f"largest singular-value gap {gap:.3g} is below {gap_factor}")
    count = i + 1
    coeffs = Vt[::-1][:count]
    vectors = np.stack([op.expand(c) for c in coeffs])
    return KernelReport(count, tail, gap, vectors)


def sphere_frame(r, grid: SphereGrid):
    """Closed-form coordinate frame ``(d_u Y, d_v Y)`` of the radius-``r`` sphere."""
    U, V = grid.mesh()
    du = np.stack([-np.sin(U) * np.cos(V), -np.sin(U) * np.sin(V), np.cos(U)])
    dv = np.stack([-np.cos(U) * np.sin(V), np.cos(U) * np.cos(V), np.zeros_like(U)])
    return float(r) * np.stack([du, dv])


def rotation_fields(surface: SurfaceEmbedding):
    """``E_a = e_a x Y`` (Euclidean cross product) at every node, shape ``(3, 3, n_lat, n_lon)``."""
    Y = surface.position
    return np.stack([np.cross(np.eye(3)[a][:, None, None], Y, axis=0) for a in range(3)])


def translation_fields(surface: SurfaceEmbedding):
    shape = surface.grid.shape
    return np.stack([np.broadcast_to(np.eye(3)[a][:, None, None], (3,) + shape) for a in range(3)])


def operator_residuals(op: DeformationOperator, fields):
    """``|op v| / |v|`` for each nodal field (plain nodal 2-norms)."""
    out = op.apply(fields)
    num = np.sqrt(np.sum(out**2, axis=(-3, -2, -1)))
    den = np.sqrt(np.sum(np.asarray(fields) ** 2, axis=(-3, -2, -1)))
    return num / den


def _orthonormal(fields):
    M = np.asarray(fields).reshape(len(fields), -1).T
    Q, _ = np.linalg.qr(M)
    return Q


def span_projections(vectors, span_fields):
    """Norm of the orthogonal projection of each (unit) vector onto a span."""
    Q = _orthonormal(span_fields)
    V = np.asarray(vectors).reshape(len(vectors), -1)
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    return np.linalg.norm(V @ Q, axis=1)


def kernel_subspace_angle(vectors, span_fields):
    """Largest principal angle (radians) between two spans of nodal fields."""
    A = np.asarray(vectors).reshape(len(vectors), -1).T
    B = np.asarray(span_fields).reshape(len(span_fields), -1).T
    return float(np.max(subspace_angles(A, B)))


@dataclass
class LinearSolve:
    tau: np.ndarray
    residual: float
    kernel_count: int


def tensor_rows(surface: SurfaceEmbedding, q):
    """Frame-normalized row vector of a coordinate 2-tensor field ``q[i, j]``."""
    g = surface.g
    q = np.asarray(q, dtype=float)
    return np.stack([q[0, 0] / g[0, 0], q[0, 1] / np.sqrt(g[0, 0] * g[1, 1]), q[1, 1] / g[1, 1]])


def solve_linearized(op: DeformationOperator, q, gap_factor=100.0) -> LinearSolve:
    """Minimum-norm least-squares ``tau`` with the kernel directions excluded."""
    rep = kernel_dimension(op, gap_factor)
    U, s, Vt = op.svd()
    rhs = tensor_rows(op.surface, q).ravel()
    keep = s.size - rep.count
    coeffs = Vt[:keep].T @ ((U[:, :keep].T @ rhs) / s[:keep])
    tau = op.expand(coeffs)
    res = np.linalg.norm(op.apply(tau).ravel() - rhs) / np.linalg.norm(rhs)
    return LinearSolve(tau, float(res), rep.count)
