"""Surfaces of revolution about the third axis, evaluated pointwise.

A surface ``Y(u, v) = (P(u) cos v, P(u) sin v, Z(u))`` is described by its
meridian ``(P, Z)`` and the first two ``u``-derivatives, supplied as arrays at
arbitrary latitudes.  No differencing happens here, so accuracy is that of the
supplied derivatives; callers with a spectral meridian get spectral geometry.
Coordinate directions are principal directions, so everything reduces to the
meridian plane ``v = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import WarpFunction, ambient_sigma2_source, warp_eval


@dataclass(frozen=True)
class Meridian:
    """Meridian curve and its ``u``-derivatives at the latitudes ``u``."""

    u: np.ndarray
    P: np.ndarray
    dP: np.ndarray
    d2P: np.ndarray
    Z: np.ndarray
    dZ: np.ndarray
    d2Z: np.ndarray

    @classmethod
    def sphere(cls, r, u):
        u = np.asarray(u, dtype=float)
        c, s = np.cos(u), np.sin(u)
        return cls(u, r * c, -r * s, -r * c, r * s, r * c, -r * s)

    @classmethod
    def radial_graph(cls, u, R, dR, d2R):
        """``Y = R(u) (cos u, 0, sin u)`` in the meridian plane."""
        u = np.asarray(u, dtype=float)
        c, s = np.cos(u), np.sin(u)
        return cls(
            u,
            R * c, dR * c - R * s, d2R * c - 2 * dR * s - R * c,
            R * s, dR * s + R * c, d2R * s + 2 * dR * c - R * s,
        )


@dataclass(frozen=True)
class RevolutionGeometry:
    """Pointwise geometry of a surface of revolution (meridian index 1, parallel 2)."""

    u: np.ndarray
    r: np.ndarray
    g11: np.ndarray
    g22: np.ndarray
    nu1: np.ndarray  # Euclidean components of the unit normal in the meridian plane
    nu3: np.ndarray
    phi: np.ndarray
    h11: np.ndarray
    h22: np.ndarray
    f: np.ndarray

    @property
    def kappa1(self):
        return self.h11 / self.g11

    @property
    def kappa2(self):
        return self.h22 / self.g22

    @property
    def H(self):
        return self.kappa1 + self.kappa2

    @property
    def sigma2(self):
        return self.kappa1 * self.kappa2

    @property
    def area_density(self):
        """``sqrt(det g)`` with respect to ``du dv``."""
        return np.sqrt(self.g11 * self.g22)

    @property
    def nu1_sq(self):
        return np.clip((self.phi / self.r) ** 2, 0.0, 1.0)

    def gauss_source(self, w: WarpFunction):
        return ambient_sigma2_source(w, self.r, self.nu1_sq, n=3)


def revolution_geometry(w: WarpFunction, mer: Meridian) -> RevolutionGeometry:
    P, Z = mer.P, mer.Z
    R = np.sqrt(P * P + Z * Z)
    f, _, _ = warp_eval(w, R)
    if w.is_flat:
        psi = psi1 = np.zeros_like(R)
    else:
        p0, p1, _ = w.psi(R)
        psi, psi1 = p0, p1 / R

    def sig(a1, a3, b1, b3):
        return a1 * b1 + a3 * b3 + psi * (P * a1 + Z * a3) * (P * b1 + Z * b3)

    zYu = P * mer.dP + Z * mer.dZ
    g11 = mer.dP**2 + mer.dZ**2 + psi * zYu**2
    g22 = P * P
    # sigma^{-1} applied to the Euclidean normal (dZ, -dP) of the meridian
    M11, M12, M22 = 1 + psi * P * P, psi * P * Z, 1 + psi * Z * Z
    det = M11 * M22 - M12 * M12
    a, b = mer.dZ, -mer.dP
    n1 = (M22 * a - M12 * b) / det
    n3 = (-M12 * a + M11 * b) / det
    nn = np.sqrt(sig(n1, n3, n1, n3))
    n1, n3 = n1 / nn, n3 / nn
    zn = P * n1 + Z * n3
    h11 = -(sig(mer.d2P, mer.d2Z, n1, n3) + zn * (psi * (mer.dP**2 + mer.dZ**2) + 0.5 * psi1 * zYu**2))
    h22 = -(sig(-P, 0.0, n1, n3) + zn * psi * P * P)
    return RevolutionGeometry(mer.u, R, g11, g22, n1, n3, zn / f, h11, h22, f)


def gauss_legendre_latitudes(n):
    """Latitudes ``u = arcsin(x)`` and weights for ``int F cos u du`` on ``[-pi/2, pi/2]``."""
    x, wts = np.polynomial.legendre.leggauss(int(n))
    return np.arcsin(x), wts


def surface_integral(geom: RevolutionGeometry, values, weights):
    """``int values d sigma`` for nodes produced by :func:`gauss_legendre_latitudes`."""
    dens = geom.area_density / np.cos(geom.u)
    return float(2.0 * np.pi * np.sum(weights * values * dens))
