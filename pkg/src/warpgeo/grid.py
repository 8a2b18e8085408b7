"""Latitude-longitude grid on the sphere and its derivative stencils.

Latitudes sit at cell midpoints ``u_k = -pi/2 + (k + 1/2) pi / n_lat`` so no node
touches a pole.  Longitude derivatives are spectral (FFT); latitude derivatives
are 4th-order centered differences that continue across each pole along the
great circle: the value just past the pole at longitude ``v`` is the value at
the mirrored latitude and longitude ``v + pi``.  Quantities that change sign
when the latitude direction is reversed (``u``-derivatives, mixed metric
components) are reflected with ``parity=-1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def fejer_weights(n):
    """Fejer first-rule weights for the midpoint nodes ``theta_k = (k + 1/2) pi / n``.

    They integrate ``int_0^pi g(theta) sin(theta) dtheta`` exactly for
    trigonometric polynomials of degree below ``n`` and sum to 2.
    """
    theta = (np.arange(n) + 0.5) * np.pi / n
    j = np.arange(1, n // 2 + 1)
    series = np.cos(2.0 * np.outer(theta, j)) / (4.0 * j * j - 1.0)
    return (2.0 / n) * (1.0 - 2.0 * series.sum(axis=1))


def latitude_derivative_1d(a, h, parity=1.0, order=1):
    """4th-order latitude derivative of an axisymmetric field on offset nodes.

    Ghost values past each pole mirror the nearest nodes, times ``parity``.
    """
    a = np.asarray(a, dtype=float)
    p = np.concatenate([parity * a[..., 1::-1], a, parity * a[..., :-3:-1]], axis=-1)
    n = a.shape[-1]
    stencil, scale = (_D1, h) if order == 1 else (_D2, h * h)
    out = sum(c * p[..., k : k + n] for k, c in enumerate(stencil) if c != 0.0)
    return out / scale


def offset_latitudes(n_lat):
    return -0.5 * np.pi + (np.arange(n_lat) + 0.5) * np.pi / n_lat


@dataclass(frozen=True)
class SphereGrid:
    """Offset latitude/longitude grid with spectral quadrature weights."""

    n_lat: int
    n_lon: int
    lat: np.ndarray = field(init=False, repr=False, compare=False)
    lon: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n_lat, n_lon = int(self.n_lat), int(self.n_lon)
        if n_lat < 4 or n_lon < 4:
            raise ValueError("grid needs at least 4 latitudes and 4 longitudes")
        if n_lon % 2:
            raise ValueError("n_lon must be even (pole continuation uses v + pi)")
        object.__setattr__(self, "n_lat", n_lat)
        object.__setattr__(self, "n_lon", n_lon)
        lat = offset_latitudes(n_lat)
        lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
        w_lat = fejer_weights(n_lat)  # symmetric in latitude
        weights = np.outer(w_lat, np.full(n_lon, 2.0 * np.pi / n_lon))
        for name, val in (("lat", lat), ("lon", lon), ("weights", weights)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def parse(cls, text):
        """Build from ``"24x48"``."""
        try:
            a, b = str(text).lower().split("x")
            return cls(int(a), int(b))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"bad grid spec {text!r}; expected e.g. 24x48") from exc

    @property
    def shape(self):
        return (self.n_lat, self.n_lon)

    @property
    def size(self):
        return self.n_lat * self.n_lon

    @property
    def h(self):
        return np.pi / self.n_lat

    def mesh(self):
        """``(U, V)`` arrays of shape ``(n_lat, n_lon)``."""
        return np.meshgrid(self.lat, self.lon, indexing="ij")

    def directions(self):
        """Unit vectors ``(cos u cos v, cos u sin v, sin u)`` stacked last."""
        U, V = self.mesh()
        return np.stack([np.cos(U) * np.cos(V), np.cos(U) * np.sin(V), np.sin(U)], axis=-1)

    # -- derivatives ------------------------------------------------------
    # Fields have the grid axes at positions (-2, -1); leading axes batch.
    def _pad_lat(self, a, parity):
        half = self.n_lon // 2
        south = np.roll(a[..., 1::-1, :], half, axis=-1) * parity
        north = np.roll(a[..., :-3:-1, :], half, axis=-1) * parity
        return np.concatenate([south, a, north], axis=-2)

    def d_lat(self, a, parity=1.0):
        a = np.asarray(a, dtype=float)
        p = self._pad_lat(a, parity)
        n = self.n_lat
        out = sum(c * p[..., k : k + n, :] for k, c in enumerate(_D1) if c != 0.0)
        return out / self.h

    def d2_lat(self, a, parity=1.0):
        a = np.asarray(a, dtype=float)
        p = self._pad_lat(a, parity)
        n = self.n_lat
        out = sum(c * p[..., k : k + n, :] for k, c in enumerate(_D2))
        return out / self.h**2

    def _wavenumbers(self):
        k = np.fft.rfftfreq(self.n_lon, d=1.0 / self.n_lon)
        return k

    def d_lon(self, a):
        a = np.asarray(a, dtype=float)
        k = self._wavenumbers()
        ik = 1j * k
        ik[-1] = 0.0  # Nyquist mode has no odd derivative
        return np.fft.irfft(np.fft.rfft(a, axis=-1) * ik, n=self.n_lon, axis=-1)

    def d2_lon(self, a):
        a = np.asarray(a, dtype=float)
        k = self._wavenumbers()
        return np.fft.irfft(np.fft.rfft(a, axis=-1) * (-k * k), n=self.n_lon, axis=-1)

    def integrate(self, field_, jacobian=None):
        """``int field dA`` where ``jacobian`` is the area density w.r.t. ``du dv``.

        With ``jacobian=None`` the unit-sphere density ``cos u`` is used.  The sum
        is taken in a fixed order so the result does not depend on threading.
        """
        field_ = np.asarray(field_, dtype=float)
        if jacobian is None:
            dens = field_
        else:
            dens = field_ * np.asarray(jacobian) / np.cos(self.lat)[:, None]
        return float(np.sum(np.sum(dens * self.weights, axis=-1), axis=-1))
