"""Warp functions and pointwise ambient geometry.

The ambient space is R^n with the metric ``dr^2/f(r)^2 + r^2 g_sphere``.  Three
families are supported, all sharing ``f^2 = 1 - m/r + kappa r^2``:

* ``euclidean``  (m = kappa = 0)
* ``spaceform``  (m = 0)
* ``ads``        (general m >= 0; ``schwarzschild`` is the alias with kappa = 0)

Curvature components follow the frame convention in which a space form with
``f^2 = 1 + kappa r^2`` has every listed component equal to ``kappa``.  In that
convention the component is minus the usual sectional curvature.

Every function here is a closed form and is vectorized over ``r`` (or over
leading axes of ``z``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, SingularMetricError

_FAMILY_ALIASES = {
    "euclidean": "euclidean",
    "flat": "euclidean",
    "spaceform": "spaceform",
    "space_form": "spaceform",
    "space-form": "spaceform",
    "ads": "ads",
    "adsschwarzschild": "ads",
    "ads-schwarzschild": "ads",
    "schwarzschild": "ads",
}


def _positive_roots(kappa, m):
    """Positive roots of ``kappa r^3 + r - m`` (zeros of r F(r)), ascending.

    Bracketed root finding stays well conditioned when ``kappa`` is tiny and
    the outer root runs off to ``1/sqrt(-kappa)``.
    """
    def p(r):
        return r * (1.0 + kappa * r * r) - m

    if kappa >= 0:
        return np.array([brentq(p, 0.0, m, xtol=1e-15, rtol=1e-15)]) if m > 0 else np.array([])
    edge = 1.0 / np.sqrt(-kappa)
    if m == 0:
        return np.array([edge])
    top = edge / np.sqrt(3.0)  # maximum of p
    if p(top) <= 0:
        return np.array([])
    return np.array([
        brentq(p, 0.0, top, xtol=1e-15, rtol=1e-15),
        brentq(p, top, edge, xtol=1e-15, rtol=1e-15),
    ])


@dataclass(frozen=True)
class WarpFunction:
    """A warp family ``f(r) = sqrt(1 - m/r + kappa r^2)`` with its domain.

    Use the constructors :meth:`euclidean`, :meth:`space_form`, :meth:`ads`
    and :meth:`schwarzschild` rather than the raw initializer.
    """

    family: str
    m: float = 0.0
    kappa: float = 0.0
    n: int = 3
    r_min: float = field(init=False)
    r_max: float = field(init=False)

    def __post_init__(self):
        fam = _FAMILY_ALIASES.get(str(self.family).lower())
        if fam is None:
            raise ValueError(f"unknown warp family {self.family!r}")
        m, kappa = float(self.m), float(self.kappa)
        if fam == "euclidean":
            m = kappa = 0.0
        elif fam == "spaceform":
            m = 0.0
        if not (np.isfinite(m) and np.isfinite(kappa)):
            raise ValueError("warp parameters must be finite")
        if m < 0:
            raise ValueError("mass parameter m must be non-negative")
        if int(self.n) < 3:
            raise ValueError("dimension n must be at least 3")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "n", int(self.n))

        r_min, r_max = 1e-12, np.inf
        roots = _positive_roots(kappa, m) if (m > 0 or kappa < 0) else np.array([])
        if m > 0:
            if roots.size == 0:
                raise ValueError("f^2 has no positive domain for these parameters")
            horizon = roots[0]
            r_min = horizon + 1e-6 * max(1.0, horizon)
            roots = roots[1:]
        if kappa < 0:
            if roots.size == 0:
                raise ValueError("f^2 has no positive domain for these parameters")
            outer = roots[0]
            r_max = outer - 1e-6 * max(1.0, outer)
        if r_max <= r_min:
            raise ValueError("empty radial domain")
        object.__setattr__(self, "r_min", float(r_min))
        object.__setattr__(self, "r_max", float(r_max))

    # -- constructors -----------------------------------------------------
    @classmethod
    def euclidean(cls, n=3):
        return cls("euclidean", n=n)

    @classmethod
    def space_form(cls, kappa, n=3):
        return cls("spaceform", kappa=kappa, n=n)

    @classmethod
    def ads(cls, m, kappa, n=3):
        return cls("ads", m=m, kappa=kappa, n=n)

    @classmethod
    def schwarzschild(cls, m, n=3):
        return cls("ads", m=m, kappa=0.0, n=n)

    @classmethod
    def from_config(cls, spec):
        """Build from a mapping such as ``{"family": "ads", "m": 0.1, "kappa": 0.2}``."""
        if not isinstance(spec, dict) or "family" not in spec:
            raise ValueError("warp spec must be a mapping with a 'family' key")
        extra = set(spec) - {"family", "m", "kappa", "n"}
        if extra:
            raise ValueError(f"unknown warp spec keys: {sorted(extra)}")
        fam = str(spec["family"]).lower()
        kappa = spec.get("kappa", 0.0)
        if _FAMILY_ALIASES.get(fam) is None:
            raise ValueError(f"unknown warp family {spec['family']!r}")
        if fam == "schwarzschild":
            kappa = 0.0
        return cls(fam, m=float(spec.get("m", 0.0)), kappa=float(kappa), n=int(spec.get("n", 3)))

    def to_config(self):
        return {"family": self.family, "m": self.m, "kappa": self.kappa, "n": self.n}

    @property
    def is_flat(self):
        return self.m == 0.0 and self.kappa == 0.0

    @property
    def is_space_form(self):
        return self.m == 0.0

    # -- evaluation -------------------------------------------------------
    def check_domain(self, r):
        r = np.asarray(r, dtype=float)
        if not np.all(np.isfinite(r)):
            raise DomainError("non-finite radius")
        if np.any(r <= self.r_min) or np.any(r >= self.r_max):
            bad = r[(r <= self.r_min) | (r >= self.r_max)].ravel()[0]
            raise DomainError(
                f"radius {bad!r} outside warp domain ({self.r_min!r}, {self.r_max!r})"
            )
        return r

    def F(self, r):
        """``f^2`` and its first two radial derivatives."""
        r = self.check_domain(r)
        m, k = self.m, self.kappa
        F = 1.0 - m / r + k * r * r
        F1 = m / (r * r) + 2.0 * k * r
        F2 = -2.0 * m / r**3 + 2.0 * k
        return F, F1, F2

    def psi(self, r):
        """Coefficient ``psi`` of the Euclidean-coordinate metric and two derivatives.

        ``psi = (1/f^2 - 1)/r^2`` is written as ``N/F`` with ``N = m r^-3 - kappa``
        so that nothing cancels catastrophically for small ``m`` or ``kappa``.
        """
        r = self.check_domain(r)
        if self.is_flat:
            z = np.zeros_like(r)
            return z, z.copy(), z.copy()
        F, F1, F2 = self.F(r)
        m = self.m
        N = m / r**3 - self.kappa
        N1 = -3.0 * m / r**4
        N2 = 12.0 * m / r**5
        p0 = N / F
        p1 = N1 / F - N * F1 / F**2
        p2 = N2 / F - 2.0 * N1 * F1 / F**2 - N * F2 / F**2 + 2.0 * N * F1**2 / F**3
        return p0, p1, p2


def warp_eval(w: WarpFunction, r):
    """Return ``(f, f', f'')`` at ``r`` from closed forms."""
    r = w.check_domain(r)
    if w.is_flat:
        one = np.ones_like(r)
        return one, 0.0 * one, 0.0 * one
    F, F1, F2 = w.F(r)
    f = np.sqrt(F)
    if np.any(f <= 0):
        raise DomainError("warp function vanished")
    fp = F1 / (2.0 * f)
    fpp = F2 / (2.0 * f) - F1**2 / (4.0 * f**3)
    return f, fp, fpp


@dataclass(frozen=True)
class AmbientCurvature:
    """Frame curvature data at radius ``r`` (convention: space form gives ``kappa``)."""

    r: np.ndarray
    R_radial: np.ndarray
    R_tangential: np.ndarray
    ricci_11: np.ndarray
    ricci_kk: np.ndarray
    scalar: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    psi_prime_over_r_prime: np.ndarray
    n: int = 3


def ambient_curvature(w: WarpFunction, r) -> AmbientCurvature:
    r = w.check_domain(r)
    n = w.n
    # ff'/r = F'/(2r) and (f^2-1)/r^2 written without subtraction
    R_rad = w.m / (2.0 * r**3) + w.kappa + 0.0 * r
    R_tan = -w.m / r**3 + w.kappa + 0.0 * r
    ric11 = (n - 1) * R_rad
    rickk = R_rad + (n - 2) * R_tan
    scalar = ric11 + (n - 1) * rickk
    p0, p1, p2 = w.psi(r)
    return AmbientCurvature(
        r=r,
        R_radial=R_rad,
        R_tangential=R_tan,
        ricci_11=ric11,
        ricci_kk=rickk,
        scalar=scalar,
        psi=p0,
        psi_prime=p1,
        psi_prime_over_r_prime=p2 / r - p1 / r**2,
        n=n,
    )


def _radius(z):
    z = np.asarray(z, dtype=float)
    return z, np.sqrt(np.sum(z * z, axis=-1))


def psi_fields(w: WarpFunction, z):
    """``(psi, psi1)`` at points ``z`` where ``psi1 = psi'(R)/R``."""
    z, R = _radius(z)
    if w.is_flat:
        zero = np.zeros_like(R)
        return zero, zero.copy()
    p0, p1, _ = w.psi(R)
    return p0, p1 / R


def euclidean_metric(w: WarpFunction, z):
    """Metric ``sigma = I + psi z z^T`` in Euclidean coordinates and ``d_gamma sigma``.

    Returns ``(sigma, dsigma)`` with shapes ``(..., d, d)`` and ``(..., d, d, d)``;
    ``dsigma[..., c, a, b]`` is the derivative of ``sigma_ab`` along ``z^c``.
    """
    z, R = _radius(z)
    d = z.shape[-1]
    psi, psi1 = psi_fields(w, z)
    eye = np.eye(d)
    zz = z[..., :, None] * z[..., None, :]
    sigma = eye + psi[..., None, None] * zz
    dsig = psi1[..., None, None, None] * z[..., :, None, None] * zz[..., None, :, :]
    dsig = dsig + psi[..., None, None, None] * (
        eye[:, :, None] * z[..., None, None, :] + eye[:, None, :] * z[..., None, :, None]
    )
    # 1 + psi R^2 = 1/f^2 is the only non-unit eigenvalue
    if np.any(1.0 + psi * R * R <= 0):
        raise SingularMetricError("Euclidean-coordinate metric is not positive definite")
    return sigma, dsig


def christoffels_euclidean(w: WarpFunction, z):
    """Second-kind symbols ``Gamma[..., c, a, b]`` for ``sigma`` at points ``z``.

    With ``sigma^{-1} z = f^2 z`` the symbols reduce to
    ``f^2 z^c (psi delta_ab + psi1 z_a z_b / 2)``.
    """
    z, R = _radius(z)
    d = z.shape[-1]
    psi, psi1 = psi_fields(w, z)
    f2 = 1.0 / (1.0 + psi * R * R)
    inner = psi[..., None, None] * np.eye(d) + 0.5 * psi1[..., None, None] * (
        z[..., :, None] * z[..., None, :]
    )
    return (f2[..., None] * z)[..., :, None, None] * inner[..., None, :, :]


def sectional(w: WarpFunction, r, Z1, Z2):
    """Curvature of the plane spanned by ``Z1, Z2`` (orthonormal-frame components).

    Not normalized by the area of the parallelogram: the caller passes
    orthonormal vectors to get a sectional value.  Index 0 is the radial
    direction.  Works for n = 3 frame components only.
    """
    curv = ambient_curvature(w, r)
    a = np.asarray(Z1, dtype=float)
    b = np.asarray(Z2, dtype=float)
    c = np.cross(a, b)
    radial = c[..., 1] ** 2 + c[..., 2] ** 2
    tangential = c[..., 0] ** 2
    return curv.R_radial * radial + curv.R_tangential * tangential


def ambient_sigma2_source(w: WarpFunction, r, nu1_sq, n=None):
    """Sum of ambient components over the tangent planes of a hypersurface.

    ``nu1_sq`` is the squared radial component of the unit normal.
    """
    r = w.check_domain(r)
    nu1_sq = np.asarray(nu1_sq, dtype=float)
    if np.any(nu1_sq < -1e-12) or np.any(nu1_sq > 1 + 1e-12):
        raise DomainError("nu1_sq must lie in [0, 1]")
    n = w.n if n is None else int(n)
    ffp_r = w.m / (2.0 * r**3) + w.kappa
    f2m1_r2 = -w.m / r**3 + w.kappa
    # r f f' + 1 - f^2 = 3m/(2r): the kappa terms cancel exactly
    combo = 1.5 * w.m / r**3
    return (n - 2) * (ffp_r + 0.5 * (n - 3) * f2m1_r2 - nu1_sq * combo)
