"""Closed-form Thomas-Fermi limit objects for the trapped cubic-quintic energy.

In the large-mass limit the rescaled ground state approaches the compactly
supported profile ``u(r) = (mu - C0 r^p)^(1/4)`` on the ball of radius
``(mu/C0)^(1/p)``.  The multiplier ``mu``, the profile integrals and the
limiting energy constant all reduce to Beta-function expressions; this module
evaluates them in closed form and cross-checks every value against adaptive
quadrature of the defining integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

__all__ = [
    "InternalConsistencyError",
    "TFIntegrals",
    "TFProfile",
    "beta_fn",
    "energy_limit_constant",
    "log_gamma",
    "mu_tf",
    "mu_tf_root_find",
    "surface_measure",
    "tf_integrals",
    "tf_integrals_quadrature",
    "tf_profile",
    "u_tf",
]

#: surface measure of the unit sphere for the supported dimensions
_SURFACE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

#: relative tolerance for closed-form vs quadrature cross-checks
CROSS_CHECK_RTOL = 1e-10


class InternalConsistencyError(RuntimeError):
    """Closed-form value and its quadrature cross-check disagree."""


def surface_measure(d: int) -> float:
    """Surface of the unit sphere in dimension d (2, 2*pi, 4*pi)."""
    try:
        return _SURFACE[d]
    except KeyError:
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}") from None


# Lanczos approximation with g = 7 and 9 coefficients; accurate to about
# 1e-14 absolute in log-Gamma over the arguments used here.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def log_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0 via the Lanczos series."""
    if not x > 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    if x < 0.5:
        # reflection keeps the series argument >= 0.5
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (z + 0.5) * math.log(t) - t + math.log(acc)


_beta_verified: set[tuple[float, float]] = set()


def _beta_quadrature(P: float, Q: float) -> float:
    val, _ = quad(
        lambda x: x ** (P - 1.0) * (1.0 - x) ** (Q - 1.0),
        0.0,
        1.0,
        epsabs=1e-14,
        epsrel=1e-13,
        limit=200,
    )
    return val


def beta_fn(P: float, Q: float) -> float:
    """Beta function B(P, Q) = Gamma(P)Gamma(Q)/Gamma(P+Q) for P, Q > 0.

    The first evaluation of each (P, Q) pair in a process is cross-checked
    against adaptive quadrature of ``int_0^1 x^(P-1)(1-x)^(Q-1) dx`` at
    1e-10 relative tolerance.
    """
    if not (P > 0.0 and Q > 0.0):
        raise ValueError(f"beta_fn requires P, Q > 0, got P={P}, Q={Q}")
    val = math.exp(log_gamma(P) + log_gamma(Q) - log_gamma(P + Q))
    key = (float(P), float(Q))
    if key not in _beta_verified:
        ref = _beta_quadrature(P, Q)
        if abs(val - ref) > CROSS_CHECK_RTOL * abs(ref):
            raise InternalConsistencyError(
                f"beta_fn({P}, {Q}) = {val!r} disagrees with quadrature {ref!r}"
            )
        _beta_verified.add(key)
    return val


def _validate_family(d: int, p: float, C0: float) -> None:
    if d not in _SURFACE:
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if not p >= 2.0:
        raise ValueError(f"tail power must satisfy p >= 2, got {p}")
    if not C0 > 0.0:
        raise ValueError(f"tail coefficient must satisfy C0 > 0, got {C0}")


def mu_tf(d: int, p: float, C0: float) -> float:
    """Limit Lagrange multiplier fixing unit mass of the quartic-root profile.

    mu = (p / (omega_d C0^(-d/p) B(d/p, 3/2)))^(2p/(2d+p))
    """
    _validate_family(d, p, C0)
    denom = _SURFACE[d] * C0 ** (-d / p) * beta_fn(d / p, 1.5)
    return (p / denom) ** (2.0 * p / (2.0 * d + p))


@dataclass(frozen=True)
class TFProfile:
    """Closed-form limit profile (mu - C0 r^p)^(1/4) on its support ball."""

    d: int
    p: float
    C0: float
    mu_tf: float
    radius: float
    omega_d: float


def tf_profile(d: int, p: float, C0: float) -> TFProfile:
    """Construct the limit profile for an admissible (d, p, C0)."""
    mu = mu_tf(d, p, C0)
    return TFProfile(
        d=d,
        p=p,
        C0=C0,
        mu_tf=mu,
        radius=(mu / C0) ** (1.0 / p),
        omega_d=_SURFACE[d],
    )


def u_tf(profile: TFProfile, r):
    """Evaluate the profile at radius r (scalar or array), zero outside support."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0):
        raise ValueError("radius must be non-negative")
    vals = np.maximum(profile.mu_tf - profile.C0 * r_arr**profile.p, 0.0) ** 0.25
    if np.isscalar(r) or r_arr.ndim == 0:
        return float(vals)
    return vals


@dataclass(frozen=True)
class TFIntegrals:
    """Integrals of the limit profile: mass, |u|^6, |x|^p-weighted mass, energy."""

    mass: float
    quintic_norm: float
    weighted_mass: float
    tf_energy: float


def _integrals_closed_form(profile: TFProfile) -> TFIntegrals:
    d, p, C0, mu = profile.d, profile.p, profile.C0, profile.mu_tf
    om = profile.omega_d
    mass = om * C0 ** (-d / p) / p * mu ** ((2.0 * d + p) / (2.0 * p)) * beta_fn(d / p, 1.5)
    quintic = om * C0 ** (-d / p) / p * mu ** ((2.0 * d + 3.0 * p) / (2.0 * p)) * beta_fn(d / p, 2.5)
    weighted = (
        om * C0 ** (-(d + p) / p) / p
        * mu ** ((2.0 * d + 3.0 * p) / (2.0 * p))
        * beta_fn((d + p) / p, 1.5)
    )
    energy = (2.0 * d + p) / (6.0 * p) * quintic
    return TFIntegrals(mass=mass, quintic_norm=quintic, weighted_mass=weighted, tf_energy=energy)


def tf_integrals_quadrature(profile: TFProfile) -> TFIntegrals:
    """Same integrals by adaptive quadrature of the radial integrands."""
    d, p, C0, mu = profile.d, profile.p, profile.C0, profile.mu_tf
    om, R = profile.omega_d, profile.radius
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)

    def radial(f) -> float:
        val, _ = quad(f, 0.0, R, **opts)
        return om * val

    mass = radial(lambda r: (mu - C0 * r**p) ** 0.5 * r ** (d - 1))
    quintic = radial(lambda r: (mu - C0 * r**p) ** 1.5 * r ** (d - 1))
    weighted = radial(lambda r: r**p * (mu - C0 * r**p) ** 0.5 * r ** (d - 1))
    energy = 0.5 * C0 * weighted + quintic / 6.0
    return TFIntegrals(mass=mass, quintic_norm=quintic, weighted_mass=weighted, tf_energy=energy)


def tf_integrals(profile: TFProfile) -> TFIntegrals:
    """Profile integrals, closed form authoritative, quadrature cross-checked."""
    closed = _integrals_closed_form(profile)
    ref = tf_integrals_quadrature(profile)
    for name in ("mass", "quintic_norm", "weighted_mass", "tf_energy"):
        a, b = getattr(closed, name), getattr(ref, name)
        if abs(a - b) > CROSS_CHECK_RTOL * max(abs(a), abs(b)):
            raise InternalConsistencyError(
                f"tf_integrals {name}: closed form {a!r} vs quadrature {b!r}"
            )
    return closed


def energy_limit_constant(d: int, p: float, C0: float) -> float:
    """Limiting ground-state energy per unit of the mass power law.

    omega_d (2d+p) C0^(-d/p) mu^((2d+3p)/(2p)) / (4pd) * B((d+p)/p, 3/2);
    must agree with tf_integrals().tf_energy.
    """
    mu = mu_tf(d, p, C0)
    om = _SURFACE[d]
    val = (
        om * (2.0 * d + p) * C0 ** (-d / p)
        * mu ** ((2.0 * d + 3.0 * p) / (2.0 * p))
        / (4.0 * p * d)
        * beta_fn((d + p) / p, 1.5)
    )
    ref = tf_integrals(tf_profile(d, p, C0)).tf_energy
    if abs(val - ref) > CROSS_CHECK_RTOL * abs(ref):
        raise InternalConsistencyError(
            f"energy limit constant {val!r} disagrees with tf_energy {ref!r}"
        )
    return val


def mu_tf_root_find(d: int, p: float, C0: float) -> float:
    """Independent multiplier: solve the unit-mass normalization by bracketing.

    The mass is quadrature-evaluated as a function of the multiplier and the
    root is found with Brent's method; no Beta identities are used.
    """
    _validate_family(d, p, C0)
    om = _SURFACE[d]

    def mass_of(mu: float) -> float:
        R = (mu / C0) ** (1.0 / p)
        val, _ = quad(
            lambda r: (mu - C0 * r**p) ** 0.5 * r ** (d - 1),
            0.0,
            R,
            epsabs=1e-14,
            epsrel=1e-13,
            limit=200,
        )
        return om * val

    lo, hi = 1e-8, 1.0
    while mass_of(hi) < 1.0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket the mass normalization")
    return brentq(lambda mu: mass_of(mu) - 1.0, lo, hi, xtol=1e-15, rtol=8.9e-16)
