"""Admissible radial trapping potentials and their tail data.

Every potential here is non-negative, non-decreasing in r and grows like
``C0 r^p`` with ``p >= 2``; the subleading behaviour is described by declared
constants ``(alpha, C1, C2)`` so that

    (grad V . x) / (p r^p)            -> C0,
    (grad V . x - C0 p r^p) / r^alpha -> C1,
    (V - C0 r^p) / r^alpha            -> C2

as r -> infinity.  The constants are declared by the constructors, not
inferred; :func:`verify_tail_conditions` audits them on a sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "ConditionReport",
    "ExtrapolationError",
    "PotentialKind",
    "PotentialSpec",
    "verify_tail_conditions",
]


class ExtrapolationError(ValueError):
    """Evaluation requested beyond the range of a tabulated potential."""


class PotentialKind(str, Enum):
    PURE_POWER = "pure_power"
    POLYNOMIAL_SUM = "polynomial_sum"
    MAGNETIC_TRAP = "magnetic_trap"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class PotentialSpec:
    """A radial trapping potential with declared tail constants.

    Kind-specific parameters:
      * ``polynomial_sum`` -- ``terms`` is a tuple of (a_i, p_i) with a_i > 0,
        p_i >= 2, evaluating to sum(a_i r^p_i).
      * ``magnetic_trap`` -- ``r^2 + a exp(-b r^2)`` with a, b > 0 and
        a*b <= 1 (keeps V non-decreasing).
      * ``tabulated`` -- monotone piecewise-cubic interpolation of
        (r_table, v_table); derivative by analytic differentiation of the
        interpolant; evaluation beyond the table raises ExtrapolationError.
    """

    kind: PotentialKind
    C0: float
    p: float
    alpha: float = 0.0
    C1: float = 0.0
    C2: float = 0.0
    terms: tuple[tuple[float, float], ...] = ()
    a: float = 0.0
    b: float = 0.0
    r_table: tuple[float, ...] = ()
    v_table: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if not self.C0 > 0.0:
            raise ValueError(f"C0 must be positive, got {self.C0}")
        if not self.p >= 2.0:
            raise ValueError(f"p must satisfy p >= 2, got {self.p}")
        if not 0.0 <= self.alpha < self.p:
            raise ValueError(f"alpha must lie in [0, p), got {self.alpha}")
        if self.C1 < 0.0 or self.C2 < 0.0:
            raise ValueError("C1 and C2 must be non-negative")
        if self.kind is PotentialKind.PURE_POWER:
            if self.C1 != 0.0 or self.C2 != 0.0:
                raise ValueError("pure power potential requires C1 = C2 = 0")
        elif self.kind is PotentialKind.POLYNOMIAL_SUM:
            if not self.terms:
                raise ValueError("polynomial_sum requires at least one term")
            for a_i, p_i in self.terms:
                if not a_i > 0.0 or not p_i >= 2.0:
                    raise ValueError(f"invalid polynomial term ({a_i}, {p_i})")
        elif self.kind is PotentialKind.MAGNETIC_TRAP:
            if not (self.a > 0.0 and self.b > 0.0):
                raise ValueError("magnetic trap requires a > 0 and b > 0")
            if self.a * self.b > 1.0:
                raise ValueError("magnetic trap requires a*b <= 1 so V is non-decreasing")
        elif self.kind is PotentialKind.TABULATED:
            r = np.asarray(self.r_table, dtype=float)
            v = np.asarray(self.v_table, dtype=float)
            if r.size < 4 or r.size != v.size:
                raise ValueError("tabulated potential needs >= 4 matching samples")
            if r[0] != 0.0 or np.any(np.diff(r) <= 0.0):
                raise ValueError("r_table must start at 0 and be strictly increasing")
            if np.any(v < 0.0) or np.any(np.diff(v) < 0.0):
                raise ValueError("v_table must be non-negative and non-decreasing")
            interp = PchipInterpolator(r, v, extrapolate=False)
            object.__setattr__(self, "_interp", interp)
            object.__setattr__(self, "_interp_deriv", interp.derivative())

    # -- constructors ------------------------------------------------------

    @classmethod
    def pure_power(cls, C0: float, p: float) -> "PotentialSpec":
        """V(r) = C0 r^p."""
        return cls(kind=PotentialKind.PURE_POWER, C0=C0, p=p)

    @classmethod
    def polynomial_sum(cls, terms) -> "PotentialSpec":
        """V(r) = sum(a_i r^p_i); tail constants derived from the powers."""
        terms = tuple((float(a), float(q)) for a, q in terms)
        if not terms:
            raise ValueError("polynomial_sum requires at least one term")
        p = max(q for _, q in terms)
        C0 = sum(a for a, q in terms if q == p)
        sub = [q for _, q in terms if q < p]
        if sub:
            alpha = max(sub)
            C1 = sum(a * q for a, q in terms if q == alpha)
            C2 = sum(a for a, q in terms if q == alpha)
        else:
            alpha, C1, C2 = 0.0, 0.0, 0.0
        return cls(
            kind=PotentialKind.POLYNOMIAL_SUM,
            C0=C0, p=p, alpha=alpha, C1=C1, C2=C2, terms=terms,
        )

    @classmethod
    def magnetic_trap(cls, a: float, b: float) -> "PotentialSpec":
        """V(r) = r^2 + a exp(-b r^2); the correction decays faster than any power."""
        return cls(kind=PotentialKind.MAGNETIC_TRAP, C0=1.0, p=2.0, a=a, b=b)

    @classmethod
    def tabulated(
        cls,
        r_table,
        v_table,
        C0: float,
        p: float,
        alpha: float = 0.0,
        C1: float = 0.0,
        C2: float = 0.0,
    ) -> "PotentialSpec":
        """Interpolated potential with caller-declared tail constants."""
        return cls(
            kind=PotentialKind.TABULATED,
            C0=C0, p=p, alpha=alpha, C1=C1, C2=C2,
            r_table=tuple(float(x) for x in r_table),
            v_table=tuple(float(x) for x in v_table),
        )

    # -- evaluation --------------------------------------------------------

    @property
    def sigma(self) -> float:
        """Rate exponent min(p - alpha, 1) set by the subleading tail."""
        return min(self.p - self.alpha, 1.0)

    def eval(self, r):
        """V(r) for scalar or array r >= 0."""
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0.0):
            raise ValueError("radius must be non-negative")
        if self.kind is PotentialKind.PURE_POWER:
            out = self.C0 * r_arr**self.p
        elif self.kind is PotentialKind.POLYNOMIAL_SUM:
            out = sum(a_i * r_arr**p_i for a_i, p_i in self.terms)
        elif self.kind is PotentialKind.MAGNETIC_TRAP:
            out = r_arr**2 + self.a * np.exp(-self.b * r_arr**2)
        else:
            if np.any(r_arr > self.r_table[-1]):
                raise ExtrapolationError(
                    f"radius beyond tabulated range [0, {self.r_table[-1]}]"
                )
            out = self._interp(r_arr)
        if np.isscalar(r) or r_arr.ndim == 0:
            return float(out)
        return np.asarray(out)

    def radial_virial(self, r):
        """grad V . x evaluated radially, i.e. r V'(r)."""
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0.0):
            raise ValueError("radius must be non-negative")
        if self.kind is PotentialKind.PURE_POWER:
            out = self.p * self.C0 * r_arr**self.p
        elif self.kind is PotentialKind.POLYNOMIAL_SUM:
            out = sum(a_i * p_i * r_arr**p_i for a_i, p_i in self.terms)
        elif self.kind is PotentialKind.MAGNETIC_TRAP:
            out = 2.0 * r_arr**2 * (1.0 - self.a * self.b * np.exp(-self.b * r_arr**2))
        else:
            if np.any(r_arr > self.r_table[-1]):
                raise ExtrapolationError(
                    f"radius beyond tabulated range [0, {self.r_table[-1]}]"
                )
            out = r_arr * self._interp_deriv(r_arr)
        if np.isscalar(r) or r_arr.ndim == 0:
            return float(out)
        return np.asarray(out)


@dataclass(frozen=True)
class ConditionReport:
    """Empirical audit of the declared tail constants on a sample grid."""

    r_largest: float
    limit_leading: float        # (grad V . x) / (p r^p), should approach C0
    limit_virial_sub: float     # (grad V . x - C0 p r^p) / r^alpha, -> C1
    limit_value_sub: float      # (V - C0 r^p) / r^alpha, -> C2
    residual_leading: float
    residual_virial_sub: float
    residual_value_sub: float
    tolerance: float
    monotone: bool
    passed_leading: bool
    passed_virial_sub: bool
    passed_value_sub: bool

    @property
    def passed(self) -> bool:
        return (
            self.monotone
            and self.passed_leading
            and self.passed_virial_sub
            and self.passed_value_sub
        )


def verify_tail_conditions(
    spec: PotentialSpec, r_samples, tolerance: float = 1e-6
) -> ConditionReport:
    """Audit the declared (C0, C1, C2) limits at the largest samples.

    ``r_samples`` must be strictly increasing with max(r_samples) >= 100 so
    the empirical ratios are evaluated deep in the tail.  Report-only: a
    failed audit never raises.
    """
    r = np.asarray(r_samples, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0.0):
        raise ValueError("r_samples must be strictly increasing")
    if r[-1] < 100.0:
        raise ValueError("largest sample must be >= 100 to probe the tail")

    v = spec.eval(r)
    monotone = bool(np.all(v >= 0.0) and np.all(np.diff(v) >= -1e-12 * max(1.0, v[-1])))

    r_top = float(r[-1])
    vir_top = spec.radial_virial(r_top)
    v_top = spec.eval(r_top)
    denom_sub = r_top**spec.alpha
    lim_lead = vir_top / (spec.p * r_top**spec.p)
    lim_vir = (vir_top - spec.C0 * spec.p * r_top**spec.p) / denom_sub
    lim_val = (v_top - spec.C0 * r_top**spec.p) / denom_sub

    def within(measured: float, declared: float) -> bool:
        return abs(measured - declared) <= tolerance * max(1.0, abs(declared))

    return ConditionReport(
        r_largest=r_top,
        limit_leading=lim_lead,
        limit_virial_sub=lim_vir,
        limit_value_sub=lim_val,
        residual_leading=abs(lim_lead - spec.C0),
        residual_virial_sub=abs(lim_vir - spec.C1),
        residual_value_sub=abs(lim_val - spec.C2),
        tolerance=tolerance,
        monotone=monotone,
        passed_leading=within(lim_lead, spec.C0),
        passed_virial_sub=within(lim_vir, spec.C1),
        passed_value_sub=within(lim_val, spec.C2),
    )
