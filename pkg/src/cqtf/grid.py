"""Uniform radial grids with dimension-weighted quadrature and Laplacian.

A field u(r) on the grid represents a radially symmetric function on R^d;
integrals carry the measure omega_d r^(d-1) dr and the Laplacian is the
radial form u'' + (d-1)/r u'.  The origin uses the even-extension stencil
(u'(0) = 0, Lap u(0) = d u''(0)); beyond r_max a Dirichlet ghost value 0 is
assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .thomas_fermi import surface_measure

__all__ = [
    "RadialField",
    "RadialGrid",
    "apply_radial_laplacian",
    "integrate",
    "lq_norm",
    "radial_derivative",
]


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform nodes r_j = j h, j = 0..n-1, with h = r_max/(n-1)."""

    d: int
    n: int
    r_max: float

    def __post_init__(self) -> None:
        surface_measure(self.d)  # validates d
        if self.n < 64:
            raise ValueError(f"node count must be >= 64, got {self.n}")
        if not self.r_max > 0.0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")
        r = np.linspace(0.0, self.r_max, self.n)
        h = r[1] - r[0]
        # trapezoid weights under the measure omega_d r^(d-1) dr
        w = np.full(self.n, h)
        w[0] *= 0.5
        w[-1] *= 0.5
        w *= surface_measure(self.d) * r ** (self.d - 1)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "h", float(h))
        object.__setattr__(self, "weights", w)

    def field(self, values) -> "RadialField":
        return RadialField(self, np.asarray(values, dtype=float))


@dataclass
class RadialField:
    """Sampled radial function tied to its grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid size {self.grid.n}"
            )


def integrate(field: RadialField, power: float = 1.0, weight_p: float = 0.0) -> float:
    """Trapezoid value of int |u|^power |x|^weight_p dx over R^d.

    Radially: omega_d int_0^rmax |u(r)|^power r^(weight_p + d - 1) dr.
    """
    if power < 1.0:
        raise ValueError(f"power must be >= 1, got {power}")
    if weight_p < 0.0:
        raise ValueError(f"weight_p must be >= 0, got {weight_p}")
    vals = np.abs(field.values) ** power
    if weight_p != 0.0:
        vals = vals * field.grid.r**weight_p
    return float(np.dot(field.grid.weights, vals))


def lq_norm(field: RadialField, q: float) -> float:
    """L^q norm of the field; q = inf gives the max of |values|."""
    if np.isinf(q):
        return float(np.max(np.abs(field.values)))
    if q < 1.0:
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    return integrate(field, power=q) ** (1.0 / q)


def radial_derivative(field: RadialField) -> RadialField:
    """Central-difference du/dr with u'(0) = 0 and Dirichlet ghost at r_max."""
    u = field.values
    h = field.grid.h
    out = np.empty_like(u)
    out[0] = 0.0
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    out[-1] = (0.0 - u[-2]) / (2.0 * h)
    return RadialField(field.grid, out)


def apply_radial_laplacian(field: RadialField) -> RadialField:
    """Second-order radial Laplacian u'' + (d-1)/r u' on the grid.

    At the origin the regularity limit Lap u(0) = d u''(0) is used with the
    symmetric-extension stencil; the node at r_max sees a zero ghost value.
    """
    grid = field.grid
    u = field.values
    h, d, r = grid.h, grid.d, grid.r
    out = np.empty_like(u)
    out[0] = 2.0 * d * (u[1] - u[0]) / h**2
    second = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    out[1:-1] = second
    if d > 1:
        out[1:-1] += (d - 1) / r[1:-1] * (u[2:] - u[:-2]) / (2.0 * h)
    out[-1] = (0.0 - 2.0 * u[-1] + u[-2]) / h**2
    if d > 1:
        out[-1] += (d - 1) / r[-1] * (0.0 - u[-2]) / (2.0 * h)
    return RadialField(grid, out)
