"""Power-law fits and limit verification for ground-state sweeps.

Quantities tracked across a sweep in the mass N (equivalently in the
rescaling parameter tau): the energy and multiplier gaps to the closed-form
limit, profile errors by region (a compact core ball, the inner edge of the
corner layer, and the exterior), the kinetic blow-up, and the exterior
exponential decay rate.  Rate checks against the limit theory are one-sided:
observed errors must stay below the predicted bound shape times a bounded
constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import RadialField, apply_radial_laplacian, integrate, lq_norm, radial_derivative
from .minimizer import GroundState, rescale
from .potentials import PotentialSpec
from .thomas_fermi import TFProfile, energy_limit_constant, tf_integrals, u_tf

__all__ = [
    "CheckResult",
    "ConvergenceReport",
    "DecayCheck",
    "LaplacianCheck",
    "RegionErrors",
    "ReportRow",
    "ScalingFit",
    "exterior_decay_check",
    "fit_power_law",
    "laplacian_bound_check",
    "scaling_report",
    "tf_comparison",
    "verify_report",
]

# acceptance tolerances for the sweep-level checks
EXPONENT_TOL = 0.05
ENERGY_RATIO_TOL = 0.10
GAP_STEP_SLACK = 1.05      # per-step slack on "non-increasing" error sequences
RATIO_SLACK = 2.0          # one-sided bound: ratios stay within this of row 0
L6_FINAL_LIMIT = 5e-2
SUP_INTERVAL_SLACK = 2.0   # spread allowed for the scaled sup-norm sequence
R2_MIN = 0.99
DECAY_RATE_COEF = 0.05     # c in: fitted slope <= -c * tau^(-(p+4)/4)
DECAY_VALUE_FLOOR = 1e-280


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line on (log x, log y); exponent is the slope."""

    exponent: float
    log_prefactor: float
    r_squared: float
    n_points: int


def fit_power_law(xs, ys) -> ScalingFit:
    """Fit y ~ C x^e by linear regression in log-log coordinates."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise ValueError("fit_power_law needs matching 1-d inputs of length >= 3")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("fit_power_law requires strictly positive inputs")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return ScalingFit(
        exponent=float(slope),
        log_prefactor=float(intercept),
        r_squared=r2,
        n_points=int(x.size),
    )


@dataclass(frozen=True)
class RegionErrors:
    """Profile errors split by region around the limit support edge."""

    l2: float
    l6: float
    sup_compact: float    # over the core ball of half the support radius
    sup_inner: float      # up to the inner edge of the corner layer
    max_outside: float    # beyond the outer edge of the corner layer
    inner_radius: float
    outer_radius: float


def tf_comparison(
    state: GroundState,
    profile: TFProfile,
    epsilon: float,
    sigma: float | None = None,
) -> RegionErrors:
    """Compare the rescaled minimizer with the closed-form limit profile.

    The inner ball ends a distance (tau |ln tau|)^epsilon inside the support
    edge; the exterior starts tau^(p/2-epsilon) |ln tau|^(-epsilon) outside.
    """
    tau = state.tau
    if tau >= 1.0:
        raise ValueError(f"tau must be < 1 for layer scales, got {tau}")
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if sigma is not None and epsilon > sigma / 2.0 + 1e-12:
        raise ValueError(f"epsilon must not exceed sigma/2 = {sigma / 2.0}")

    grid = state.field_w.grid
    w = state.field_w.values
    ref = u_tf(profile, grid.r)
    diff = RadialField(grid, w - ref)

    log_tau = abs(math.log(tau))
    inner_radius = profile.radius - (tau * log_tau) ** epsilon
    outer_radius = profile.radius + tau ** (profile.p / 2.0 - epsilon) * log_tau ** (-epsilon)

    abs_diff = np.abs(diff.values)
    compact = grid.r <= profile.radius / 2.0
    inner = grid.r <= inner_radius
    outer = grid.r >= outer_radius
    return RegionErrors(
        l2=lq_norm(diff, 2),
        l6=lq_norm(diff, 6),
        sup_compact=float(abs_diff[compact].max()) if compact.any() else math.nan,
        sup_inner=float(abs_diff[inner].max()) if inner.any() else math.nan,
        max_outside=float(w[outer].max()) if outer.any() else 0.0,
        inner_radius=inner_radius,
        outer_radius=outer_radius,
    )


@dataclass(frozen=True)
class DecayCheck:
    """Fitted exponential decay of the tail just outside the corner layer."""

    passes: bool
    decay_beta: float     # -2 * slope * tau^((p+4)/4); +inf if tail underflowed
    slope: float
    rate: float           # -slope, the raw exponential rate
    n_points: int
    band_lo: float
    band_hi: float
    threshold_rate: float


def exterior_decay_check(
    state: GroundState,
    profile: TFProfile,
    epsilon: float,
    min_rate_coef: float = DECAY_RATE_COEF,
    value_floor: float = DECAY_VALUE_FLOOR,
) -> DecayCheck:
    """Fit the log-slope of r^((d-1)/2) w(r) on the exterior sampling band.

    Passes when the fitted slope is at most -min_rate_coef * tau^(-(p+4)/4).
    If fewer than three band values sit above the floating-point floor the
    tail has decayed below representability and the check passes with a
    +inf sentinel for the decay constant.
    """
    tau = state.tau
    if tau >= 1.0:
        raise ValueError(f"tau must be < 1 for layer scales, got {tau}")
    grid = state.field_w.grid
    w = state.field_w.values
    log_tau = abs(math.log(tau))
    layer = tau ** (profile.p / 2.0 - epsilon) * log_tau ** (-epsilon)
    lo = profile.radius + layer
    hi = min(profile.radius + 3.0 * layer, grid.r_max - 5.0 * grid.h)
    threshold = min_rate_coef * tau ** (-(profile.p + 4.0) / 4.0)

    mask = (grid.r >= lo) & (grid.r <= hi) & (w > value_floor)
    n_pts = int(mask.sum())
    if n_pts < 3:
        return DecayCheck(
            passes=True, decay_beta=math.inf, slope=-math.inf, rate=math.inf,
            n_points=n_pts, band_lo=lo, band_hi=hi, threshold_rate=threshold,
        )
    rr = grid.r[mask]
    envelope = np.log(rr ** ((grid.d - 1) / 2.0) * w[mask])
    slope = float(np.polyfit(rr, envelope, 1)[0])
    return DecayCheck(
        passes=slope <= -threshold,
        decay_beta=-2.0 * slope * tau ** ((profile.p + 4.0) / 4.0),
        slope=slope,
        rate=-slope,
        n_points=n_pts,
        band_lo=lo,
        band_hi=hi,
        threshold_rate=threshold,
    )


@dataclass(frozen=True)
class LaplacianCheck:
    """Sup of |Lap w| inside the support ball, scaled by the bound rates."""

    sup_laplacian: float
    bound_ratio: float         # sup * tau^((3p+6)/4)
    bound_ratio_strict: float  # sup * tau^((p+10)/4); same at p = 2


def laplacian_bound_check(state: GroundState, profile: TFProfile) -> LaplacianCheck:
    """Measure the Laplacian blow-up of the minimizer over the support ball."""
    grid = state.field_w.grid
    lap = apply_radial_laplacian(state.field_w).values
    inside = grid.r < profile.radius
    sup = float(np.abs(lap[inside]).max())
    return LaplacianCheck(
        sup_laplacian=sup,
        bound_ratio=sup * state.tau ** ((3.0 * profile.p + 6.0) / 4.0),
        bound_ratio_strict=sup * state.tau ** ((profile.p + 10.0) / 4.0),
    )


@dataclass(frozen=True)
class ReportRow:
    N: float
    tau: float
    e_tau: float
    energy_scaled: float     # tau^(-p) e_tau, the energy in original variables
    err_energy: float
    mu_tau: float
    err_mu: float
    l2_err: float
    l6_err: float
    sup_K: float
    sup_inner: float
    max_outside: float
    gradient_energy: float
    laplacian_sup: float
    laplacian_ratio: float
    laplacian_ratio_strict: float
    sup_phi: float
    quintic_phi: float
    potential_phi: float
    decay_rate: float
    decay_beta: float
    decay_passes: bool


#: fixed column order of the delimited report table
CSV_COLUMNS = (
    "N", "tau", "e_tau", "err_energy", "mu_tau", "err_mu",
    "l2_err", "l6_err", "sup_K", "sup_inner", "max_outside",
)


@dataclass
class ConvergenceReport:
    rows: list[ReportRow]
    fits: dict[str, ScalingFit]
    targets: dict[str, float]
    sigma: float
    epsilon: float
    decay_beta: float
    d: int
    p: float
    C0: float

    def csv_rows(self):
        for row in self.rows:
            yield [getattr(row, c) for c in CSV_COLUMNS]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": self.p,
            "C0": self.C0,
            "sigma": self.sigma,
            "epsilon": self.epsilon,
            "decay_beta": self.decay_beta,
            "targets": dict(self.targets),
            "fits": {
                name: {
                    "exponent": f.exponent,
                    "log_prefactor": f.log_prefactor,
                    "r_squared": f.r_squared,
                    "n_points": f.n_points,
                }
                for name, f in self.fits.items()
            },
            "rows": [
                {k: getattr(row, k) for k in row.__dataclass_fields__}
                for row in self.rows
            ],
        }


def scaling_report(
    states: list[GroundState],
    profile: TFProfile,
    spec: PotentialSpec | None = None,
    epsilon: float | None = None,
) -> ConvergenceReport:
    """Per-mass limit diagnostics and fitted exponents for a sweep.

    States must come in increasing mass (decreasing tau).  The layer
    parameter defaults to sigma/2, the widest inner region the layer
    rates allow.
    """
    if len(states) < 3:
        raise ValueError("scaling_report needs at least 3 states")
    taus = [s.tau for s in states]
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ValueError("states must be ordered by decreasing tau")

    d, p, C0 = profile.d, profile.p, profile.C0
    sigma = spec.sigma if spec is not None else min(p, 1.0)
    if epsilon is None:
        epsilon = sigma / 2.0
    ints = tf_integrals(profile)

    rows: list[ReportRow] = []
    for s in states:
        regions = tf_comparison(s, profile, epsilon, sigma=sigma)
        decay = exterior_decay_check(s, profile, epsilon)
        lap = laplacian_bound_check(s, profile)
        grad_energy = integrate(radial_derivative(s.field_w), power=2)
        phi = rescale(s)
        rows.append(
            ReportRow(
                N=s.N,
                tau=s.tau,
                e_tau=s.e_tau,
                energy_scaled=s.e_tau * s.tau ** (-p),
                err_energy=abs(s.e_tau - ints.tf_energy),
                mu_tau=s.mu_tau,
                err_mu=abs(s.mu_tau - profile.mu_tf),
                l2_err=regions.l2,
                l6_err=regions.l6,
                sup_K=regions.sup_compact,
                sup_inner=regions.sup_inner,
                max_outside=regions.max_outside,
                gradient_energy=grad_energy,
                laplacian_sup=lap.sup_laplacian,
                laplacian_ratio=lap.bound_ratio,
                laplacian_ratio_strict=lap.bound_ratio_strict,
                sup_phi=lq_norm(phi, math.inf),
                quintic_phi=integrate(phi, power=6),
                potential_phi=2.0 * s.energy_parts.potential * s.tau ** (-p),
                decay_rate=decay.rate,
                decay_beta=decay.decay_beta,
                decay_passes=decay.passes,
            )
        )

    Ns = np.array([r.N for r in rows])
    tau_arr = np.array([r.tau for r in rows])
    mass_exp = 2.0 * p / (2.0 * d + p)
    targets = {
        "energy_vs_N": mass_exp,
        "sup_phi_vs_N": -d / (2.0 * d + p),
        "quintic_phi_vs_N": -4.0 * d / (2.0 * d + p),
        "potential_phi_vs_N": mass_exp,
        "mu_gap_vs_tau": sigma,
        "energy_gap_vs_tau": sigma,
        "gradient_vs_tau": sigma - p - 2.0,
    }

    fits: dict[str, ScalingFit] = {}
    fits["energy_vs_N"] = fit_power_law(Ns, [r.energy_scaled for r in rows])
    fits["sup_phi_vs_N"] = fit_power_law(Ns, [r.sup_phi for r in rows])
    fits["quintic_phi_vs_N"] = fit_power_law(Ns, [r.quintic_phi for r in rows])
    fits["potential_phi_vs_N"] = fit_power_law(Ns, [r.potential_phi for r in rows])
    for name, values in (
        ("mu_gap_vs_tau", [r.err_mu for r in rows]),
        ("energy_gap_vs_tau", [r.err_energy for r in rows]),
        ("gradient_vs_tau", [r.gradient_energy for r in rows]),
    ):
        maybe = fit_of_tau(tau_arr, values)
        if maybe is not None:
            fits[name] = maybe

    return ConvergenceReport(
        rows=rows,
        fits=fits,
        targets=targets,
        sigma=sigma,
        epsilon=epsilon,
        decay_beta=rows[-1].decay_beta,
        d=d,
        p=p,
        C0=C0,
    )


def fit_of_tau(taus: np.ndarray, values) -> ScalingFit | None:
    """Power-law fit against tau, skipped when a value hit zero exactly."""
    arr = np.array(values, dtype=float)
    if np.any(arr <= 0.0):
        return None
    return fit_power_law(taus, arr)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str


def _bounded_ratio(errors, shapes, slack: float = RATIO_SLACK):
    """One-sided bound: err_i / shape_i must stay within slack of row 0."""
    ratios = [e / s for e, s in zip(errors, shapes)]
    ref = max(ratios[0], 1e-300)
    worst = max(ratios)
    return worst <= slack * ref, worst, ratios


def verify_report(report: ConvergenceReport) -> list[CheckResult]:
    """Evaluate the sweep-level limit checks on a convergence report."""
    rows = report.rows
    taus = [r.tau for r in rows]
    sigma, eps = report.sigma, report.epsilon
    checks: list[CheckResult] = []

    def add(name: str, passed: bool, value: float, detail: str) -> None:
        checks.append(CheckResult(name, bool(passed), float(value), detail))

    def exponent_check(name: str, two_sided: bool = True, lower_only: bool = False,
                       upper_only: bool = False) -> None:
        fit = report.fits.get(name)
        target = report.targets[name]
        if fit is None:
            add(name, False, math.nan, "fit unavailable (non-positive values)")
            return
        if two_sided and not (lower_only or upper_only):
            ok = abs(fit.exponent - target) <= EXPONENT_TOL and fit.r_squared >= R2_MIN
            add(name, ok, fit.exponent,
                f"exponent {fit.exponent:+.4f} vs target {target:+.4f} "
                f"(tol {EXPONENT_TOL}), r2={fit.r_squared:.5f}")
        elif lower_only:
            ok = fit.exponent >= target - EXPONENT_TOL
            add(name, ok, fit.exponent,
                f"exponent {fit.exponent:+.4f} must be >= {target:+.4f} - {EXPONENT_TOL}")
        else:
            ok = fit.exponent <= target + EXPONENT_TOL
            add(name, ok, fit.exponent,
                f"exponent {fit.exponent:+.4f} must be <= {target:+.4f} + {EXPONENT_TOL}")

    exponent_check("energy_vs_N")
    exponent_check("sup_phi_vs_N")
    exponent_check("quintic_phi_vs_N")
    exponent_check("potential_phi_vs_N", two_sided=False, upper_only=True)
    exponent_check("mu_gap_vs_tau", two_sided=False, lower_only=True)
    exponent_check("energy_gap_vs_tau", two_sided=False, lower_only=True)
    exponent_check("gradient_vs_tau", two_sided=False, lower_only=True)

    limit_const = energy_limit_constant(report.d, report.p, report.C0)
    mass_exp = report.targets["energy_vs_N"]
    final = rows[-1]
    ratio = final.energy_scaled / final.N**mass_exp / limit_const
    add("energy_ratio_final", abs(ratio - 1.0) <= ENERGY_RATIO_TOL, ratio,
        f"scaled energy over limit constant {ratio:.4f} within {ENERGY_RATIO_TOL:.0%} of 1")

    scaled_sup = [r.sup_phi * r.N ** (report.d / (2.0 * report.d + report.p)) for r in rows]
    spread = max(scaled_sup) / min(scaled_sup)
    add("supnorm_interval", min(scaled_sup) > 0.0 and spread <= SUP_INTERVAL_SLACK, spread,
        f"scaled sup-norm spread {spread:.4f} (allowed {SUP_INTERVAL_SLACK})")

    for name, vals in (
        ("mu_gap_monotone", [r.err_mu for r in rows]),
        ("energy_gap_monotone", [r.err_energy for r in rows]),
    ):
        ok = all(b <= GAP_STEP_SLACK * a for a, b in zip(vals, vals[1:]))
        add(name, ok, vals[-1], f"sequence {['%.3e' % v for v in vals]} non-increasing "
            f"(slack {GAP_STEP_SLACK})")

    mu_ok, mu_worst, _ = _bounded_ratio(
        [r.err_mu for r in rows], [t**sigma for t in taus])
    add("mu_gap_ratio", mu_ok, mu_worst,
        f"|mu gap|/tau^sigma worst {mu_worst:.4f} vs first "
        f"{rows[0].err_mu / taus[0]**sigma:.4f}")

    for name, vals in (
        ("profile_l2_decreasing", [r.l2_err for r in rows]),
        ("profile_l6_decreasing", [r.l6_err for r in rows]),
    ):
        ok = all(b < a for a, b in zip(vals, vals[1:]))
        add(name, ok, vals[-1], f"sequence {['%.3e' % v for v in vals]} strictly decreasing")

    add("profile_l6_final", rows[-1].l6_err <= L6_FINAL_LIMIT, rows[-1].l6_err,
        f"final L6 error {rows[-1].l6_err:.4e} <= {L6_FINAL_LIMIT}")

    supK = [r.sup_K for r in rows]
    add("corner_supK_decreasing", all(b < a for a, b in zip(supK, supK[1:])), supK[-1],
        f"sup error on core ball {['%.3e' % v for v in supK]} strictly decreasing")
    k_ok, k_worst, _ = _bounded_ratio(supK, [t**sigma for t in taus])
    add("corner_supK_ratio", k_ok, k_worst,
        f"sup_K/tau^sigma worst {k_worst:.4f}")

    inner_shape = [
        t ** (sigma - eps) * abs(math.log(t)) ** (-eps) for t in taus
    ]
    in_ok, in_worst, _ = _bounded_ratio([r.sup_inner for r in rows], inner_shape)
    add("corner_inner_ratio", in_ok, in_worst,
        f"inner-layer sup over bound shape worst {in_worst:.4f}")

    ordered = all(
        r.sup_K <= r.sup_inner + 1e-15
        for r in rows
        if not math.isnan(r.sup_inner)
    )
    add("region_ordering", ordered, 0.0, "core-ball sup error <= inner-layer sup error")

    add("exterior_decay_passes", all(r.decay_passes for r in rows),
        float(sum(r.decay_passes for r in rows)),
        f"{sum(r.decay_passes for r in rows)}/{len(rows)} rows pass the decay bound")
    rates = [r.decay_rate for r in rows]
    add("exterior_rate_monotone", all(b > a for a, b in zip(rates, rates[1:])), rates[-1],
        f"fitted decay rates {['%.3g' % v for v in rates]} strictly increasing")

    lap_ratios = [r.laplacian_ratio for r in rows]
    lap_ok = all(v <= RATIO_SLACK * max(lap_ratios[0], 1e-300) for v in lap_ratios)
    add("laplacian_ratio_bounded", lap_ok, max(lap_ratios),
        f"scaled Laplacian sup ratios {['%.3e' % v for v in lap_ratios]} bounded")

    return checks
