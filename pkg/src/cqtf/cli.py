"""Run orchestration and bit-stable result emission.

Subcommands: ``tf`` (limit-constant table), ``solve`` (one ground state),
``sweep`` (a family of masses), ``verify`` (sweep plus the full check
suite, nonzero exit on any failure).  Configuration comes from an optional
JSON file with every field overridable on the command line; flags win.
Payload files carry no timestamps and floats are written with 17
significant digits, so identical configs give byte-identical output; a
separate manifest carries run metadata.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import scaling_report, verify_report
from .grid import RadialGrid
from .minimizer import (
    GroundState,
    InitKind,
    NonConvergenceError,
    SolverConfig,
    SolverError,
    projected_gradient_minimize,
    solve_ground_state,
    sweep,
    tau_of,
)
from .potentials import PotentialKind, PotentialSpec
from .thomas_fermi import (
    energy_limit_constant,
    mu_tf,
    mu_tf_root_find,
    tf_integrals,
    tf_integrals_quadrature,
    tf_profile,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

ORACLE_GRID_N = 64
ORACLE_MASS = 1e2
ORACLE_TOL = 1e-6


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------

def _format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _render_json(obj, indent: int) -> str:
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad_in}{_render_json(str(k), 0)}: {_render_json(v, indent + 1)}'
            for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad_in}{_render_json(v, indent + 1)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, str):
        import json as _json

        return _json.dumps(obj)
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dump_json(obj, path: Path) -> None:
    path.write_text(_render_json(obj, 0) + "\n", encoding="utf-8")


def dump_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(_format_float(float(v)).strip('"'))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def dump_field_csv(path: Path, field) -> None:
    dump_csv(path, ("r", "value"), zip(field.grid.r, field.values))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    potential: PotentialSpec
    solver: SolverConfig
    N: float = 1e4
    Ns: tuple[float, ...] = (1e3, 1e4, 1e5)
    epsilon: float | None = None
    output_dir: str = "out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.command not in ("tf", "solve", "sweep", "verify"):
            raise ValueError(f"unknown command {self.command!r}")
        if self.command in ("sweep", "verify"):
            if len(self.Ns) < 1 or any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
                raise ValueError("Ns must be a non-empty increasing list")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def potential_to_dict(spec: PotentialSpec) -> dict:
    params: dict = {}
    if spec.kind is PotentialKind.POLYNOMIAL_SUM:
        params["terms"] = [list(t) for t in spec.terms]
    elif spec.kind is PotentialKind.MAGNETIC_TRAP:
        params["a"] = spec.a
        params["b"] = spec.b
    elif spec.kind is PotentialKind.TABULATED:
        params["r_table"] = list(spec.r_table)
        params["v_table"] = list(spec.v_table)
    return {
        "kind": spec.kind.value,
        "C0": spec.C0,
        "p": spec.p,
        "alpha": spec.alpha,
        "C1": spec.C1,
        "C2": spec.C2,
        "params": params,
    }


def potential_from_dict(rec: dict) -> PotentialSpec:
    params = rec.get("params", {}) or {}
    return PotentialSpec(
        kind=PotentialKind(rec.get("kind", "pure_power")),
        C0=float(rec.get("C0", 1.0)),
        p=float(rec.get("p", 2.0)),
        alpha=float(rec.get("alpha", 0.0)),
        C1=float(rec.get("C1", 0.0)),
        C2=float(rec.get("C2", 0.0)),
        terms=tuple(tuple(map(float, t)) for t in params.get("terms", ())),
        a=float(params.get("a", 0.0)),
        b=float(params.get("b", 0.0)),
        r_table=tuple(map(float, params.get("r_table", ()))),
        v_table=tuple(map(float, params.get("v_table", ()))),
    )


def config_to_dict(cfg: RunConfig) -> dict:
    s = cfg.solver
    return {
        "command": cfg.command,
        "potential": potential_to_dict(cfg.potential),
        "solver": {
            "d": s.d,
            "kappa": s.kappa,
            "dt": s.dt,
            "tol_energy": s.tol_energy,
            "tol_residual": s.tol_residual,
            "max_iter": s.max_iter,
            "grid_n": s.grid_n,
            "r_max": s.r_max,
            "init": s.init.value,
        },
        "N": cfg.N,
        "Ns": list(cfg.Ns),
        "epsilon": cfg.epsilon,
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
        "workers": cfg.workers,
    }


def config_from_dict(rec: dict, command: str | None = None) -> RunConfig:
    if "config" in rec and isinstance(rec["config"], dict):
        rec = rec["config"]  # manifest wrapper round-trips
    s = rec.get("solver", {}) or {}
    return RunConfig(
        command=command or rec.get("command", "tf"),
        potential=potential_from_dict(rec.get("potential", {}) or {}),
        solver=SolverConfig(
            d=int(s.get("d", 1)),
            kappa=int(s.get("kappa", 1)),
            dt=float(s.get("dt", 0.25)),
            tol_energy=float(s.get("tol_energy", 1e-11)),
            tol_residual=float(s.get("tol_residual", 1e-6)),
            max_iter=int(s.get("max_iter", 200_000)),
            grid_n=int(s.get("grid_n", 1024)),
            r_max=None if s.get("r_max") is None else float(s["r_max"]),
            init=InitKind(s.get("init", "smoothed_tf")),
        ),
        N=float(rec.get("N", 1e4)),
        Ns=tuple(float(x) for x in rec.get("Ns", (1e3, 1e4, 1e5))),
        epsilon=None if rec.get("epsilon") is None else float(rec["epsilon"]),
        output_dir=str(rec.get("output_dir", "out")),
        seed=int(rec.get("seed", 0)),
        workers=int(rec.get("workers", 1)),
    )


def _parse_args(argv) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config file")
    common.add_argument("--kind", type=str, default=None,
                        help="potential kind (pure_power, polynomial_sum, magnetic_trap, tabulated)")
    common.add_argument("--d", type=int, default=None, help="space dimension (1, 2 or 3)")
    common.add_argument("--p", type=float, default=None, help="leading tail power")
    common.add_argument("--C0", type=float, default=None, help="leading tail coefficient")
    common.add_argument("--alpha", type=float, default=None, help="subleading tail power")
    common.add_argument("--C1", type=float, default=None, help="virial subleading constant")
    common.add_argument("--C2", type=float, default=None, help="value subleading constant")
    common.add_argument("--kappa", type=int, default=None, choices=(1, -1),
                        help="cubic sign: +1 defocusing, -1 focusing")
    common.add_argument("--N", type=float, default=None, help="mass for solve")
    common.add_argument("--Ns", type=str, default=None, help="comma-separated masses for sweep/verify")
    common.add_argument("--grid-n", type=int, default=None, help="radial node count")
    common.add_argument("--rmax", type=float, default=None, help="rescaled domain radius")
    common.add_argument("--dt", type=float, default=None, help="flow step size")
    common.add_argument("--tol", type=float, default=None, help="EL residual tolerance")
    common.add_argument("--max-iter", type=int, default=None, help="flow iteration cap")
    common.add_argument("--init", type=str, default=None,
                        help="initialization (smoothed_tf, gaussian, warm_start)")
    common.add_argument("--epsilon", type=float, default=None, help="corner-layer parameter")
    common.add_argument("--workers", type=int, default=None, help="parallel solves for sweep")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="seed for oracle restarts")

    parser = argparse.ArgumentParser(
        prog="cqtf",
        description="Ground states of the trapped cubic-quintic energy and their Thomas-Fermi limit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("tf", parents=[common], help="limit multiplier/profile constants table")
    sub.add_parser("solve", parents=[common], help="one ground state at mass N")
    sub.add_parser("sweep", parents=[common], help="ground states for each mass in Ns")
    sub.add_parser("verify", parents=[common], help="sweep plus the full limit check suite")
    return parser.parse_args(argv)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    rec: dict = {}
    if args.config:
        import json as _json

        rec = _json.loads(Path(args.config).read_text(encoding="utf-8"))
        if "config" in rec and isinstance(rec["config"], dict):
            rec = rec["config"]
    pot = dict(rec.get("potential", {}) or {})
    sol = dict(rec.get("solver", {}) or {})
    for key in ("kind", "C0", "p", "alpha", "C1", "C2"):
        val = getattr(args, key)
        if val is not None:
            pot[key] = val
    flag_to_solver = {
        "d": "d", "kappa": "kappa", "dt": "dt", "tol": "tol_residual",
        "grid_n": "grid_n", "rmax": "r_max", "max_iter": "max_iter", "init": "init",
    }
    for flag, field_name in flag_to_solver.items():
        val = getattr(args, flag)
        if val is not None:
            sol[field_name] = val
    rec["potential"] = pot
    rec["solver"] = sol
    if args.N is not None:
        rec["N"] = args.N
    if args.Ns is not None:
        rec["Ns"] = [float(x) for x in args.Ns.split(",") if x]
    if args.epsilon is not None:
        rec["epsilon"] = args.epsilon
    if args.out is not None:
        rec["output_dir"] = args.out
    if args.seed is not None:
        rec["seed"] = args.seed
    if args.workers is not None:
        rec["workers"] = args.workers
    return config_from_dict(rec, command=args.command)


def _write_manifest(cfg: RunConfig, out: Path, artifacts: list[str]) -> None:
    manifest = {
        "tool": "cqtf",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "artifacts": artifacts,
        "config": config_to_dict(cfg),
    }
    dump_json(manifest, out / "manifest.json")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_tf(cfg: RunConfig, out: Path) -> int:
    spec = cfg.potential
    d = cfg.solver.d
    profile = tf_profile(d, spec.p, spec.C0)
    ints = tf_integrals(profile)
    payload = {
        "d": d,
        "p": spec.p,
        "C0": spec.C0,
        "mu_tf": profile.mu_tf,
        "radius": profile.radius,
        "mass": ints.mass,
        "quintic_norm": ints.quintic_norm,
        "weighted_mass": ints.weighted_mass,
        "tf_energy": ints.tf_energy,
        "energy_limit_constant": energy_limit_constant(d, spec.p, spec.C0),
    }
    dump_json(payload, out / "tf_constants.json")
    _write_manifest(cfg, out, ["tf_constants.json"])
    print(f"mu_tf = {profile.mu_tf:.12g}  radius = {profile.radius:.12g}  "
          f"tf_energy = {ints.tf_energy:.12g}")
    return EXIT_OK


def _write_state(state: GroundState, out: Path, stem: str) -> list[str]:
    dump_json(state.summary_dict(), out / f"{stem}.json")
    dump_field_csv(out / f"{stem}_field.csv", state.field_w)
    return [f"{stem}.json", f"{stem}_field.csv"]


def _cmd_solve(cfg: RunConfig, out: Path) -> int:
    try:
        state = solve_ground_state(cfg.solver, cfg.potential, cfg.N)
    except SolverError as err:
        artifacts = []
        state = getattr(err, "state", None)
        if state is not None:
            artifacts = _write_state(state, out, "ground_state")
        dump_json({"error": str(err)}, out / "error.json")
        _write_manifest(cfg, out, artifacts + ["error.json"])
        print(f"solver failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    artifacts = _write_state(state, out, "ground_state")
    _write_manifest(cfg, out, artifacts)
    print(f"N = {state.N:g}  e_tau = {state.e_tau:.12g}  mu_tau = {state.mu_tau:.12g}  "
          f"iterations = {state.iterations}")
    return EXIT_OK


def _run_sweep(cfg: RunConfig) -> list[GroundState]:
    return sweep(cfg.solver, cfg.potential, list(cfg.Ns), workers=cfg.workers)


def _cmd_sweep(cfg: RunConfig, out: Path) -> int:
    try:
        states = _run_sweep(cfg)
    except SolverError as err:
        dump_json(
            {"error": str(err), "index": getattr(err, "sweep_index", None),
             "N": getattr(err, "sweep_N", None)},
            out / "error.json",
        )
        _write_manifest(cfg, out, ["error.json"])
        print(f"sweep failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    artifacts: list[str] = []
    for i, state in enumerate(states):
        artifacts += _write_state(state, out, f"ground_state_{i:03d}")
        print(f"[{i}] N = {state.N:g}  tau = {state.tau:.6g}  e_tau = {state.e_tau:.12g}")
    _write_manifest(cfg, out, artifacts)
    return EXIT_OK


def _closed_form_checks(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    spec, d = cfg.potential, cfg.solver.d
    results = []
    mu_closed = mu_tf(d, spec.p, spec.C0)
    mu_oracle = mu_tf_root_find(d, spec.p, spec.C0)
    rel = abs(mu_closed - mu_oracle) / abs(mu_oracle)
    results.append(("tf_closed_form_mu", rel <= 1e-10,
                    f"closed form {mu_closed:.12g} vs mass root-find {mu_oracle:.12g} "
                    f"(rel {rel:.2e})"))
    profile = tf_profile(d, spec.p, spec.C0)
    ints = tf_integrals(profile)
    quad_ints = tf_integrals_quadrature(profile)
    rel_e = abs(ints.tf_energy - quad_ints.tf_energy) / abs(quad_ints.tf_energy)
    limit_const = energy_limit_constant(d, spec.p, spec.C0)
    rel_c = abs(limit_const - quad_ints.tf_energy) / abs(quad_ints.tf_energy)
    results.append(("tf_closed_form_energy", rel_e <= 1e-10 and rel_c <= 1e-10,
                    f"limit constant {limit_const:.12g} vs quadrature energy "
                    f"{quad_ints.tf_energy:.12g} (rel {rel_c:.2e})"))
    mu_identity = 2.0 * ints.tf_energy + (2.0 / 3.0) * ints.quintic_norm
    rel_mu = abs(mu_identity - profile.mu_tf) / profile.mu_tf
    results.append(("tf_identity_multiplier", rel_mu <= 1e-10,
                    f"2e + 2/3 |u|_6^6 = {mu_identity:.12g} vs mu {profile.mu_tf:.12g}"))
    lhs = 0.5 * spec.p * spec.C0 * ints.weighted_mass
    rhs = d / 3.0 * ints.quintic_norm
    rel_v = abs(lhs - rhs) / abs(rhs)
    results.append(("tf_identity_virial", rel_v <= 1e-10,
                    f"virial identity sides {lhs:.12g} / {rhs:.12g} (rel {rel_v:.2e})"))
    return results


def _oracle_check(cfg: RunConfig) -> tuple[str, bool, str]:
    oracle_cfg = replace(
        cfg.solver, grid_n=ORACLE_GRID_N, r_max=None,
        init=InitKind.SMOOTHED_TF, tol_residual=1e-4, max_iter=100_000,
    )
    state = solve_ground_state(oracle_cfg, cfg.potential, ORACLE_MASS)
    grid = RadialGrid(d=cfg.solver.d, n=ORACLE_GRID_N,
                      r_max=state.field_w.grid.r_max)
    tau = tau_of(ORACLE_MASS, cfg.solver.d, cfg.potential.p)
    e_pgd, _ = projected_gradient_minimize(
        grid, cfg.potential, tau, cfg.solver.kappa, restarts=5, seed=cfg.seed,
    )
    gap = abs(state.e_tau - e_pgd)
    return ("oracle_equivalence", gap <= ORACLE_TOL,
            f"flow {state.e_tau:.12g} vs projected gradient {e_pgd:.12g} (|diff| {gap:.2e})")


def _invariant_checks(states: list[GroundState], tol_residual: float) -> list[tuple[str, bool, str]]:
    mass_ok = all(s.max_mass_error <= 1e-10 for s in states)
    energy_ok = all(s.max_energy_increase <= s.energy_slack for s in states)
    nonneg_ok = all(float(s.field_w.values.min()) >= -1e-12 for s in states)
    monot_ok = all(
        float(np.max(np.diff(s.field_w.values))) <= 1e-10 * float(s.field_w.values.max())
        for s in states
    )
    el_ok = all(s.el_residual <= tol_residual for s in states)
    poho_ok = all(s.pohozaev_residual <= 1e-3 for s in states)
    return [
        ("solver_mass_conservation", mass_ok,
         f"worst |mass-1| = {max(s.max_mass_error for s in states):.2e}"),
        ("solver_energy_monotone", energy_ok,
         f"worst accepted increase = {max(s.max_energy_increase for s in states):.2e}"),
        ("solver_positivity", nonneg_ok,
         f"min field value = {min(float(s.field_w.values.min()) for s in states):.2e}"),
        ("solver_monotonicity", monot_ok, "fields radially non-increasing"),
        ("solver_el_residual", el_ok,
         f"worst EL residual = {max(s.el_residual for s in states):.2e}"),
        ("solver_pohozaev_residual", poho_ok,
         f"worst virial residual = {max(s.pohozaev_residual for s in states):.2e}"),
    ]


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    spec, d = cfg.potential, cfg.solver.d
    lines: list[tuple[str, bool, str]] = []
    lines += _closed_form_checks(cfg)
    try:
        states = _run_sweep(cfg)
    except SolverError as err:
        dump_json({"error": str(err), "index": getattr(err, "sweep_index", None)},
                  out / "error.json")
        _write_manifest(cfg, out, ["error.json"])
        print(f"verify sweep failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    profile = tf_profile(d, spec.p, spec.C0)
    report = scaling_report(states, profile, spec=spec, epsilon=cfg.epsilon)
    for check in verify_report(report):
        lines.append((check.name, check.passed, check.detail))
    lines.append(_oracle_check(cfg))
    lines += _invariant_checks(states, cfg.solver.tol_residual)

    dump_json(report.to_dict(), out / "report.json")
    dump_csv(out / "report.csv",
             ("N", "tau", "e_tau", "err_energy", "mu_tau", "err_mu",
              "l2_err", "l6_err", "sup_K", "sup_inner", "max_outside"),
             report.csv_rows())
    dump_json(
        {"checks": [{"name": n, "passed": ok, "detail": detail} for n, ok, detail in lines]},
        out / "checks.json",
    )
    _write_manifest(cfg, out, ["report.json", "report.csv", "checks.json"])

    n_fail = 0
    for name, ok, detail in lines:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        n_fail += 0 if ok else 1
    print(f"{len(lines) - n_fail}/{len(lines)} checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_CHECK_FAILED


def run(cfg: RunConfig) -> int:
    """Execute a run configuration; returns the process exit status."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dispatch = {
        "tf": _cmd_tf,
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "verify": _cmd_verify,
    }
    return dispatch[cfg.command](cfg, out)


def main(argv=None) -> None:
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, KeyError, OSError) as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    sys.exit(run(cfg))


if __name__ == "__main__":
    main()
