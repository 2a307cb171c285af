"""Command-line front end: ``point``, ``sweep`` and ``check`` subcommands.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence
(or a failed sweep point), 4 invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    apply_assignment,
    build_system,
    config_digest,
    load_document,
    parse_config,
)
from .dirac import (
    DiracSystem,
    dirac_conductance,
    dirac_current,
    dirac_densities,
    dirac_heat_current,
    dirac_noise_zero_freq,
)
from .numerics import QuadratureError
from .reservoirs import Statistics
from .schrodinger import (
    KIRCHHOFF_ABS_FLOOR,
    KIRCHHOFF_REL_TOL,
    BoundStateError,
    LeadMatrix,
    LeadVector,
    SchrodingerSystem,
    charge_density_profile,
    conductance,
    energy_density_profile,
    heat_current,
    noise_critical_closed_form,
    noise_zero_freq,
    stefan_boltzmann_critical,
    steady_current,
    thermal_noise_bounds_two_lead,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4

POINT_COLUMNS = ("observable", "i", "j", "x", "value", "osc", "eq", "neq",
                 "kirchhoff_residual", "converged", "units")


@dataclass
class Row:
    observable: str
    i: int | None = None
    j: int | None = None
    x: float | None = None
    value: float = math.nan
    osc: float | None = None
    eq: float | None = None
    neq: float | None = None
    residual: float | None = None
    converged: bool = True
    units: str = ""

    def key(self) -> str:
        k = self.observable
        if self.i is not None:
            k += f"_{self.i}"
        if self.j is not None:
            k += f"_{self.j}"
        return k


@dataclass
class Evaluation:
    rows: list[Row]
    converged: bool = True
    violations: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    bound_state_free: bool = True


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if v == 0:
        return "0"  # also folds -0.0
    return "%.12g" % v


def _tol(scale: float) -> float:
    return max(KIRCHHOFF_REL_TOL * scale, KIRCHHOFF_ABS_FLOOR)


def _vector_rows(res: LeadVector, ev: Evaluation, name: str | None = None):
    name = name or res.observable
    r = res.kirchhoff_residual
    if not res.kirchhoff_ok():
        ev.violations.append(f"{name}: Kirchhoff residual {r:.3e}")
    ev.converged &= res.converged
    ev.notes.extend(res.notes)
    for i, v in enumerate(res.values):
        ev.rows.append(Row(name, i + 1, value=v, residual=r, converged=res.converged, units=res.units))


def _matrix_rows(res: LeadMatrix, ev: Evaluation, columns_only=False, symmetric=False):
    vals = res.values
    scale = float(np.max(np.abs(vals)))
    rows_r, cols_r = res.row_residuals, res.column_residuals
    if not res.kirchhoff_ok(rows=not columns_only):
        ev.violations.append(f"{res.observable}: Kirchhoff residual {res.kirchhoff_residual:.3e}")
    if symmetric and np.max(np.abs(vals - vals.T)) > _tol(scale):
        ev.violations.append(f"{res.observable}: asymmetry {np.max(np.abs(vals - vals.T)):.3e}")
    ev.converged &= res.converged
    ev.notes.extend(res.notes)
    n = vals.shape[0]
    for i in range(n):
        for j in range(n):
            r = cols_r[j] if columns_only else max(rows_r[i], cols_r[j])
            ev.rows.append(Row(res.observable, i + 1, j + 1, value=vals[i, j], residual=r,
                               converged=res.converged, units=res.units))


def evaluate(cfg: RunConfig, system=None) -> Evaluation:
    """Compute every requested observable of ``cfg``."""
    sysm = system if system is not None else build_system(cfg)
    ev = Evaluation([])
    q = cfg.quadrature
    if isinstance(sysm, DiracSystem):
        _evaluate_dirac(cfg, sysm, ev, q)
    else:
        ev.bound_state_free = sysm.bound_state_free
        _evaluate_schrodinger(cfg, sysm, ev, q)
    ev.notes = list(dict.fromkeys(n for n in ev.notes if n != "closed form"))
    return ev


def _density_rows(ev, name, prof, units):
    scale = max(abs(prof.eq), abs(prof.total), abs(prof.neq))
    if prof.identity_residual > _tol(scale):
        ev.violations.append(f"{name}: density identity residual {prof.identity_residual:.3e}")
    ev.converged &= prof.converged
    ev.notes.extend(prof.notes)
    ev.rows.append(Row(name, prof.lead + 1, x=prof.x, value=prof.total, osc=prof.osc, eq=prof.eq,
                       neq=prof.neq, residual=prof.identity_residual, converged=prof.converged, units=units))


def _evaluate_schrodinger(cfg, s: SchrodingerSystem, ev, q):
    for obs in cfg.observables:
        if obs == "current":
            _vector_rows(steady_current(s, settings=q), ev)
        elif obs == "heat_current":
            _vector_rows(heat_current(s, settings=q), ev)
        elif obs == "conductance":
            _matrix_rows(conductance(s, settings=q), ev, columns_only=True)
        elif obs == "noise":
            P = noise_zero_freq(s, settings=q)
            _matrix_rows(P, ev, symmetric=True)
        elif obs in ("charge_density", "energy_density"):
            fn = charge_density_profile if obs == "charge_density" else energy_density_profile
            units = "charge/length" if obs == "charge_density" else "energy/length"
            for x in cfg.x:
                for i in range(s.n):
                    _density_rows(ev, obs, fn(s, i, x, q), units)
        elif obs == "thermal_noise_two_lead":
            b = thermal_noise_bounds_two_lead(s.coupling, s.m, s.e, s.bank.beta[0], q)
            ev.converged &= b.converged
            ev.notes.extend(b.notes)
            if not (b.bracket_lower * (1 - 1e-9) <= b.value <= b.upper * (1 + 1e-9)):
                ev.violations.append("thermal_noise_two_lead: value outside [C I/4, C I]")
            for name, v in (("thermal_noise_two_lead", b.value), ("thermal_noise_lower", b.lower),
                            ("thermal_noise_upper", b.upper), ("thermal_noise_bracket_lower", b.bracket_lower)):
                ev.rows.append(Row(name, 1, 1, value=v, converged=b.converged, units="charge^2/time"))


def _evaluate_dirac(cfg, s: DiracSystem, ev, q):
    for obs in cfg.observables:
        if obs == "current":
            _vector_rows(dirac_current(s), ev)
        elif obs == "heat_current":
            _vector_rows(dirac_heat_current(s), ev)
        elif obs == "conductance":
            _matrix_rows(dirac_conductance(s), ev, columns_only=True)
        elif obs == "noise":
            _matrix_rows(dirac_noise_zero_freq(s, settings=q), ev, symmetric=True)
        elif obs in ("charge_density", "energy_density"):
            rho, eps = dirac_densities(s)
            res = rho if obs == "charge_density" else eps
            for x in cfg.x:
                for i, v in enumerate(res.values):
                    ev.rows.append(Row(obs, i + 1, x=x, value=v, osc=0.0, residual=0.0, units=res.units))


# -- output --------------------------------------------------------------------

def _metadata(cfg: RunConfig, command: str, bound: str, notes) -> list[str]:
    q = cfg.quadrature
    lines = [
        f"starjunction {__version__}",
        f"command: {command}",
        f"config_sha256: {config_digest(cfg.document)}",
        f"dynamics: {cfg.dynamics}; statistics: {cfg.statistics.value}",
        f"quadrature: rel_tol={q.rel_tol:g} abs_tol={q.abs_tol:g} max_subdivisions={q.max_subdivisions}",
        f"bound_state_free: {bound}",
        f"override_bound_states: {'true' if cfg.override_bound_states else 'false'}",
        "units: hbar = k_B = 1; temperatures are energies; x is an inverse momentum",
    ]
    lines.extend(f"note: {n}" for n in notes)
    return ["# " + line for line in lines]


def render(meta: list[str], header, rows) -> str:
    buf = io.StringIO()
    for line in meta:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def run_point(cfg: RunConfig) -> tuple[str, int, Evaluation]:
    if cfg.sweep is not None:
        raise ConfigError(["sweep: the point command does not take a sweep table (use the sweep command)"])
    ev = evaluate(cfg)
    rows = [(r.observable, r.i, r.j, r.x, r.value, r.osc, r.eq, r.neq, r.residual, r.converged, r.units)
            for r in ev.rows]
    meta = _metadata(cfg, "point", "true" if ev.bound_state_free else "false", ev.notes)
    meta.extend(f"# invariant violation: {v}" for v in ev.violations)
    code = EXIT_INVARIANT if ev.violations else (EXIT_OK if ev.converged else EXIT_NUMERIC)
    return render(meta, POINT_COLUMNS, rows), code, ev


def _sweep_point(args):
    doc, override, rel_tol, names, values = args
    for name, v in zip(names, values):
        doc = apply_assignment(doc, name, v)
    try:
        cfg = parse_config(doc, override, rel_tol)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ev = evaluate(cfg)
    except ConfigError as exc:
        return None, "config: " + "; ".join(exc.errors), EXIT_CONFIG
    except (BoundStateError, QuadratureError, ArithmeticError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}", EXIT_NUMERIC
    return ev, "", EXIT_OK


def _sweep_columns(rows: list[Row]) -> list[str]:
    cols = []
    for r in rows:
        k = r.key()
        cols.append(k)
        if r.osc is not None and r.eq is not None:
            cols.extend([f"{k}_osc", f"{k}_eq", f"{k}_neq"])
    return cols


def _sweep_values(rows: list[Row]) -> dict:
    out = {}
    for r in rows:
        k = r.key()
        out[k] = r.value
        if r.osc is not None and r.eq is not None:
            out[f"{k}_osc"], out[f"{k}_eq"], out[f"{k}_neq"] = r.osc, r.eq, r.neq
    return out


def run_sweep(cfg: RunConfig, workers: int | None = None, override=None, rel_tol=None):
    """Evaluate the sweep grid row-major; returns ``(text, exit_code, table)``."""
    if cfg.sweep is None:
        raise ConfigError(["sweep: missing sweep table"])
    names = [a.parameter for a in cfg.sweep.axes]
    if any(o in ("charge_density", "energy_density") for o in cfg.observables) and "x" not in names \
            and len(cfg.x) != 1:
        raise ConfigError(["x: density sweeps need a single x value or an x axis"])
    grid = cfg.sweep.grid()
    doc = cfg.document
    base = _try_evaluate(cfg)
    jobs = [(doc, override, rel_tol, names, pt) for pt in grid]
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_sweep_point(j) for j in jobs]
    template = base.rows if base is not None else next((r[0].rows for r in results if r[0] is not None), [])
    comp = _sweep_columns(template)
    header = names + comp + ["converged", "error"]
    table = []
    code = EXIT_OK
    bounds = set()
    notes = []
    for pt, (ev, err, c) in zip(grid, results):
        if ev is None:
            table.append(list(pt) + [None] * len(comp) + [False, err])
            code = max(code, c)
            continue
        vals = _sweep_values(ev.rows)
        bounds.add(ev.bound_state_free)
        notes.extend(ev.notes)
        if ev.violations:
            code = EXIT_INVARIANT
            err = "; ".join(ev.violations)
        elif not ev.converged:
            code = max(code, EXIT_NUMERIC)
        table.append(list(pt) + [vals.get(k) for k in comp] + [ev.converged, err])
    bound = "mixed" if len(bounds) > 1 else ("false" if bounds == {False} else "true")
    meta = _metadata(cfg, "sweep", bound, list(dict.fromkeys(notes)))
    meta.append("# sweep axes: " + "; ".join(
        f"{a.parameter} {a.spacing} [{a.min:g}, {a.max:g}] x {a.points}" for a in cfg.sweep.axes))
    meta.append("# rows: row-major over the axes, last axis fastest")
    return render(meta, header, table), code, (header, table)


def _try_evaluate(cfg):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return evaluate(cfg)
    except Exception:
        return None


# -- property checks -------------------------------------------------------------

def run_checks(cfg: RunConfig) -> tuple[list[tuple[bool, str]], int]:
    """Property suite for one configuration; returns ``(results, exit_code)``."""
    out: list[tuple[bool, str]] = []
    sysm = build_system(cfg)
    q = cfg.quadrature

    def record(name, ok, detail=""):
        out.append((bool(ok), f"{name}" + (f" ({detail})" if detail else "")))

    if isinstance(sysm, SchrodingerSystem):
        ks = np.geomspace(0.01, 100, 41)
        S, Sm = sysm.smatrix(ks), sysm.smatrix(-ks)
        eye = np.eye(sysm.n)
        u = np.max(np.abs(S @ np.conj(np.swapaxes(S, -1, -2)) - eye))
        h = np.max(np.abs(np.conj(np.swapaxes(S, -1, -2)) - Sm))
        record("S-matrix unitarity", u <= 1e-10, f"{u:.2e}")
        record("S-matrix hermitian analyticity", h <= 1e-10, f"{h:.2e}")
    ev = evaluate(cfg, sysm)
    record("quadrature converged", ev.converged)
    record("Kirchhoff, symmetry and density identities", not ev.violations, "; ".join(ev.violations))
    noise = [r for r in ev.rows if r.observable == "noise" and r.i == r.j]
    fermi = isinstance(sysm, DiracSystem) or sysm.bank.statistics is Statistics.FERMI
    if noise and fermi:
        worst = min(r.value for r in noise)
        record("Fermi noise diagonal non-negative", worst >= -1e-12, f"min {worst:.3e}")

    # gauge invariance with fixed pseudo-random phases
    rng = np.random.default_rng(12345)
    phases = tuple(float(v) for v in rng.uniform(-math.pi, math.pi, cfg.n))
    g = replace(cfg, gauge=phases)
    ev2 = evaluate(g)
    a = np.array([r.value for r in ev.rows])
    b = np.array([r.value for r in ev2.rows])
    scale = max(float(np.max(np.abs(a))) if a.size else 0.0, 1e-300)
    dev = float(np.max(np.abs(a - b))) / scale if a.size else 0.0
    record("gauge invariance", dev <= 1e-12, f"{dev:.2e} relative")

    if isinstance(sysm, SchrodingerSystem) and sysm.is_critical:
        U = sysm.critical_U()
        pairs = [("current", steady_current), ("heat_current", heat_current)]
        for name, fn in pairs:
            if name == "heat_current" and not fermi:
                continue
            c, qv = fn(sysm, "closed").values, fn(sysm, "quadrature", q).values
            dev = np.max(np.abs(c - qv)) / max(np.max(np.abs(c)), 1e-300)
            record(f"critical {name}: closed form vs quadrature", dev <= 1e-6 or np.max(np.abs(c)) < 1e-14,
                   f"{dev:.2e}")
        betas = sysm.bank.beta
        if len(set(betas)) == 1 and math.isfinite(betas[0]):
            c = noise_critical_closed_form(U, sysm.bank, sysm.e).values
            qv = noise_zero_freq(sysm, settings=q).values
            dev = np.max(np.abs(c - qv)) / max(np.max(np.abs(c)), 1e-300)
            record("critical noise: closed form vs quadrature", dev <= 1e-6, f"{dev:.2e}")
        if fermi and all(math.isfinite(b) for b in betas):
            sb = stefan_boltzmann_critical(U, sysm.bank, sysm.m)
            ok_bs = sysm.bound_state_free or sysm.override_bound_states
            if ok_bs:
                qv = np.array([energy_density_profile(sysm, i, 1.0, q).stefan_boltzmann for i in range(sysm.n)])
                dev = np.max(np.abs(sb - qv)) / np.max(np.abs(sb))
                record("critical Stefan-Boltzmann: closed form vs quadrature", dev <= 1e-6, f"{dev:.2e}")
    if isinstance(sysm, DiracSystem) and len(set(sysm.bank.beta)) == 1:
        c = dirac_noise_zero_freq(sysm, "closed").values
        qv = dirac_noise_zero_freq(sysm, "quadrature", q).values
        dev = np.max(np.abs(c - qv)) / max(np.max(np.abs(c)), 1e-300)
        record("Dirac noise: closed form vs quadrature", dev <= 1e-6, f"{dev:.2e}")
    code = EXIT_OK if all(ok for ok, _ in out) else EXIT_INVARIANT
    return out, code


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="starjunction",
                                description="Steady-state transport observables of quantum wire junctions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("point", "evaluate the observables of one configuration"),
                        ("sweep", "evaluate a 1- or 2-axis parameter grid"),
                        ("check", "run the property suite on a configuration")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="TOML or JSON configuration file")
        sp.add_argument("--out", help="output path (default: standard output)")
        sp.add_argument("--override-bound-states", action="store_true",
                        help="allow density observables for couplings with bound states")
        sp.add_argument("--tol", type=float, help="relative quadrature tolerance")
        if name == "sweep":
            sp.add_argument("--workers", type=int, default=None,
                            help="worker processes (default: available CPUs)")
    return p


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_document(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    override = True if args.override_bound_states else None
    try:
        cfg = parse_config(doc, override, args.tol)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    warnings.simplefilter("ignore")
    try:
        if args.command == "point":
            text, code, _ = run_point(cfg)
        elif args.command == "sweep":
            if args.workers is not None and args.workers < 1:
                print("error: --workers must be >= 1", file=sys.stderr)
                return EXIT_CONFIG
            text, code, _ = run_sweep(cfg, args.workers, override, args.tol)
        else:
            results, code = run_checks(cfg)
            text = "".join(f"{'PASS' if ok else 'FAIL'} {msg}\n" for ok, msg in results)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BoundStateError as exc:
        print(f"config error: {exc} (use --override-bound-states)", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(text, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
