"""Run configuration: parsing, validation and construction of junction systems.

A configuration is a TOML or JSON document.  Complex entries are written as
``[re, im]`` pairs (plain numbers are accepted for real entries).  Lead
indices in parameter paths are 1-based, e.g. ``reservoirs.2.mu``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .numerics import QuadratureSettings
from .reservoirs import DiracReservoirBank, ReservoirBank, ReservoirError, Statistics
from .scattering import (
    CriticalCoupling,
    GaugePhases,
    TwoLeadParams,
    UnitarityError,
    UnitaryMatrix,
    VertexCoupling,
)

__all__ = [
    "ConfigError",
    "CouplingSpec",
    "ReservoirSpec",
    "SweepAxis",
    "SweepPlan",
    "RunConfig",
    "load_document",
    "parse_config",
    "build_system",
    "apply_assignment",
    "config_digest",
    "SCHRODINGER_OBSERVABLES",
    "DIRAC_OBSERVABLES",
]

SCHRODINGER_OBSERVABLES = (
    "current", "conductance", "heat_current", "noise",
    "charge_density", "energy_density", "thermal_noise_two_lead",
)
DIRAC_OBSERVABLES = ("current", "conductance", "heat_current", "noise", "charge_density", "energy_density")

_TOP_KEYS = {"dynamics", "statistics", "m", "e", "lambda", "coupling", "reservoirs", "gauge",
             "quadrature", "observables", "x", "sweep", "override_bound_states"}
_COUPLING_KEYS = {"kind", "U", "eta1", "eta2", "theta", "phi"}
_RESERVOIR_KEYS = {"beta", "temperature", "mu", "mu_tilde"}
_QUAD_KEYS = {"rel_tol", "abs_tol", "max_subdivisions"}
_SWEEP_KEYS = {"axes"}
_AXIS_KEYS = {"parameter", "min", "max", "points", "spacing"}


class ConfigError(ValueError):
    """All validation failures of one document."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    kind: str                       # "vertex", "critical" or "two_lead"
    U: np.ndarray | None = None
    eta1: float = 0.0
    eta2: float = 0.0
    theta: float = 0.0
    phi: float = 0.0


@dataclass(frozen=True)
class ReservoirSpec:
    beta: float                     # math.inf for zero temperature
    mu: float
    mu_tilde: float = 0.0


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    min: float
    max: float
    points: int
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class SweepPlan:
    axes: tuple[SweepAxis, ...]

    def grid(self) -> list[tuple[float, ...]]:
        """Row-major list of grid points (last axis fastest)."""
        vals = [a.values() for a in self.axes]
        if len(vals) == 1:
            return [(float(v),) for v in vals[0]]
        return [(float(u), float(v)) for u in vals[0] for v in vals[1]]


@dataclass(frozen=True, eq=False)
class RunConfig:
    dynamics: str
    statistics: Statistics
    m: float
    e: float
    lam: float
    coupling: CouplingSpec
    reservoirs: tuple[ReservoirSpec, ...]
    gauge: tuple[float, ...] | None
    quadrature: QuadratureSettings
    observables: tuple[str, ...]
    x: tuple[float, ...]
    sweep: SweepPlan | None
    override_bound_states: bool
    document: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.reservoirs)


def load_document(path: str | Path) -> dict:
    """Read a TOML or JSON file into a plain dict."""
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".json":
        return json.loads(text)
    if p.suffix.lower() == ".toml":
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return tomllib.loads(text)


def config_digest(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def add(self, path, msg):
        self.errors.append(f"{path}: {msg}" if path else msg)

    def unknown(self, d, allowed, path):
        for k in d:
            if k not in allowed:
                self.add(f"{path}.{k}" if path else k, "unknown key")

    def number(self, d, key, path, default=None, required=False, positive=False):
        where = f"{path}.{key}" if path else key
        if key not in d:
            if required:
                self.add(where, "missing required key")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.add(where, f"expected a number, got {v!r}")
            return default
        v = float(v)
        if not math.isfinite(v):
            self.add(where, "must be finite")
            return default
        if positive and v <= 0:
            self.add(where, f"must be > 0, got {v:g}")
            return default
        return v


def _complex_entry(v):
    if isinstance(v, bool):
        raise ValueError
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in v
    ):
        return complex(float(v[0]), float(v[1]))
    raise ValueError


def _parse_matrix(raw, path, col: _Collector):
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        col.add(path, "expected a list of rows")
        return None
    n = len(raw)
    out = np.zeros((n, n), dtype=complex)
    ok = True
    for i, row in enumerate(raw):
        if len(row) != n:
            col.add(f"{path}.{i + 1}", f"row has {len(row)} entries, expected {n}")
            ok = False
            continue
        for j, v in enumerate(row):
            try:
                out[i, j] = _complex_entry(v)
            except ValueError:
                col.add(f"{path}.{i + 1}.{j + 1}", f"expected a number or [re, im] pair, got {v!r}")
                ok = False
    return out if ok else None


def _parse_beta(r, path, col):
    has_b, has_t = "beta" in r, "temperature" in r
    if has_b and has_t:
        col.add(path, "give either beta or temperature, not both")
        return None
    if not (has_b or has_t):
        col.add(f"{path}.beta", "missing required key (or give temperature)")
        return None
    key = "beta" if has_b else "temperature"
    v = r[key]
    if isinstance(v, str):
        if v.lower() in ("zero-temperature", "zero_temperature", "inf", "infinity"):
            return math.inf
        col.add(f"{path}.{key}", f"expected a number or 'zero-temperature', got {v!r}")
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v):
        col.add(f"{path}.{key}", f"expected a number, got {v!r}")
        return None
    v = float(v)
    if has_b:
        if v <= 0:
            col.add(f"{path}.beta", f"must be > 0, got {v:g}")
            return None
        return v
    if v < 0:
        col.add(f"{path}.temperature", f"must be >= 0, got {v:g}")
        return None
    return math.inf if v == 0 else 1.0 / v


def parse_config(doc: dict, override_bound_states: bool | None = None,
                 rel_tol: float | None = None) -> RunConfig:
    """Validate ``doc`` and return a :class:`RunConfig`; raises :class:`ConfigError` listing every problem."""
    col = _Collector()
    if not isinstance(doc, dict):
        raise ConfigError(["document must be a table/object"])
    col.unknown(doc, _TOP_KEYS, "")

    dynamics = doc.get("dynamics", "schrodinger")
    if dynamics not in ("schrodinger", "dirac"):
        col.add("dynamics", f"must be 'schrodinger' or 'dirac', got {dynamics!r}")
        dynamics = "schrodinger"
    stats_raw = doc.get("statistics", "fermi")
    try:
        statistics = Statistics(stats_raw)
    except ValueError:
        col.add("statistics", f"must be 'fermi' or 'bose', got {stats_raw!r}")
        statistics = Statistics.FERMI
    if dynamics == "dirac" and statistics is not Statistics.FERMI:
        col.add("statistics", "Dirac junctions use Fermi statistics only")
    m = col.number(doc, "m", "", default=1.0, positive=True)
    e = col.number(doc, "e", "", default=1.0)
    lam = col.number(doc, "lambda", "", default=1.0)

    # coupling
    coupling = None
    craw = doc.get("coupling")
    if not isinstance(craw, dict):
        col.add("coupling", "missing required table")
    else:
        col.unknown(craw, _COUPLING_KEYS, "coupling")
        kind = craw.get("kind")
        if kind not in ("vertex", "critical", "two_lead"):
            col.add("coupling.kind", f"must be 'vertex', 'critical' or 'two_lead', got {kind!r}")
        elif kind == "two_lead":
            if dynamics == "dirac":
                col.add("coupling.kind", "Dirac junctions take an explicit U ('vertex' or 'critical')")
            for k in ("U",):
                if k in craw:
                    col.add(f"coupling.{k}", "not used by the two_lead coupling")
            vals = {k: col.number(craw, k, "coupling", default=0.0, required=k != "phi")
                    for k in ("eta1", "eta2", "theta", "phi")}
            coupling = CouplingSpec("two_lead", None, **vals)
        else:
            for k in ("eta1", "eta2", "theta", "phi"):
                if k in craw:
                    col.add(f"coupling.{k}", f"only used by the two_lead coupling, not {kind!r}")
            if "U" not in craw:
                col.add("coupling.U", "missing required key")
            else:
                U = _parse_matrix(craw["U"], "coupling.U", col)
                if U is not None:
                    um = UnitaryMatrix.from_entries(U)
                    try:
                        um.require_unitary()
                        coupling = CouplingSpec(kind, U)
                    except UnitarityError as exc:
                        col.add("coupling.U", str(exc))
            if kind == "vertex" and dynamics == "schrodinger" and "lambda" not in doc:
                col.add("lambda", "missing required key for a vertex coupling")

    # reservoirs
    reservoirs = []
    rraw = doc.get("reservoirs")
    if not isinstance(rraw, list) or not rraw:
        col.add("reservoirs", "missing required list of reservoir tables")
        rraw = []
    for idx, r in enumerate(rraw):
        path = f"reservoirs.{idx + 1}"
        if not isinstance(r, dict):
            col.add(path, "expected a table")
            continue
        col.unknown(r, _RESERVOIR_KEYS, path)
        beta = _parse_beta(r, path, col)
        mu = col.number(r, "mu", path, required=True)
        mt = col.number(r, "mu_tilde", path, default=None)
        if dynamics == "dirac" and mt is None and "mu_tilde" not in r:
            col.add(f"{path}.mu_tilde", "missing required key for Dirac dynamics")
        if dynamics == "schrodinger" and "mu_tilde" in r:
            col.add(f"{path}.mu_tilde", "only used by Dirac dynamics")
        if statistics is Statistics.BOSE and mu is not None and mu >= 0:
            col.add(f"{path}.mu", f"Bose statistics needs mu < 0 strictly, got {mu:g}")
        if statistics is Statistics.BOSE and beta is not None and math.isinf(beta):
            col.add(path, "zero temperature is not supported for Bose statistics")
        if beta is not None and mu is not None:
            reservoirs.append(ReservoirSpec(beta, mu, mt if mt is not None else 0.0))

    n = len(rraw)
    if coupling is not None and n:
        cn = 2 if coupling.kind == "two_lead" else coupling.U.shape[0]
        if cn != n:
            col.add("reservoirs", f"{n} reservoirs given but the coupling has {cn} leads")

    gauge = None
    if "gauge" in doc:
        g = doc["gauge"]
        if not isinstance(g, list) or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in g):
            col.add("gauge", "expected a list of real phases")
        elif len(g) != n:
            col.add("gauge", f"{len(g)} phases given for {n} leads")
        else:
            gauge = tuple(float(t) for t in g)

    qraw = doc.get("quadrature", {})
    quad = QuadratureSettings()
    if not isinstance(qraw, dict):
        col.add("quadrature", "expected a table")
    else:
        col.unknown(qraw, _QUAD_KEYS, "quadrature")
        rt = col.number(qraw, "rel_tol", "quadrature", default=quad.rel_tol, positive=True)
        at = col.number(qraw, "abs_tol", "quadrature", default=quad.abs_tol, positive=True)
        ms = qraw.get("max_subdivisions", quad.max_subdivisions)
        if isinstance(ms, bool) or not isinstance(ms, int) or ms < 0:
            col.add("quadrature.max_subdivisions", f"expected a non-negative integer, got {ms!r}")
            ms = quad.max_subdivisions
        if rel_tol is not None:
            if not rel_tol > 0:
                col.add("--tol", "must be > 0")
            else:
                rt = rel_tol
        quad = QuadratureSettings(rt, at, ms)

    allowed = SCHRODINGER_OBSERVABLES if dynamics == "schrodinger" else DIRAC_OBSERVABLES
    obs = doc.get("observables", ["current"])
    if isinstance(obs, str):
        obs = [obs]
    if not isinstance(obs, list) or not obs:
        col.add("observables", "expected a non-empty list")
        obs = []
    for k, o in enumerate(obs):
        if o not in allowed:
            col.add(f"observables.{k + 1}", f"unknown observable {o!r} for {dynamics}; choose from {', '.join(allowed)}")
    if len(set(obs)) != len(obs):
        col.add("observables", "duplicate entries")

    xs = doc.get("x", [1.0])
    if isinstance(xs, (int, float)) and not isinstance(xs, bool):
        xs = [xs]
    if not isinstance(xs, list) or not xs:
        col.add("x", "expected a positive number or list of positive numbers")
        xs = []
    for k, v in enumerate(xs):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not (v > 0 and math.isfinite(v)):
            col.add(f"x.{k + 1}", f"must be a positive number, got {v!r}")

    if "thermal_noise_two_lead" in obs and coupling is not None:
        if coupling.kind != "two_lead" or coupling.eta2 != 0:
            col.add("observables", "thermal_noise_two_lead needs a two_lead coupling with eta2 = 0")
        if reservoirs and (len({r.beta for r in reservoirs}) != 1 or any(r.mu != 0 for r in reservoirs)
                           or math.isinf(reservoirs[0].beta)):
            col.add("reservoirs", "thermal_noise_two_lead needs equal finite temperatures and mu = 0")

    sweep = None
    if "sweep" in doc:
        sweep = _parse_sweep(doc["sweep"], n, dynamics, coupling, col)

    ovr = doc.get("override_bound_states", False)
    if not isinstance(ovr, bool):
        col.add("override_bound_states", "expected true or false")
        ovr = False
    if override_bound_states is not None:
        ovr = ovr or override_bound_states

    if col.errors:
        raise ConfigError(col.errors)
    cfg = RunConfig(dynamics, statistics, m, e, lam, coupling, tuple(reservoirs), gauge, quad,
                    tuple(obs), tuple(float(v) for v in xs), sweep, ovr, copy.deepcopy(doc))
    try:
        system = build_system(cfg)
    except (ValueError, ReservoirError) as exc:
        raise ConfigError([str(exc)]) from None
    wants_density = any(o in ("charge_density", "energy_density") for o in cfg.observables)
    if cfg.dynamics == "schrodinger" and wants_density and not system.bound_state_free and not ovr:
        raise ConfigError(["coupling: has a bound state (some eta > 0); density observables need "
                           "override_bound_states (CLI flag --override-bound-states)"])
    return cfg


def _valid_path(p: str, n: int, dynamics: str, coupling) -> str | None:
    parts = p.split(".")
    if p in ("temperature", "beta", "x", "m", "e"):
        if dynamics == "dirac" and p == "m":
            return "m is not used by Dirac dynamics"
        return None
    if parts[0] == "reservoirs" and len(parts) == 3:
        if not parts[1].isdigit() or not 1 <= int(parts[1]) <= n:
            return f"lead index must be 1..{n}"
        fields = ("beta", "temperature", "mu", "mu_tilde") if dynamics == "dirac" else ("beta", "temperature", "mu")
        if parts[2] not in fields:
            return f"reservoir field must be one of {', '.join(fields)}"
        return None
    if parts[0] == "coupling" and len(parts) == 2:
        if coupling is None or coupling.kind != "two_lead":
            return "coupling parameters can only be swept for the two_lead coupling"
        if parts[1] not in ("eta1", "eta2", "theta", "phi"):
            return "coupling field must be eta1, eta2, theta or phi"
        return None
    return "unknown parameter path"


def _parse_sweep(raw, n, dynamics, coupling, col):
    if not isinstance(raw, dict):
        col.add("sweep", "expected a table")
        return None
    col.unknown(raw, _SWEEP_KEYS, "sweep")
    axes_raw = raw.get("axes")
    if not isinstance(axes_raw, list) or not 1 <= len(axes_raw) <= 2:
        col.add("sweep.axes", "expected a list of 1 or 2 axes")
        return None
    axes = []
    for k, a in enumerate(axes_raw):
        path = f"sweep.axes.{k + 1}"
        if not isinstance(a, dict):
            col.add(path, "expected a table")
            continue
        col.unknown(a, _AXIS_KEYS, path)
        param = a.get("parameter")
        if not isinstance(param, str):
            col.add(f"{path}.parameter", "missing required key")
            continue
        why = _valid_path(param, n, dynamics, coupling)
        if why:
            col.add(f"{path}.parameter", f"{param!r}: {why}")
        lo = col.number(a, "min", path, required=True)
        hi = col.number(a, "max", path, required=True)
        pts = a.get("points")
        if isinstance(pts, bool) or not isinstance(pts, int) or pts < 2:
            col.add(f"{path}.points", f"expected an integer >= 2, got {pts!r}")
            pts = None
        spacing = a.get("spacing", "linear")
        if spacing not in ("linear", "log"):
            col.add(f"{path}.spacing", f"must be 'linear' or 'log', got {spacing!r}")
        if lo is not None and hi is not None:
            if not lo < hi:
                col.add(path, f"need min < max, got {lo:g} >= {hi:g}")
            elif spacing == "log" and lo <= 0:
                col.add(f"{path}.min", "log spacing needs min > 0")
        if why is None and lo is not None and hi is not None and pts is not None:
            axes.append(SweepAxis(param, lo, hi, pts, spacing))
    names = [a.get("parameter") for a in axes_raw if isinstance(a, dict)]
    if len(set(names)) != len(names):
        col.add("sweep.axes", "the same parameter appears twice")
    return SweepPlan(tuple(axes)) if len(axes) == len(axes_raw) else None


def apply_assignment(doc: dict, path: str, value: float) -> dict:
    """Copy of ``doc`` with the parameter at ``path`` set to ``value``."""
    out = copy.deepcopy(doc)
    out.pop("sweep", None)
    parts = path.split(".")
    if path in ("temperature", "beta"):
        for r in out["reservoirs"]:
            r.pop("beta", None)
            r.pop("temperature", None)
            r[path] = value
    elif path == "x":
        out["x"] = [value]
    elif path in ("m", "e"):
        out[path] = value
    elif parts[0] == "reservoirs":
        r = out["reservoirs"][int(parts[1]) - 1]
        if parts[2] in ("beta", "temperature"):
            r.pop("beta", None)
            r.pop("temperature", None)
        r[parts[2]] = value
    elif parts[0] == "coupling":
        out["coupling"][parts[1]] = value
    else:
        raise KeyError(path)
    return out


def build_system(cfg: RunConfig):
    """Instantiate the :class:`SchrodingerSystem` or :class:`DiracSystem` described by ``cfg``."""
    from .dirac import DiracSystem
    from .schrodinger import SchrodingerSystem

    gauge = GaugePhases(cfg.gauge) if cfg.gauge is not None else None
    beta = tuple(r.beta for r in cfg.reservoirs)
    mu = tuple(r.mu for r in cfg.reservoirs)
    c = cfg.coupling
    if cfg.dynamics == "dirac":
        bank = DiracReservoirBank(beta, mu, tuple(r.mu_tilde for r in cfg.reservoirs))
        return DiracSystem(cfg.e, UnitaryMatrix.from_entries(c.U), bank, gauge)
    bank = ReservoirBank(beta, mu, cfg.statistics)
    if c.kind == "two_lead":
        coupling = TwoLeadParams(c.eta1, c.eta2, c.theta, c.phi)
    elif c.kind == "critical":
        coupling = CriticalCoupling(UnitaryMatrix.from_entries(c.U))
    else:
        coupling = VertexCoupling(UnitaryMatrix.from_entries(c.U), cfg.lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SchrodingerSystem(cfg.m, cfg.e, coupling, bank, gauge, cfg.override_bound_states)
