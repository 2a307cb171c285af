"""Steady-state observables of a Schrodinger junction (dispersion k^2/2m).

Every flow is a momentum integral of transmission probabilities weighted
by reservoir occupations.  Critical (scale invariant) couplings admit
closed forms, which double as fast paths and as oracles for the quadrature.
Units: hbar = k_B = 1, temperatures are energies, x is an inverse momentum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .numerics import (
    QuadratureResult,
    QuadratureSettings,
    exp_integral_Ia,
    integrate_semi_infinite,
    oscillation_breakpoints,
    polylog_neg_exp,
)
from .reservoirs import (
    ReservoirBank,
    Statistics,
    complement_c,
    is_zero_temperature,
    occupation_d,
)
from .scattering import (
    CriticalCoupling,
    GaugePhases,
    TwoLeadParams,
    UnitaryMatrix,
    VertexCoupling,
    smatrix,
)

__all__ = [
    "BoundStateError",
    "SchrodingerSystem",
    "LeadVector",
    "LeadMatrix",
    "DensityProfile",
    "EnergyProfile",
    "ThermalNoiseBounds",
    "steady_current",
    "steady_current_limits",
    "conductance",
    "charge_density_profile",
    "energy_density_profile",
    "heat_current",
    "noise_zero_freq",
    "noise_critical_closed_form",
    "shot_noise",
    "johnson_nyquist",
    "critical_current_closed_form",
    "critical_heat_closed_form",
    "stefan_boltzmann_critical",
    "friedel_critical_zero_temperature",
    "thermal_noise_bounds_two_lead",
    "pair_kernel",
    "KIRCHHOFF_REL_TOL",
    "KIRCHHOFF_ABS_FLOOR",
]

KIRCHHOFF_REL_TOL = 1e-9
KIRCHHOFF_ABS_FLOOR = 1e-14

BOUND_STATE_FLOW_NOTE = "coupling has bound states; flows do not depend on them"
BOUND_STATE_DENSITY_NOTE = "WARNING: bound-state override active; bound-state density contributions are omitted"


class BoundStateError(ValueError):
    pass


def _within(residual: float, scale: float) -> bool:
    return residual <= max(KIRCHHOFF_REL_TOL * scale, KIRCHHOFF_ABS_FLOOR)


@dataclass(frozen=True, eq=False)
class LeadVector:
    """One value per lead."""

    values: np.ndarray
    observable: str
    units: str = ""
    notes: tuple[str, ...] = ()
    converged: bool = True
    error_estimate: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def kirchhoff_residual(self) -> float:
        return abs(float(np.sum(self.values)))

    def kirchhoff_ok(self) -> bool:
        return _within(self.kirchhoff_residual, float(np.max(np.abs(self.values))))

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True, eq=False)
class LeadMatrix:
    """Pairwise values, indexed ``[i, j]``."""

    values: np.ndarray
    observable: str
    units: str = ""
    notes: tuple[str, ...] = ()
    converged: bool = True
    error_estimate: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"LeadMatrix needs a square array, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def row_residuals(self) -> np.ndarray:
        return np.abs(self.values.sum(axis=1))

    @property
    def column_residuals(self) -> np.ndarray:
        return np.abs(self.values.sum(axis=0))

    @property
    def kirchhoff_residual(self) -> float:
        return float(max(self.row_residuals.max(), self.column_residuals.max()))

    def kirchhoff_ok(self, rows: bool = True) -> bool:
        scale = float(np.max(np.abs(self.values)))
        res = self.kirchhoff_residual if rows else float(self.column_residuals.max())
        return _within(res, scale)

    def __getitem__(self, ij):
        return self.values[ij]


@dataclass(frozen=True)
class DensityProfile:
    """Charge density on lead ``lead`` at distance ``x``.

    ``total = osc + homogeneous`` and ``total = eq - neq``; ``identity_residual``
    records how well the second identity holds numerically.
    """

    lead: int
    x: float
    total: float
    osc: float
    eq: float
    neq: float
    identity_residual: float
    converged: bool = True
    error_estimate: float = 0.0
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class EnergyProfile:
    """Energy density on lead ``lead`` at ``x``; ``stefan_boltzmann`` is the x-independent part."""

    lead: int
    x: float
    total: float
    osc: float
    stefan_boltzmann: float
    eq: float
    neq: float
    identity_residual: float
    converged: bool = True
    error_estimate: float = 0.0
    notes: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class SchrodingerSystem:
    m: float
    e: float
    coupling: VertexCoupling | TwoLeadParams | CriticalCoupling
    bank: ReservoirBank
    gauge: GaugePhases | None = None
    override_bound_states: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m > 0):
            raise ValueError(f"mass must be positive, got {self.m}")
        if not math.isfinite(self.e):
            raise ValueError("charge must be finite")
        if not isinstance(self.coupling, (VertexCoupling, TwoLeadParams, CriticalCoupling)):
            raise TypeError(f"unsupported coupling type {type(self.coupling).__name__}")
        if self.coupling.n != self.bank.n:
            raise ValueError(f"coupling has {self.coupling.n} leads but {self.bank.n} reservoirs were given")
        if self.gauge is not None and self.gauge.n != self.bank.n:
            raise ValueError(f"gauge has {self.gauge.n} phases for {self.bank.n} leads")
        self.bank.check_schrodinger()

    @property
    def n(self) -> int:
        return self.bank.n

    @property
    def bound_state_free(self) -> bool:
        return bool(self.coupling.bound_state_free)

    @property
    def is_critical(self) -> bool:
        return bool(self.coupling.is_critical)

    def critical_U(self) -> np.ndarray:
        """``S(k > 0)`` of a critical coupling, gauge dressed."""
        if not self.is_critical:
            raise ValueError("coupling is not critical")
        U = np.asarray(self.coupling.critical_U)
        if self.gauge is not None:
            U = U * self.gauge.factors(self.e)
        return U

    def smatrix(self, k) -> np.ndarray:
        s = smatrix(self.coupling, k)
        if self.gauge is not None:
            s = s * self.gauge.factors(self.e)
        return s

    def omega(self, k):
        return np.asarray(k) ** 2 / (2.0 * self.m)

    def occupations(self, k) -> tuple[np.ndarray, np.ndarray]:
        """``d_j(k)`` and ``c_j(k)`` as ``(len(k), n)`` arrays."""
        w = self.omega(k)
        d = np.stack([occupation_d(self.bank, j, w) for j in range(self.n)], axis=-1)
        c = np.stack([complement_c(self.bank, j, w) for j in range(self.n)], axis=-1)
        return d, c

    def flow_notes(self) -> tuple[str, ...]:
        return () if self.bound_state_free else (BOUND_STATE_FLOW_NOTE,)

    def density_notes(self) -> tuple[str, ...]:
        if self.bound_state_free:
            return ()
        if not self.override_bound_states:
            raise BoundStateError(
                "coupling has a bound state (some eta > 0); density observables need override_bound_states=True"
            )
        return (BOUND_STATE_DENSITY_NOTE,)


# -- integration plan ---------------------------------------------------------

def _fermi_at_zero_t(bank, j):
    return bank.statistics is Statistics.FERMI and is_zero_temperature(bank.beta[j], bank.mu[j])


def _k_of(m, w):
    return math.sqrt(2.0 * m * w)


def _plan(sys: SchrodingerSystem, extra=()):
    """Breakpoints (Fermi edges, coupling scales) and the tail decay length."""
    m, bank = sys.m, sys.bank
    bps = set(float(x) for x in extra if x > 0)
    rates = []
    for j, (b, mu) in enumerate(zip(bank.beta, bank.mu)):
        if _fermi_at_zero_t(bank, j):
            if mu > 0:
                bps.add(_k_of(m, mu))
            continue
        if bank.statistics is Statistics.FERMI:
            for c in (-32.0, -8.0, -2.0, 0.0, 2.0, 8.0, 32.0):
                w = mu + c / b
                if w > 0:
                    bps.add(_k_of(m, w))
        else:
            for c in (2.0, 8.0, 32.0):
                bps.add(_k_of(m, c / b))
        rates.append(b)
    bps.update(sys.coupling.momentum_scales())
    k0 = max(bps) if bps else 0.0
    if rates:
        scale = max(1.0 / max(b * k0 / m, math.sqrt(b / (2.0 * m))) for b in rates)
    else:
        scale = 1.0
    return sorted(bps), scale


def _occupied_cutoff(sys, i):
    """Momentum beyond which ``d_i`` is negligible (used for oscillation splitting)."""
    b, mu = sys.bank.beta[i], sys.bank.mu[i]
    if _fermi_at_zero_t(sys.bank, i):
        return _k_of(sys.m, mu) if mu > 0 else 0.0
    if sys.bank.statistics is Statistics.FERMI:
        return _k_of(sys.m, max(mu, 0.0) + 40.0 / b)
    return _k_of(sys.m, 40.0 / b)


def _settings(settings):
    return settings if settings is not None else QuadratureSettings()


def _integrate(sys, f, settings, extra=()) -> QuadratureResult:
    bps, scale = _plan(sys, extra)
    s = _settings(settings)
    return integrate_semi_infinite(f, s, breakpoints=bps, scale=s.tail_decay_scale or scale)


def _flow_integral(sys, weight, settings):
    """``A_ij = int dk/2pi w(k) (delta_ij - |S_ij|^2) d_j``."""
    eye = np.eye(sys.n)

    def f(k):
        s = sys.smatrix(k)
        d, _ = sys.occupations(k)
        t = eye - np.abs(s) ** 2
        return (weight(k) / (2.0 * math.pi))[:, None, None] * t * d[:, None, :]

    return _integrate(sys, f, settings)


# -- closed-form building blocks -------------------------------------------------

def _fermi_g(x):
    return np.logaddexp(0.0, x)


def _fermi_g1(x):
    return expit(x)


def _fermi_g3(x):
    s = expit(x)
    return s * (1 - s) * (1 - 2 * s)


def _bose_g(x):
    return -np.log(-np.expm1(x))


def _bose_g1(x):
    return 1.0 / np.expm1(-np.asarray(x, dtype=float))


def _bose_g3(x):
    b = _bose_g1(x)
    return b * (1 + b) * (1 + 2 * b)


_KINDS = {
    Statistics.FERMI: (_fermi_g, _fermi_g1, _fermi_g3),
    Statistics.BOSE: (_bose_g, _bose_g1, _bose_g3),
}


def pair_kernel(x, y, statistics: Statistics = Statistics.FERMI):
    """``coth((x-y)/2) * (g(x) - g(y))`` with its continuous value ``2 g'(x)`` at ``x = y``.

    ``g`` is ``ln(1+e^x)`` (Fermi) or ``-ln(1-e^x)`` (Bose); ``x = beta*mu``.
    Beta times the momentum integral of ``d_l c_m + d_m c_l`` (in energy) equals this kernel.
    """
    g, g1, g3 = _KINDS[Statistics(statistics)]
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    h = x - y
    c = 0.5 * (x + y)
    small = np.abs(h) < 1e-3
    out = np.empty(x.shape)
    hs = h[small]
    out[small] = 2 * g1(c[small]) + hs * hs * (g1(c[small]) / 6 + g3(c[small]) / 12)
    hb = h[~small]
    out[~small] = (g(x[~small]) - g(y[~small])) / np.tanh(hb / 2)
    return out if out.ndim else float(out)


def _energy_log(bank: ReservoirBank, j: int) -> float:
    """``int_0^inf d_j(w) dw``: ``ln(1 + e^{b mu})/b`` for Fermi, ``-ln(1 - e^{b mu})/b`` for Bose."""
    b, mu = bank.beta[j], bank.mu[j]
    if math.isinf(b):
        return max(mu, 0.0)
    g = _fermi_g if bank.statistics is Statistics.FERMI else _bose_g
    return float(g(b * mu)) / b


def _transfer(U) -> np.ndarray:
    U = U.entries if isinstance(U, UnitaryMatrix) else np.asarray(U)
    return np.eye(U.shape[0]) - np.abs(U) ** 2


def critical_current_closed_form(U, bank: ReservoirBank, e: float = 1.0) -> np.ndarray:
    """``J_i = (e/2pi) sum_j (delta_ij - |U_ij|^2) int d_j dw``."""
    g = np.array([_energy_log(bank, j) for j in range(bank.n)])
    return e / (2 * math.pi) * _transfer(U) @ g


def critical_heat_closed_form(U, bank: ReservoirBank) -> np.ndarray:
    """Fermi heat current at criticality, via ``-Li_2(-e^{b mu})/b^2`` per lead."""
    if bank.statistics is not Statistics.FERMI:
        raise ValueError("the dilogarithm closed form covers Fermi statistics only")
    h = np.empty(bank.n)
    for j, (b, mu) in enumerate(zip(bank.beta, bank.mu)):
        h[j] = 0.5 * max(mu, 0.0) ** 2 if math.isinf(b) else -polylog_neg_exp(2.0, b * mu) / b**2
    return _transfer(U) @ h / (2 * math.pi)


def stefan_boltzmann_critical(U, bank: ReservoirBank, m: float) -> np.ndarray:
    """x-independent energy density at criticality.

    ``eps_i = -(1/8) sqrt(m/2pi) sum_j (delta_ij + |U_ij|^2) b_j^{-3/2} Li_{3/2}(-e^{b_j mu_j})``,
    with ``k_F^3/(24 pi m)`` per lead at zero temperature.
    """
    if bank.statistics is not Statistics.FERMI:
        raise ValueError("the polylogarithm closed form covers Fermi statistics only")
    U = U.entries if isinstance(U, UnitaryMatrix) else np.asarray(U)
    w = np.eye(bank.n) + np.abs(U) ** 2
    h = np.empty(bank.n)
    for j, (b, mu) in enumerate(zip(bank.beta, bank.mu)):
        if math.isinf(b):
            h[j] = _k_of(m, max(mu, 0.0)) ** 3 / (24 * math.pi * m)
        else:
            h[j] = -0.125 * math.sqrt(m / (2 * math.pi)) * b**-1.5 * polylog_neg_exp(1.5, b * mu)
    return w @ h


def friedel_critical_zero_temperature(u_ii: complex, e: float, m: float, mu: float, x) -> np.ndarray:
    """Oscillating charge density at zero temperature for a critical vertex with real ``U_ii``.

    Integrating ``2 U_ii cos(2kx)/2pi`` up to ``k_F = sqrt(2 m mu)`` gives
    ``e U_ii sin(2 x k_F) / (2 pi x)``.
    """
    u = complex(u_ii)
    if abs(u.imag) > 1e-12:
        raise ValueError("closed form requires a real diagonal entry U_ii")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    kf = _k_of(m, max(mu, 0.0))
    return e * u.real * np.sin(2 * x * kf) / (2 * math.pi * x)


# -- flow observables ----------------------------------------------------------

def _pick_method(method, sys, closed_ok=True):
    if method not in ("auto", "quadrature", "closed"):
        raise ValueError(f"method must be auto, quadrature or closed, got {method!r}")
    if method == "closed":
        if not sys.is_critical:
            raise ValueError("closed form needs a critical coupling")
        if not closed_ok:
            raise ValueError("no closed form for this statistics")
        return "closed"
    if method == "auto" and sys.is_critical and closed_ok:
        return "closed"
    return "quadrature"


def steady_current(sys: SchrodingerSystem, method: str = "auto",
                   settings: QuadratureSettings | None = None) -> LeadVector:
    """Electric current into each lead."""
    notes = sys.flow_notes()
    if _pick_method(method, sys) == "closed":
        J = critical_current_closed_form(sys.critical_U(), sys.bank, sys.e)
        return LeadVector(J, "current", "charge/time", notes + ("closed form",))
    res = _flow_integral(sys, lambda k: k, settings)
    J = sys.e / sys.m * res.value.sum(axis=1)
    return LeadVector(J, "current", "charge/time", notes, res.converged,
                      abs(sys.e) / sys.m * res.error_estimate)


def steady_current_limits(U, mu, e: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Critical current at ``beta -> 0`` and ``beta -> inf``, returned in that order.

    The high-temperature limit is ``(e/4pi) sum_j (delta_ij - |U_ij|^2) mu_j``
    and the zero-temperature limit has ``1/2pi`` in front, so their ratio is 1/2.
    """
    t = _transfer(U) @ np.asarray(mu, dtype=float)
    return e / (4 * math.pi) * t, e / (2 * math.pi) * t


def conductance(sys: SchrodingerSystem, method: str = "auto",
                settings: QuadratureSettings | None = None) -> LeadMatrix:
    """``G_ij`` with the voltage convention ``V_j = mu_j / e``."""
    mu = np.array(sys.bank.mu)
    if np.any(mu == 0):
        j = int(np.flatnonzero(mu == 0)[0])
        raise ValueError(f"conductance needs mu_j != 0 (V_j = mu_j/e); lead {j + 1} has mu = 0")
    notes = sys.flow_notes()
    if _pick_method(method, sys) == "closed":
        g = np.array([_energy_log(sys.bank, j) for j in range(sys.n)])
        G = sys.e**2 / (2 * math.pi) * _transfer(sys.critical_U()) * (g / mu)[None, :]
        return LeadMatrix(G, "conductance", "charge^2", notes + ("closed form",))
    res = _flow_integral(sys, lambda k: k, settings)
    G = sys.e**2 / sys.m * res.value / mu[None, :]
    return LeadMatrix(G, "conductance", "charge^2", notes, res.converged,
                      sys.e**2 / sys.m * res.error_estimate / float(np.min(np.abs(mu))))


def heat_current(sys: SchrodingerSystem, method: str = "auto",
                 settings: QuadratureSettings | None = None) -> LeadVector:
    """Energy current into each lead."""
    notes = sys.flow_notes()
    fermi = sys.bank.statistics is Statistics.FERMI
    if _pick_method(method, sys, closed_ok=fermi) == "closed":
        T = critical_heat_closed_form(sys.critical_U(), sys.bank)
        return LeadVector(T, "heat_current", "energy/time", notes + ("closed form",))
    res = _flow_integral(sys, lambda k: k * sys.omega(k), settings)
    T = res.value.sum(axis=1) / sys.m
    return LeadVector(T, "heat_current", "energy/time", notes, res.converged, res.error_estimate / sys.m)


# -- densities -----------------------------------------------------------------

def _density_integral(sys, i, x, weight, settings):
    """Components ``[osc, d_i, sum_j |S_ij|^2 d_j, neq]`` weighted by ``w(k)/2pi``."""
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"x must be positive (the vertex itself is excluded), got {x}")
    if not 0 <= i < sys.n:
        raise IndexError(f"lead index {i} out of range for {sys.n} leads")
    eye = np.eye(sys.n)[i]

    def f(k):
        s = sys.smatrix(k)
        d, _ = sys.occupations(k)
        w = weight(k) / (2 * math.pi)
        row = np.abs(s[:, i, :]) ** 2
        osc = 2.0 * np.real(s[:, i, i] * np.exp(-2j * k * x)) * d[:, i]
        trans = np.sum(row * d, axis=1)
        neq = np.sum((eye - row) * d, axis=1)
        return w[:, None] * np.stack([osc, d[:, i], trans, neq], axis=-1)

    extra = oscillation_breakpoints(x, _occupied_cutoff(sys, i))
    return _integrate(sys, f, settings, extra)


def charge_density_profile(sys: SchrodingerSystem, i: int, x: float,
                           settings: QuadratureSettings | None = None) -> DensityProfile:
    notes = sys.density_notes()
    res = _density_integral(sys, i, x, lambda k: np.ones_like(k), settings)
    osc, di, trans, neq = sys.e * res.value
    total = osc + di + trans
    eq = osc + 2 * di
    resid = abs(total + neq - eq)
    return DensityProfile(i, float(x), total, osc, eq, neq, resid, res.converged,
                          abs(sys.e) * res.error_estimate, notes)


def energy_density_profile(sys: SchrodingerSystem, i: int, x: float,
                           settings: QuadratureSettings | None = None) -> EnergyProfile:
    notes = sys.density_notes()
    res = _density_integral(sys, i, x, lambda k: 0.5 * sys.omega(k), settings)
    osc, di, trans, neq = res.value
    sb = di + trans
    total = osc + sb
    eq = osc + 2 * di
    resid = abs(total + neq - eq)
    return EnergyProfile(i, float(x), total, osc, sb, eq, neq, resid, res.converged,
                         res.error_estimate, notes)


# -- noise ---------------------------------------------------------------------

def _noise_kernel(s, d, c, symmetric=True):
    """Bracket of the zero-frequency noise integrand, ``(K, n, n)``."""
    sh = np.conj(np.swapaxes(s, -1, -2))
    A = (s * c[:, None, :]) @ sh          # S C S^dagger
    B = (s * d[:, None, :]) @ sh          # S D S^dagger
    dc = d * c
    t = np.abs(s) ** 2
    n = s.shape[-1]
    base = (np.eye(n) * dc[:, None, :]
            - t * dc[:, None, :]
            - np.swapaxes(t, -1, -2) * dc[:, :, None])
    if symmetric:
        # A and B are hermitian, so A_ij B_ji = A_ij conj(B_ij)
        return base + np.real(A * np.conj(B))
    return base + A * np.swapaxes(B, -1, -2)


def noise_zero_freq(sys: SchrodingerSystem, form: str = "symmetric",
                    settings: QuadratureSettings | None = None) -> LeadMatrix:
    """Zero-frequency current noise ``P_ij`` by quadrature.

    ``form="symmetric"`` integrates the manifestly symmetric real kernel;
    ``form="direct"`` integrates the unsymmetrized complex kernel and checks
    that the imaginary part vanishes (used to test the two agree).
    """
    if form not in ("symmetric", "direct"):
        raise ValueError("form must be 'symmetric' or 'direct'")
    sym = form == "symmetric"

    def f(k):
        s = sys.smatrix(k)
        d, c = sys.occupations(k)
        ker = _noise_kernel(s, d, c, sym) * (k / (2 * math.pi))[:, None, None]
        if sym:
            return ker
        return np.stack([ker.real, ker.imag], axis=-1)

    res = _integrate(sys, f, settings)
    pref = sys.e**2 / sys.m
    val = res.value
    notes = sys.flow_notes()
    if not sym:
        imag = pref * val[..., 1]
        val = val[..., 0]
        scale = max(float(np.max(np.abs(pref * val))), KIRCHHOFF_ABS_FLOOR)
        if np.max(np.abs(imag)) > max(1e-10 * scale, 1e-10 * res.error_estimate * pref):
            raise ArithmeticError(f"noise has imaginary residue {np.max(np.abs(imag)):.3e}")
    return LeadMatrix(pref * val, "noise", "charge^2/time", notes, res.converged, pref * res.error_estimate)


def _quartic(U):
    """``Q[i, j, l, m] = conj(U_il) U_jl conj(U_jm) U_im``."""
    Uc = np.conj(U)
    return np.einsum("il,jl,jm,im->ijlm", Uc, U, Uc, U)


def noise_critical_closed_form(U, bank: ReservoirBank, e: float = 1.0) -> LeadMatrix:
    """Critical noise for equal finite temperatures, Fermi or Bose.

    ``P_ij = e^2/(2 pi beta) [delta_ij s_i - |U_ij|^2 s_j - |U_ji|^2 s_i
    + 1/2 sum_lm Q_ijlm K(beta mu_l, beta mu_m)]`` with ``s = g'(beta mu)`` and
    ``K`` the :func:`pair_kernel`.
    """
    beta = bank.beta[0]
    if any(b != beta for b in bank.beta):
        raise ValueError("closed form needs equal temperatures; use the quadrature path")
    if math.isinf(beta):
        raise ValueError("closed form needs finite beta; use shot_noise at zero temperature")
    U = U.entries if isinstance(U, UnitaryMatrix) else np.asarray(U)
    x = beta * np.array(bank.mu)
    _, g1, _ = _KINDS[bank.statistics]
    s = g1(x)
    K = pair_kernel(x[:, None], x[None, :], bank.statistics)
    t = np.abs(U) ** 2
    base = np.diag(s) - t * s[None, :] - t.T * s[:, None]
    quart = 0.5 * np.real(np.einsum("ijlm,lm->ij", _quartic(U), K))
    P = e**2 / (2 * math.pi * beta) * (base + quart)
    return LeadMatrix(P, "noise", "charge^2/time", ("closed form",))


def shot_noise(U, mu, statistics: Statistics = Statistics.FERMI, e: float = 1.0) -> LeadMatrix:
    """Zero-temperature critical noise ``+-(e^2/4pi) sum_{l != m} Q_ijlm |mu_l - mu_m|``.

    The Bose sign is the formal opposite of the Fermi result.
    """
    U = U.entries if isinstance(U, UnitaryMatrix) else np.asarray(U)
    mu = np.asarray(mu, dtype=float)
    dmu = np.abs(mu[:, None] - mu[None, :])   # zero on the diagonal, so l == m drops out
    sign = 1.0 if Statistics(statistics) is Statistics.FERMI else -1.0
    P = sign * e**2 / (4 * math.pi) * np.real(np.einsum("ijlm,lm->ij", _quartic(U), dmu))
    return LeadMatrix(P, "shot_noise", "charge^2/time", ("closed form",))


def johnson_nyquist(U, beta: float, e: float = 1.0) -> LeadMatrix:
    """Thermal noise ``e^2/(2 pi beta) (2 delta_ij - |U_ij|^2 - |U_ji|^2)``.

    This counts two occupation channels; a Schrodinger Fermi gas at ``mu = 0``
    carries half of it (see :func:`noise_critical_closed_form`).
    """
    U = U.entries if isinstance(U, UnitaryMatrix) else np.asarray(U)
    t = np.abs(U) ** 2
    P = e**2 / (2 * math.pi * beta) * (2 * np.eye(U.shape[0]) - t - t.T)
    return LeadMatrix(P, "johnson_nyquist", "charge^2/time", ("closed form",))


# -- two-lead thermal noise ----------------------------------------------------

@dataclass(frozen=True)
class ThermalNoiseBounds:
    """Two-lead equilibrium noise ``P_11`` with ``eta2 = 0`` and ``mu = 0``.

    ``lower`` and ``upper`` are ``C I(a)/2`` and ``C I(a)``; ``bracket_lower``
    is ``C I(a)/4``, which always holds because ``1/(1+xi)^2 >= 1/4``.
    """

    value: float
    lower: float
    upper: float
    bracket_lower: float
    prefactor: float
    a: float
    converged: bool = True
    error_estimate: float = 0.0
    notes: tuple[str, ...] = field(default_factory=tuple)


def thermal_noise_bounds_two_lead(params: TwoLeadParams, m: float, e: float, beta: float,
                                  settings: QuadratureSettings | None = None) -> ThermalNoiseBounds:
    if params.eta2 != 0:
        raise ValueError("thermal noise bounds need eta2 = 0")
    if not (m > 0 and beta > 0 and math.isfinite(beta)):
        raise ValueError("need m > 0 and finite beta > 0")
    eta = params.eta1
    C = (e * eta * math.sin(params.theta)) ** 2 / (2 * math.pi * m)
    if C == 0:
        return ThermalNoiseBounds(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, notes=("isolated leads: noise vanishes",))
    a = beta * eta * eta / (2 * m)

    # xi = exp(-t): int_0^inf e^-t / ((1 + e^-t)^2 (a + t)) dt
    def f(t):
        q = np.exp(-t)
        return q / ((1 + q) ** 2 * (a + t))

    bps = [a * 10.0**j for j in range(0, 40) if a * 10.0**j <= 50.0]
    s = _settings(settings)
    res = integrate_semi_infinite(f, s, breakpoints=bps, scale=1.0)
    I = exp_integral_Ia(a)
    notes = () if params.bound_state_free else (BOUND_STATE_FLOW_NOTE,)
    return ThermalNoiseBounds(C * res.value, C * I / 2, C * I, C * I / 4, C, a,
                              res.converged, C * res.error_estimate, notes)
