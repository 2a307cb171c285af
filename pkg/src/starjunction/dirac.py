"""Observables of a massless Dirac junction (dispersion |k|).

Particles and antiparticles carry separate chemical potentials ``mu`` and
``mu_tilde``.  The boundary matrix ``U`` is scale invariant, so every flow
has a closed form in logarithms and dilogarithms; quadrature is kept as an
oracle and for noise with unequal temperatures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .numerics import QuadratureSettings, integrate_semi_infinite, polylog_neg_exp
from .reservoirs import DiracReservoirBank, dirac_occupations, is_zero_temperature
from .scattering import GaugePhases, UnitaryMatrix
from .schrodinger import LeadMatrix, LeadVector, _noise_kernel, pair_kernel

__all__ = [
    "DiracSystem",
    "dirac_current",
    "dirac_current_limits",
    "dirac_conductance",
    "dirac_heat_current",
    "dirac_densities",
    "dirac_noise_kernel",
    "dirac_noise_zero_freq",
]


@dataclass(frozen=True, eq=False)
class DiracSystem:
    e: float
    U: UnitaryMatrix
    bank: DiracReservoirBank
    gauge: GaugePhases | None = None

    def __post_init__(self):
        U = self.U if isinstance(self.U, UnitaryMatrix) else UnitaryMatrix.from_entries(self.U)
        U.require_unitary()
        object.__setattr__(self, "U", U)
        if U.n != self.bank.n:
            raise ValueError(f"U is {U.n}x{U.n} but {self.bank.n} reservoirs were given")
        if self.gauge is not None and self.gauge.n != U.n:
            raise ValueError(f"gauge has {self.gauge.n} phases for {U.n} leads")
        if not math.isfinite(self.e):
            raise ValueError("charge must be finite")

    @property
    def n(self) -> int:
        return self.U.n

    @property
    def matrix(self) -> np.ndarray:
        """Boundary matrix with gauge phases applied."""
        U = self.U.entries
        if self.gauge is not None:
            U = U * self.gauge.factors(self.e)
        return U

    @property
    def charge_conjugation_symmetric(self) -> bool:
        U = self.U.entries
        return bool(np.allclose(np.conj(U), -U, rtol=0, atol=1e-12)
                    and all(m == -mt for m, mt in zip(self.bank.mu, self.bank.mu_tilde)))


def _transfer(U, sign=-1.0):
    return np.eye(U.shape[0]) + sign * np.abs(U) ** 2


def _log_weights(bank: DiracReservoirBank) -> np.ndarray:
    """Particle minus antiparticle ``int (f - f~) dk`` per lead."""
    out = np.empty(bank.n)
    for j, (b, mu, mt) in enumerate(zip(bank.beta, bank.mu, bank.mu_tilde)):
        if math.isinf(b):
            out[j] = max(mu, 0.0) - max(-mt, 0.0)
        else:
            out[j] = (np.logaddexp(0.0, b * mu) - np.logaddexp(0.0, -b * mt)) / b
    return out


def _heat_weights(bank: DiracReservoirBank) -> np.ndarray:
    """Particle plus antiparticle ``int |k| (f + f~) dk`` per lead."""
    out = np.empty(bank.n)
    for j, (b, mu, mt) in enumerate(zip(bank.beta, bank.mu, bank.mu_tilde)):
        if math.isinf(b):
            out[j] = 0.5 * (max(mu, 0.0) ** 2 + max(-mt, 0.0) ** 2)
        else:
            out[j] = -(polylog_neg_exp(2.0, b * mu) + polylog_neg_exp(2.0, -b * mt)) / b**2
    return out


def dirac_current(sys: DiracSystem) -> LeadVector:
    J = sys.e / (2 * math.pi) * _transfer(sys.matrix) @ _log_weights(sys.bank)
    return LeadVector(J, "current", "charge/time", ("closed form",))


def dirac_current_limits(sys: DiracSystem) -> tuple[np.ndarray, np.ndarray]:
    """``(beta -> 0, beta -> inf)`` limits of the current for a common temperature."""
    T = _transfer(sys.matrix)
    mu = np.array(sys.bank.mu)
    mt = np.array(sys.bank.mu_tilde)
    high = sys.e / (4 * math.pi) * T @ (mu + mt)
    # theta(0) = 0
    low = sys.e / (2 * math.pi) * T @ (np.where(mu > 0, mu, 0.0) + np.where(mt < 0, mt, 0.0))
    return high, low


def dirac_conductance(sys: DiracSystem) -> LeadMatrix:
    mu = np.array(sys.bank.mu)
    if np.any(mu == 0):
        j = int(np.flatnonzero(mu == 0)[0])
        raise ValueError(f"conductance needs mu_j != 0 (V_j = mu_j/e); lead {j + 1} has mu = 0")
    G = sys.e**2 / (2 * math.pi) * _transfer(sys.matrix) * (_log_weights(sys.bank) / mu)[None, :]
    return LeadMatrix(G, "conductance", "charge^2", ("closed form",))


def _plan(bank: DiracReservoirBank):
    bps = set()
    rates = []
    for b, mu, mt in zip(bank.beta, bank.mu, bank.mu_tilde):
        for edge, zero_t in ((mu, is_zero_temperature(b, mu)), (-mt, is_zero_temperature(b, mt))):
            if zero_t:
                if edge > 0:
                    bps.add(edge)
                continue
            for c in (-32.0, -8.0, -2.0, 0.0, 2.0, 8.0, 32.0):
                k = edge + c / b
                if k > 0:
                    bps.add(k)
        if not math.isinf(b):
            rates.append(b)
    scale = 1.0 / min(rates) if rates else 1.0
    return sorted(bps), scale


def _occupations(bank, k):
    pairs = [dirac_occupations(bank, j, k) for j in range(bank.n)]
    f = np.stack([p[0] for p in pairs], axis=-1)
    ft = np.stack([p[1] for p in pairs], axis=-1)
    return f, ft


def _quadrature(sys, f, settings):
    bps, scale = _plan(sys.bank)
    s = settings if settings is not None else QuadratureSettings()
    return integrate_semi_infinite(f, s, breakpoints=bps, scale=s.tail_decay_scale or scale)


def dirac_heat_current(sys: DiracSystem, method: str = "closed",
                       settings: QuadratureSettings | None = None) -> LeadVector:
    T = _transfer(sys.matrix)
    if method == "closed":
        return LeadVector(T @ _heat_weights(sys.bank) / (2 * math.pi), "heat_current", "energy/time",
                          ("closed form",))
    if method != "quadrature":
        raise ValueError("method must be 'closed' or 'quadrature'")

    def f(k):
        p, a = _occupations(sys.bank, k)
        return (k / (2 * math.pi))[:, None] * (p + a)

    res = _quadrature(sys, f, settings)
    return LeadVector(T @ res.value, "heat_current", "energy/time", (), res.converged,
                      float(np.max(np.sum(np.abs(T), axis=1))) * res.error_estimate)


def dirac_densities(sys: DiracSystem) -> tuple[LeadVector, LeadVector]:
    """Charge and energy densities; both are independent of the distance to the vertex."""
    W = _transfer(sys.matrix, +1.0)
    rho = sys.e / (2 * math.pi) * W @ _log_weights(sys.bank)
    eps = W @ _heat_weights(sys.bank) / (2 * math.pi)
    return (LeadVector(rho, "charge_density", "charge/length", ("closed form",)),
            LeadVector(eps, "energy_density", "energy/length", ("closed form",)))


def dirac_noise_kernel(bank: DiracReservoirBank, k) -> np.ndarray:
    """``F_ij(k) = f_i (1 - f_j) + f~_i (1 - f~_j)``, shape ``(len(k), n, n)``."""
    f, ft = _occupations(bank, np.atleast_1d(k))
    return f[:, :, None] * (1 - f[:, None, :]) + ft[:, :, None] * (1 - ft[:, None, :])


def _scaled_pair(beta, a, b):
    """``(1/beta) K(beta a, beta b)`` with its ``beta -> inf`` value ``|a+ - b+|``."""
    if math.isinf(beta):
        return np.abs(np.maximum(a, 0.0) - np.maximum(b, 0.0))
    return pair_kernel(beta * a, beta * b) / beta


def _dirac_noise_closed(sys: DiracSystem) -> np.ndarray:
    beta = sys.bank.beta[0]
    U = sys.matrix
    mu = np.array(sys.bank.mu)
    am = -np.array(sys.bank.mu_tilde)
    if math.isinf(beta):
        s = np.zeros(sys.n)
    else:
        s = (expit(beta * mu) + expit(beta * am)) / beta
    K = _scaled_pair(beta, mu[:, None], mu[None, :]) + _scaled_pair(beta, am[:, None], am[None, :])
    t = np.abs(U) ** 2
    base = (np.eye(sys.n) - t) * s[:, None] - t.T * s[None, :]
    Uc = np.conj(U)
    quart = np.einsum("li,lj,mj,mi,lm->ij", U, Uc, U, Uc, K)
    return sys.e**2 / (2 * math.pi) * (base + 0.5 * np.real(quart))


def dirac_noise_zero_freq(sys: DiracSystem, method: str = "auto",
                          settings: QuadratureSettings | None = None) -> LeadMatrix:
    """Zero-frequency noise; closed form for a common temperature, else quadrature."""
    equal = all(b == sys.bank.beta[0] for b in sys.bank.beta)
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError("method must be auto, closed or quadrature")
    if method == "closed" and not equal:
        raise ValueError("closed form needs equal temperatures")
    if method != "quadrature" and equal:
        return LeadMatrix(_dirac_noise_closed(sys), "noise", "charge^2/time", ("closed form",))

    St = sys.matrix.T

    def f(k):
        p, a = _occupations(sys.bank, k)
        s = np.broadcast_to(St, k.shape + St.shape)
        ker = _noise_kernel(s, p, 1 - p) + _noise_kernel(s, a, 1 - a)
        return ker / (2 * math.pi)

    res = _quadrature(sys, f, settings)
    return LeadMatrix(sys.e**2 * res.value, "noise", "charge^2/time", (), res.converged,
                      sys.e**2 * res.error_estimate)
