"""Thermal reservoirs attached to the leads and their occupation numbers."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "Statistics",
    "ReservoirBank",
    "DiracReservoirBank",
    "ReservoirError",
    "ZERO_T_THRESHOLD",
    "occupation_d",
    "complement_c",
    "dirac_occupations",
    "is_zero_temperature",
]

# beta * max(|mu|, 1) above this is handled as exactly zero temperature
ZERO_T_THRESHOLD = 700.0


class Statistics(enum.Enum):
    FERMI = "fermi"
    BOSE = "bose"


class ReservoirError(ValueError):
    pass


def _parse_betas(beta, n_expected=None):
    out = []
    for i, b in enumerate(beta):
        if isinstance(b, str):
            if b.lower() in ("inf", "infinity", "zero-temperature", "zero_temperature"):
                b = math.inf
            else:
                raise ReservoirError(f"lead {i + 1}: beta must be a number or 'zero-temperature', got {b!r}")
        b = float(b)
        if not b > 0 or math.isnan(b):
            raise ReservoirError(f"lead {i + 1}: beta must be > 0, got {b}")
        out.append(b)
    return tuple(out)


@dataclass(frozen=True)
class ReservoirBank:
    """Per-lead inverse temperatures and chemical potentials.

    ``beta = inf`` is zero temperature.
    """

    beta: tuple[float, ...]
    mu: tuple[float, ...]
    statistics: Statistics = Statistics.FERMI

    def __post_init__(self):
        object.__setattr__(self, "beta", _parse_betas(self.beta))
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        stats = Statistics(self.statistics) if not isinstance(self.statistics, Statistics) else self.statistics
        object.__setattr__(self, "statistics", stats)
        if len(self.beta) != len(self.mu):
            raise ReservoirError(f"beta has {len(self.beta)} entries but mu has {len(self.mu)}")
        if not self.beta:
            raise ReservoirError("at least one reservoir is required")
        for i, m in enumerate(self.mu):
            if not math.isfinite(m):
                raise ReservoirError(f"lead {i + 1}: mu must be finite")
        if stats is Statistics.BOSE:
            for i, (b, m) in enumerate(zip(self.beta, self.mu)):
                if m >= 0:
                    raise ReservoirError(
                        f"lead {i + 1}: Bose statistics needs mu < 0 strictly, got mu={m}"
                    )
                if math.isinf(b):
                    raise ReservoirError(f"lead {i + 1}: zero temperature is not supported for Bose statistics")

    @property
    def n(self) -> int:
        return len(self.beta)

    def check_schrodinger(self) -> None:
        """Warn about negative Fermi chemical potentials (allowed, but unusual)."""
        if self.statistics is Statistics.FERMI and any(m < 0 for m in self.mu):
            warnings.warn("negative chemical potential in a Schrodinger Fermi reservoir", stacklevel=3)


@dataclass(frozen=True)
class DiracReservoirBank:
    """Fermi reservoirs with separate particle (``mu``) and antiparticle (``mu_tilde``) potentials."""

    beta: tuple[float, ...]
    mu: tuple[float, ...]
    mu_tilde: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "beta", _parse_betas(self.beta))
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        object.__setattr__(self, "mu_tilde", tuple(float(m) for m in self.mu_tilde))
        if not len(self.beta) == len(self.mu) == len(self.mu_tilde):
            raise ReservoirError("beta, mu and mu_tilde must have the same length")
        if not self.beta:
            raise ReservoirError("at least one reservoir is required")
        if not all(math.isfinite(m) for m in self.mu + self.mu_tilde):
            raise ReservoirError("chemical potentials must be finite")

    statistics = Statistics.FERMI

    @property
    def n(self) -> int:
        return len(self.beta)


def is_zero_temperature(beta: float, mu: float) -> bool:
    return math.isinf(beta) or beta * max(abs(mu), 1.0) > ZERO_T_THRESHOLD


def _fermi(beta, mu, omega):
    omega = np.asarray(omega, dtype=float)
    if is_zero_temperature(beta, mu):
        return np.where(omega < mu, 1.0, np.where(omega == mu, 0.5, 0.0))
    return expit(-beta * (omega - mu))


def _bose(beta, mu, omega):
    x = beta * (np.asarray(omega, dtype=float) - mu)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(x)


def occupation_d(bank: ReservoirBank, i: int, omega):
    """Occupation ``e^{-b(w-mu)} / (1 +- e^{-b(w-mu)})`` of lead ``i`` at energy ``omega``."""
    b, m = bank.beta[i], bank.mu[i]
    if bank.statistics is Statistics.BOSE:
        return _bose(b, m, omega)
    return _fermi(b, m, omega)


def complement_c(bank: ReservoirBank, i: int, omega):
    """``1 / (1 +- e^{-b(w-mu)})``; equals ``1 - d`` (Fermi) or ``1 + d`` (Bose)."""
    d = occupation_d(bank, i, omega)
    if bank.statistics is Statistics.BOSE:
        return 1.0 + d
    return 1.0 - d


def dirac_occupations(bank: DiracReservoirBank, i: int, k):
    """Particle and antiparticle occupations ``(f_i, f~_i)`` at momentum ``k``."""
    w = np.abs(np.asarray(k, dtype=float))
    b = bank.beta[i]
    f = _fermi(b, bank.mu[i], w)
    ft = _fermi(b, -bank.mu_tilde[i], w)
    return f, ft
