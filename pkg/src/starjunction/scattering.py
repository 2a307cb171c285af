"""Vertex scattering matrices for point-like interactions on a star graph.

A self-adjoint vertex is fixed by a unitary ``U`` and a scale ``lam``.  The
unitary that diagonalizes ``U`` also diagonalizes ``S(k)`` for every ``k``, so
``S(k) = R diag((k + i eta)/(k - i eta)) R^dagger`` with ``eta = lam*tan(alpha)``
and ``U = R diag(exp(2i alpha)) R^dagger``.  Channels with ``alpha = +-pi/2``
(eigenvalue -1) are Dirichlet channels and contribute ``-1`` at every ``k``.

All ``smatrix`` style functions accept a scalar or 1-D array of momenta and
return ``(n, n)`` or ``(len(k), n, n)`` complex arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "UnitarityError",
    "UnitaryMatrix",
    "VertexCoupling",
    "CriticalCoupling",
    "TwoLeadParams",
    "GaugePhases",
    "diagonalize_vertex",
    "smatrix",
    "critical_smatrix",
    "two_lead_smatrix",
    "gauge_dress",
    "random_unitary",
    "UNITARITY_TOL",
]

UNITARITY_TOL = 1e-12
# eigenvalues this close to -1 are treated as Dirichlet channels
_DIRICHLET_TOL = 1e-12


class UnitarityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """An n x n complex matrix plus the outcome of its unitarity check."""

    entries: np.ndarray
    is_unitary: bool
    worst_entry: tuple[int, int]
    worst_residual: float
    tol: float = UNITARITY_TOL

    @classmethod
    def from_entries(cls, entries, tol: float = UNITARITY_TOL) -> "UnitaryMatrix":
        a = np.array(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"U must be a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("U has non-finite entries")
        resid = np.abs(a @ a.conj().T - np.eye(a.shape[0]))
        i, j = np.unravel_index(np.argmax(resid), resid.shape)
        a.setflags(write=False)
        worst = float(resid[i, j])
        return cls(a, worst <= tol, (int(i), int(j)), worst, tol)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def require_unitary(self) -> None:
        if not self.is_unitary:
            i, j = self.worst_entry
            raise UnitarityError(
                f"U is not unitary: (U U^dagger - I)[{i + 1},{j + 1}] has magnitude "
                f"{self.worst_residual:.3e} > {self.tol:g} (row {i + 1})"
            )

    def inverse(self) -> np.ndarray:
        return self.entries.conj().T


def _as_unitary(U) -> UnitaryMatrix:
    return U if isinstance(U, UnitaryMatrix) else UnitaryMatrix.from_entries(U)


def random_unitary(n: int, rng: np.random.Generator) -> UnitaryMatrix:
    """Haar-distributed unitary from the QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return UnitaryMatrix.from_entries(q * (d / np.abs(d)))


def diagonalize_vertex(U) -> tuple[np.ndarray, np.ndarray]:
    """Return eigenphases ``alpha`` in [-pi/2, pi/2] and the rotation ``R``.

    ``R^dagger U R = diag(exp(2i alpha))``.  Eigenvalues at -1 get
    ``alpha = +pi/2``.
    """
    U = _as_unitary(U)
    U.require_unitary()
    # complex Schur form of a normal matrix is diagonal, with unitary Z
    T, Z = scipy.linalg.schur(U.entries, output="complex")
    ev = np.diagonal(T).copy()
    ev /= np.abs(ev)
    alpha = np.angle(ev) / 2.0
    alpha[np.abs(ev + 1.0) <= _DIRICHLET_TOL] = math.pi / 2
    return alpha, Z


def _check_k(k):
    k = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k)):
        raise ValueError("momenta must be finite")
    return k


@dataclass(frozen=True, eq=False)
class VertexCoupling:
    """Boundary data ``(U, lam)`` together with its spectral decomposition."""

    U: UnitaryMatrix
    lam: float
    alpha: np.ndarray = field(init=False)
    rotation: np.ndarray = field(init=False)
    etas: np.ndarray = field(init=False)
    dirichlet: np.ndarray = field(init=False)

    def __post_init__(self):
        U = _as_unitary(self.U)
        object.__setattr__(self, "U", U)
        lam = float(self.lam)
        if not math.isfinite(lam):
            raise ValueError("lambda must be finite")
        object.__setattr__(self, "lam", lam)
        alpha, R = diagonalize_vertex(U)
        dirichlet = np.isclose(np.abs(alpha), math.pi / 2, rtol=0, atol=1e-12)
        with np.errstate(invalid="ignore"):
            etas = np.where(dirichlet, np.inf, lam * np.tan(alpha))
        for arr in (alpha, R, etas, dirichlet):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "etas", etas)
        object.__setattr__(self, "dirichlet", dirichlet)

    @property
    def n(self) -> int:
        return self.U.n

    @property
    def bound_state_free(self) -> bool:
        return bool(np.all(self.etas[~self.dirichlet] <= 0))

    @property
    def is_critical(self) -> bool:
        """Scale invariant: every channel is Neumann-like (eta=0) or Dirichlet."""
        return bool(np.all(self.dirichlet | (self.etas == 0)))

    @property
    def critical_U(self) -> np.ndarray:
        """``S(k>0)`` for a critical coupling."""
        return self.smatrix(1.0)

    def momentum_scales(self) -> list[float]:
        return sorted({abs(float(e)) for e in self.etas[~self.dirichlet] if e != 0})

    def channel_factors(self, k) -> np.ndarray:
        k = _check_k(k)
        eta = np.where(self.dirichlet, 0.0, self.etas)
        kk = k[..., None]
        s = (kk + 1j * eta) / (kk - 1j * eta)
        # eta = 0 and k = 0 gives 0/0; the channel is Neumann there
        s = np.where((eta == 0) & (kk == 0), 1.0 + 0j, s)
        return np.where(self.dirichlet, -1.0 + 0j, s)

    def smatrix(self, k) -> np.ndarray:
        return smatrix(self, k)


@dataclass(frozen=True, eq=False)
class CriticalCoupling:
    """Scale-invariant vertex: ``S(k) = U`` for ``k > 0`` and ``U^-1`` for ``k < 0``."""

    U: UnitaryMatrix

    def __post_init__(self):
        U = _as_unitary(self.U)
        U.require_unitary()
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.U.n

    bound_state_free = True
    is_critical = True

    @property
    def critical_U(self) -> np.ndarray:
        return self.U.entries

    def momentum_scales(self) -> list[float]:
        return []

    def smatrix(self, k) -> np.ndarray:
        return critical_smatrix(self.U, k)


@dataclass(frozen=True)
class TwoLeadParams:
    """Parameters of the general two-lead scattering matrix."""

    eta1: float
    eta2: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        for name in ("eta1", "eta2", "theta", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for k in (1e-2, 1.0, 1e2):
            s = two_lead_smatrix(self, np.array([k, -k]))
            if np.max(np.abs(s[0] @ s[0].conj().T - np.eye(2))) > 1e-10:
                raise UnitarityError("two-lead S-matrix failed the unitarity probe")
            if np.max(np.abs(s[0].conj().T - s[1])) > 1e-10:
                raise UnitarityError("two-lead S-matrix failed the hermitian analyticity probe")

    n = 2

    @property
    def etas(self) -> np.ndarray:
        return np.array([self.eta1, self.eta2])

    @property
    def bound_state_free(self) -> bool:
        return self.eta1 <= 0 and self.eta2 <= 0

    @property
    def isolated(self) -> bool:
        return self.eta1 == self.eta2 or math.sin(self.theta) == 0

    @property
    def is_critical(self) -> bool:
        return self.eta1 == 0 and self.eta2 == 0

    @property
    def critical_U(self) -> np.ndarray:
        return self.smatrix(1.0)

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        e = complex(math.cos(self.phi), math.sin(self.phi))
        return np.array([[c, s * e], [-s * e.conjugate(), c]])

    def to_vertex_coupling(self, lam: float) -> VertexCoupling:
        """The ``(U, lam)`` pair whose ``S(k)`` coincides with this matrix."""
        if lam == 0:
            raise ValueError("lam must be non-zero to encode finite eta values")
        alpha = np.arctan(self.etas / lam)
        R = self.rotation()
        U = R @ np.diag(np.exp(2j * alpha)) @ R.conj().T
        return VertexCoupling(UnitaryMatrix.from_entries(U), lam)

    def momentum_scales(self) -> list[float]:
        return sorted({abs(e) for e in (self.eta1, self.eta2) if e != 0})

    def smatrix(self, k) -> np.ndarray:
        return two_lead_smatrix(self, k)


@dataclass(frozen=True, eq=False)
class GaugePhases:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float).ravel()
        if not np.all(np.isfinite(a)):
            raise ValueError("gauge phases must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.alpha.size

    def factors(self, charge: float = 1.0) -> np.ndarray:
        """``exp(-i e a_i) exp(+i e a_j)`` as an n x n array."""
        p = np.exp(1j * charge * self.alpha)
        return np.outer(p.conj(), p)


def smatrix(coupling, k) -> np.ndarray:
    """``S(k)`` from the spectral form; works for every coupling type."""
    if isinstance(coupling, CriticalCoupling):
        return critical_smatrix(coupling.U, k)
    if isinstance(coupling, TwoLeadParams):
        return two_lead_smatrix(coupling, k)
    R = coupling.rotation
    d = coupling.channel_factors(k)
    s = np.einsum("ia,...a,ja->...ij", R, d, R.conj())
    if not np.all(np.isfinite(s)):
        raise FloatingPointError("S(k) evaluation produced non-finite entries")
    return s


def critical_smatrix(U, k) -> np.ndarray:
    U = _as_unitary(U)
    k = _check_k(k)
    if np.any(k == 0):
        raise ValueError("the critical S-matrix is undefined at k = 0")
    pos = U.entries
    neg = U.inverse()
    if k.ndim == 0:
        return (pos if k > 0 else neg).copy()
    return np.where((k > 0)[:, None, None], pos[None], neg[None])


def two_lead_smatrix(p: TwoLeadParams, k) -> np.ndarray:
    k = _check_k(k)
    e1, e2 = p.eta1, p.eta2
    if e1 == 0 and e2 == 0:
        return np.broadcast_to(np.eye(2, dtype=complex), k.shape + (2, 2)).copy()
    d = e1 - e2
    cos_t, sin_t = math.cos(p.theta), math.sin(p.theta)
    ph = complex(math.cos(p.phi), math.sin(p.phi))
    if e1 * e2 == 0:
        # one vanishing eta: cancel the common factor k so that k = 0 stays regular
        den = k - 1j * (e1 + e2)
        s11 = (k + 1j * d * cos_t) / den
        s22 = (k - 1j * d * cos_t) / den
        off = d * sin_t / den
    else:
        den = (k - 1j * e1) * (k - 1j * e2)
        s11 = (k * k + 1j * k * d * cos_t + e1 * e2) / den
        s22 = (k * k - 1j * k * d * cos_t + e1 * e2) / den
        off = k * d * sin_t / den
    s12 = -1j * ph * off
    s21 = -1j * ph.conjugate() * off
    return np.stack([np.stack([s11, s12], -1), np.stack([s21, s22], -1)], -2)


def gauge_dress(S, phases: GaugePhases, charge: float = 1.0):
    """Apply ``S_ij -> exp(-i e a_i) S_ij exp(i e a_j)``.

    ``S`` may be an array (``(n, n)`` or stacked), a :class:`UnitaryMatrix`,
    or a callable ``k -> S(k)``; the result has the same kind.
    """
    P = phases.factors(charge)
    if isinstance(S, UnitaryMatrix):
        return UnitaryMatrix.from_entries(S.entries * P)
    if callable(S):
        return lambda k: S(k) * P
    return np.asarray(S) * P
