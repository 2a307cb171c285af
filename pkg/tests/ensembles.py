"""Randomized systems shared by the test modules."""
import math

import numpy as np

from starjunction.reservoirs import DiracReservoirBank, ReservoirBank, Statistics
from starjunction.scattering import (
    CriticalCoupling,
    GaugePhases,
    UnitaryMatrix,
    VertexCoupling,
    random_unitary,
)
from starjunction.schrodinger import SchrodingerSystem
from starjunction.dirac import DiracSystem


def bound_state_free_coupling(n, rng, lam_range=(-2.0, -0.1)):
    """Random vertex whose channels all have ``eta <= 0``.

    A Haar ``U`` would give ``eta > 0`` for half its eigenphases when
    ``lam < 0``, so the eigenphases are drawn from ``[0, pi/2)`` and rotated
    by a Haar unitary.
    """
    R = random_unitary(n, rng).entries
    alpha = rng.uniform(0.0, math.pi / 2, n)
    U = R @ np.diag(np.exp(2j * alpha)) @ R.conj().T
    lam = rng.uniform(*lam_range)
    return VertexCoupling(UnitaryMatrix.from_entries(U, tol=1e-10), lam)


def random_bank(n, rng, beta=(0.1, 10.0), mu=(0.0, 3.0), statistics=Statistics.FERMI):
    b = tuple(rng.uniform(*beta, n))
    if statistics is Statistics.BOSE:
        m = tuple(-rng.uniform(0.1, 3.0, n))
    else:
        m = tuple(rng.uniform(*mu, n))
    return ReservoirBank(b, m, statistics)


def equal_bank(n, rng):
    return ReservoirBank((rng.uniform(0.1, 10.0),) * n, (rng.uniform(0.1, 3.0),) * n)


def schrodinger_ensemble(count, seed, critical_every=4, bank=random_bank):
    """``count`` bound-state-free systems, every ``critical_every``-th one critical."""
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(count):
        n = int(rng.integers(2, 5))
        if critical_every and idx % critical_every == 0:
            coupling = CriticalCoupling(random_unitary(n, rng))
        else:
            coupling = bound_state_free_coupling(n, rng)
        out.append(SchrodingerSystem(m=rng.uniform(0.5, 2.0), e=rng.uniform(0.5, 2.0),
                                     coupling=coupling, bank=bank(n, rng)))
    return out


def dirac_ensemble(count, seed, equal_beta=False):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 5))
        beta = (rng.uniform(0.1, 10.0),) * n if equal_beta else tuple(rng.uniform(0.1, 10.0, n))
        bank = DiracReservoirBank(beta, tuple(rng.uniform(-2, 2, n)), tuple(rng.uniform(-2, 2, n)))
        out.append(DiracSystem(rng.uniform(0.5, 2.0), random_unitary(n, rng), bank))
    return out


def random_phases(n, rng):
    return GaugePhases(rng.uniform(-math.pi, math.pi, n))


def rel_diff(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale
