"""Acceptance criteria, one registered check function per criterion.

Each function returns a list of ``(label, ok, detail)`` sub-checks; a
criterion passes when all of them do.  Run under pytest (a summary line per
criterion is printed at the end of the session) or directly as a script.
"""
import math
import subprocess
import sys
from pathlib import Path

import mpmath
import numpy as np
import pytest

from starjunction import cli
from starjunction.config import load_document, parse_config
from starjunction.dirac import (
    DiracSystem,
    dirac_conductance,
    dirac_current,
    dirac_current_limits,
    dirac_densities,
    dirac_heat_current,
    dirac_noise_zero_freq,
)
from starjunction.numerics import exp_integral_Ia, polylog
from starjunction.reservoirs import DiracReservoirBank, ReservoirBank, Statistics
from starjunction.scattering import (
    CriticalCoupling,
    GaugePhases,
    TwoLeadParams,
    VertexCoupling,
    random_unitary,
    smatrix,
)
from starjunction.schrodinger import (
    SchrodingerSystem,
    charge_density_profile,
    conductance,
    critical_current_closed_form,
    critical_heat_closed_form,
    energy_density_profile,
    friedel_critical_zero_temperature,
    heat_current,
    johnson_nyquist,
    noise_critical_closed_form,
    noise_zero_freq,
    shot_noise,
    stefan_boltzmann_critical,
    steady_current,
    steady_current_limits,
    thermal_noise_bounds_two_lead,
)

sys.path.insert(0, str(Path(__file__).resolve().parent))
from ensembles import dirac_ensemble, rel_diff, schrodinger_ensemble  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
CRITERIA = {}
RESULTS = {}


def criterion(number, title):
    def register(fn):
        CRITERIA[number] = (title, fn)
        return fn
    return register


def check(label, value, limit, relation="<="):
    ok = value <= limit if relation == "<=" else value >= limit
    return label, bool(ok), f"{value:.3g} {relation} {limit:g}"


def flag(label, ok, detail=""):
    return label, bool(ok), detail


def real_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diagonal(r))


@criterion(1, "S-matrix laws")
def s_matrix_laws():
    rng = np.random.default_rng(1)
    unit = ha = s2 = 0.0
    for _ in range(200):
        n = int(rng.choice([2, 3, 4]))
        lam = float(rng.choice([-1, 1]) * rng.uniform(0.1, 3.0))
        c = VertexCoupling(random_unitary(n, rng), lam)
        k = np.exp(rng.uniform(math.log(0.01), math.log(100), 50))
        s, sm = smatrix(c, k), smatrix(c, -k)
        sd = np.conj(np.swapaxes(s, -1, -2))
        unit = max(unit, float(np.max(np.abs(s @ sd - np.eye(n)))))
        ha = max(ha, float(np.max(np.abs(sd - sm))))
        s2 = max(s2, float(np.max(np.abs(smatrix(c, lam) - c.U.entries))),
                 float(np.max(np.abs(smatrix(c, -lam) - c.U.inverse()))))
    return [check("unitarity", unit, 1e-10), check("hermitian analyticity", ha, 1e-10),
            check("S(lambda) = U", s2, 1e-10)]


@criterion(2, "Kirchhoff suite")
def kirchhoff_suite():
    worst = {"current": 0.0, "heat": 0.0, "conductance": 0.0, "noise rows": 0.0, "noise columns": 0.0}

    def note(name, resid, values):
        scale = max(float(np.max(np.abs(values))), 1e-300)
        # relative 1e-9 with the absolute floor 1e-14, expressed as a ratio to the allowance
        worst[name] = max(worst[name], resid / max(1e-9 * scale, 1e-14))

    for s in schrodinger_ensemble(100, seed=2):
        J, T, G, P = steady_current(s), heat_current(s), conductance(s), noise_zero_freq(s)
        note("current", J.kirchhoff_residual, J.values)
        note("heat", T.kirchhoff_residual, T.values)
        note("conductance", float(np.max(np.abs(G.column_residuals))), G.values)
        note("noise rows", float(np.max(np.abs(P.row_residuals))), P.values)
        note("noise columns", float(np.max(np.abs(P.column_residuals))), P.values)
    for s in dirac_ensemble(100, seed=3):
        J, T, G, P = dirac_current(s), dirac_heat_current(s), dirac_conductance(s), dirac_noise_zero_freq(s)
        note("current", J.kirchhoff_residual, J.values)
        note("heat", T.kirchhoff_residual, T.values)
        note("conductance", float(np.max(np.abs(G.column_residuals))), G.values)
        note("noise rows", float(np.max(np.abs(P.row_residuals))), P.values)
        note("noise columns", float(np.max(np.abs(P.column_residuals))), P.values)
    return [check(f"{k} residual / allowance", v, 1.0) for k, v in worst.items()]


@criterion(3, "Equilibrium null")
def equilibrium_null():
    rng = np.random.default_rng(4)

    def equal(n, r):
        return ReservoirBank((r.uniform(0.1, 10),) * n, (r.uniform(0.1, 3),) * n)

    J = T = neq = 0.0
    for s in schrodinger_ensemble(20, seed=5, bank=equal):
        J = max(J, float(np.max(np.abs(steady_current(s, method="quadrature").values))))
        T = max(T, float(np.max(np.abs(heat_current(s, method="quadrature").values))))
        for i in range(s.n):
            neq = max(neq, abs(charge_density_profile(s, i, 1.0).neq), abs(energy_density_profile(s, i, 1.0).neq))
    # the noise null is the isolated-lead statement: diagonal U, distinct reservoirs
    P = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 5))
        U = np.diag(np.exp(1j * rng.uniform(0, math.pi / 2, n)))
        bank = ReservoirBank(tuple(rng.uniform(0.1, 10, n)), tuple(rng.uniform(0.1, 3, n)))
        s = SchrodingerSystem(1.0, 1.0, VertexCoupling(U, -rng.uniform(0.1, 2)), bank)
        P = max(P, float(np.max(np.abs(noise_zero_freq(s).values))))
    return [check("|J|", J, 1e-10), check("|heat|", T, 1e-10), check("|rho_neq|, |eps_neq|", neq, 1e-10),
            check("|P| isolated leads", P, 1e-10)]


@criterion(4, "Critical closed forms vs quadrature")
def critical_closed_forms():
    rng = np.random.default_rng(6)
    worst = {"current": 0.0, "heat": 0.0, "Stefan-Boltzmann": 0.0, "noise": 0.0}
    for _ in range(50):
        n = int(rng.integers(2, 5))
        U = random_unitary(n, rng)
        m = rng.uniform(0.5, 2.0)
        bank = ReservoirBank(tuple(rng.uniform(0.1, 10, n)), tuple(rng.uniform(0.0, 3, n)))
        s = SchrodingerSystem(m, 1.0, CriticalCoupling(U), bank)
        worst["current"] = max(worst["current"], rel_diff(
            steady_current(s, method="quadrature").values, critical_current_closed_form(U, bank)))
        worst["heat"] = max(worst["heat"], rel_diff(
            heat_current(s, method="quadrature").values, critical_heat_closed_form(U, bank)))
        sb = [energy_density_profile(s, i, 1.0).stefan_boltzmann for i in range(n)]
        worst["Stefan-Boltzmann"] = max(worst["Stefan-Boltzmann"],
                                        rel_diff(sb, stefan_boltzmann_critical(U, bank, m)))
        eq = ReservoirBank((bank.beta[0],) * n, bank.mu)
        se = SchrodingerSystem(m, 1.0, CriticalCoupling(U), eq)
        worst["noise"] = max(worst["noise"], rel_diff(
            noise_zero_freq(se).values, noise_critical_closed_form(U, eq).values))
    return [check(k, v, 1e-6) for k, v in worst.items()]


@criterion(5, "Limit identities")
def limit_identities():
    rng = np.random.default_rng(7)
    exact = True
    approach = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 5))
        U = random_unitary(n, rng)
        mu = rng.uniform(0, 3, n)
        high, low = steady_current_limits(U, mu)
        exact &= bool(np.array_equal(high, low / 2))
        approach = max(approach, rel_diff(critical_current_closed_form(U, ReservoirBank((1e-7,) * n, mu)), high),
                       rel_diff(critical_current_closed_form(U, ReservoirBank((1e5,) * n, mu)), low))
    dirac = 0.0
    for s in dirac_ensemble(20, seed=8):
        cold = DiracSystem(s.e, s.U, DiracReservoirBank((1e4,) * s.n, s.bank.mu, s.bank.mu_tilde))
        dirac = max(dirac, rel_diff(dirac_current(cold).values, dirac_current_limits(cold)[1]))
    shot = 0.0
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    w = np.exp(2j * math.pi / 3)
    vertices = [h, 2 / 3 * np.ones((3, 3)) - np.eye(3), 0.5 * np.ones((4, 4)) - np.eye(4),
                np.array([[w ** (i * j) for j in range(3)] for i in range(3)]) / math.sqrt(3)]
    for U in vertices:
        # adjacent potentials 40 apart, i.e. 4000 k_B T at beta = 100
        n = len(U)
        mu = 40.0 * np.arange(n)[::-1] + 0.5
        P = noise_critical_closed_form(U, ReservoirBank((100.0,) * n, tuple(mu))).values
        shot = max(shot, rel_diff(P, shot_noise(U, mu).values))
    return [flag("J(beta=0) == J(beta=inf)/2 bitwise", exact),
            check("closed form at beta 1e-7 / 1e5 vs limits", approach, 1e-5),
            check("Dirac current at beta=1e4 vs zero-T limit", dirac, 1e-3),
            check("noise at beta=100 vs shot noise", shot, 1e-3)]


@criterion(6, "Friedel oscillations")
def friedel():
    rng = np.random.default_rng(9)
    O = real_orthogonal(2, rng)
    m, mu = 1.0, 0.5
    s = SchrodingerSystem(m, 1.0, CriticalCoupling(O), ReservoirBank(("inf", "inf"), (mu, 0.2)))
    xs = np.concatenate([[math.pi / 4], np.geomspace(0.05, 60.0, 19)])
    quad = np.array([charge_density_profile(s, 0, x).osc for x in xs])
    closed = friedel_critical_zero_temperature(O[0, 0], 1.0, m, mu, xs)
    unit = SchrodingerSystem(1.0, 1.0, CriticalCoupling(np.eye(1)), ReservoirBank(("inf",), (0.5,)))
    worked = charge_density_profile(unit, 0, math.pi / 4).osc
    # maxima of sin(2 k_F x) with k_F = 1 inside [5, 50]
    peaks = [(math.pi / 4 + j * math.pi) for j in range(2, 16)]
    env = np.array([x * charge_density_profile(unit, 0, x).osc for x in peaks])
    return [check("closed form vs quadrature (20 x)", float(np.max(np.abs(quad - closed))), 1e-6),
            check("rho_osc(pi/4) - 4/pi^2 (literal worked value)", abs(worked - 4 / math.pi**2), 1e-6),
            check("rho_osc(pi/4) - 2/pi^2 (exact integral)", abs(worked - 2 / math.pi**2), 1e-12),
            check("x * envelope spread over [5, 50]", float(np.ptp(env) / np.mean(env)), 0.05)]


@criterion(7, "Noise structure")
def noise_structure():
    sym = 0.0
    diag = math.inf
    for s in schrodinger_ensemble(30, seed=10):
        P = noise_zero_freq(s).values
        sym = max(sym, float(np.max(np.abs(P - P.T)) / np.max(np.abs(P))))
        diag = min(diag, float(np.min(np.diag(P))))
    rng = np.random.default_rng(11)
    bose = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 5))
        U = random_unitary(n, rng)
        mu = rng.uniform(0, 3, n)
        f = shot_noise(U, mu, Statistics.FERMI).values
        # Bose needs mu < 0; a common shift leaves every difference unchanged
        b = shot_noise(U, -mu - 0.1, Statistics.BOSE).values
        bose = max(bose, float(np.max(np.abs(b + f))))
    perm = 0.0
    for n in (2, 3, 4):
        for _ in range(5):
            p = np.eye(n)[rng.permutation(n)] * np.exp(1j * rng.uniform(0, 2 * math.pi, n))[:, None]
            perm = max(perm, float(np.max(np.abs(shot_noise(p, rng.uniform(0, 3, n)).values))))
    return [check("max |P - P^T| / max |P|", sym, 1e-9), check("min Fermi P_ii", diag, 0.0, ">="),
            check("Bose shot + Fermi shot", bose, 1e-9), flag("permutation shot noise exactly 0", perm == 0,
                                                              f"max {perm:g}")]


@criterion(8, "Two-lead thermal noise")
def thermal_noise():
    literal = math.inf
    bracket = True
    for beta in (0.01, 0.1, 1.0, 10.0, 100.0):
        for eta in (-0.5, -1.0, -2.0):
            for theta in (0.3, math.pi / 2):
                t = thermal_noise_bounds_two_lead(TwoLeadParams(eta, 0.0, theta), 1.0, 1.0, beta)
                literal = min(literal, (t.value - t.lower) / t.lower)
                bracket &= t.bracket_lower <= t.value <= t.upper
    eta, m = -2.0, 1.0
    scale = eta**2 / (2 * m)

    def value(T):
        return thermal_noise_bounds_two_lead(TwoLeadParams(eta, 0.0, math.pi / 2), m, 1.0, 1 / T).value

    low = np.array([value(T) / T for T in np.geomspace(1e-3, 1e-2, 6) * scale])
    high = np.array([value(T) / math.log(T) for T in np.geomspace(1e2, 1e4, 6) * scale])
    return [check("min (value - C I/2)/(C I/2) over 30 points (literal lower bound)", literal, 0.0, ">="),
            flag("C I/4 <= value <= C I over 30 points", bracket),
            check("value/T spread, low T", float(np.ptp(low) / np.mean(low)), 0.05),
            check("value/ln T spread, high T", float(np.ptp(high) / np.mean(high)), 0.10)]


@criterion(9, "Dirac correspondences")
def dirac_correspondences():
    rng = np.random.default_rng(12)
    corr = 0.0
    jn = jq = 0.0
    cc = True
    for _ in range(20):
        n = int(rng.integers(2, 5))
        U = random_unitary(n, rng)
        beta = rng.uniform(0.1, 10)
        mu = tuple(rng.uniform(0, 3, n))
        d = dirac_current(DiracSystem(1.0, U, DiracReservoirBank((beta,) * n, mu, (0.0,) * n))).values
        sch = steady_current(SchrodingerSystem(1.0, 1.0, CriticalCoupling(U), ReservoirBank((beta,) * n, mu)))
        corr = max(corr, float(np.max(np.abs(d - sch.values))))
        zero = DiracSystem(1.0, U, DiracReservoirBank((beta,) * n, (0.0,) * n, (0.0,) * n))
        P = dirac_noise_zero_freq(zero).values
        jn = max(jn, rel_diff(P, johnson_nyquist(U, beta).values))
        jq = max(jq, rel_diff(dirac_noise_zero_freq(zero, method="quadrature").values, P))
        O = real_orthogonal(n, rng)
        m = tuple(rng.uniform(-2, 2, n))
        c = DiracSystem(1.0, 1j * O, DiracReservoirBank(tuple(rng.uniform(0.1, 10, n)), m, tuple(-x for x in m)))
        cc &= c.charge_conjugation_symmetric
        cc &= bool(np.all(dirac_current(c).values == 0) and np.all(dirac_densities(c)[0].values == 0))
    return [check("mu~ = 0 Dirac vs Schrodinger current", corr, 1e-12),
            check("zero-potential noise vs two-channel Johnson-Nyquist", jn, 1e-12),
            check("closed form vs quadrature", jq, 1e-6),
            flag("charge conjugation: current and charge density exactly 0", cc)]


@criterion(10, "Gauge invariance")
def gauge_invariance():
    rng = np.random.default_rng(13)
    worst = 0.0
    for s in schrodinger_ensemble(10, seed=14):
        g = SchrodingerSystem(s.m, s.e, s.coupling, s.bank, GaugePhases(rng.uniform(-math.pi, math.pi, s.n)))
        for fn in (steady_current, heat_current, conductance, noise_zero_freq):
            worst = max(worst, rel_diff(fn(g).values, fn(s).values))
        for prof in (charge_density_profile, energy_density_profile):
            a, b = prof(s, 0, 0.7), prof(g, 0, 0.7)
            worst = max(worst, rel_diff([b.total, b.osc, b.neq], [a.total, a.osc, a.neq]))
    for s in dirac_ensemble(10, seed=15):
        g = DiracSystem(s.e, s.U, s.bank, GaugePhases(rng.uniform(-math.pi, math.pi, s.n)))
        for fn in (dirac_current, dirac_heat_current, dirac_conductance, dirac_noise_zero_freq):
            worst = max(worst, rel_diff(fn(g).values, fn(s).values))
        for a, b in zip(dirac_densities(s), dirac_densities(g)):
            worst = max(worst, rel_diff(b.values, a.values))
    return [check("max relative change", worst, 1e-12)]


@criterion(11, "Special functions")
def special_functions():
    li2 = polylog(2.0, -1.0)
    li32 = polylog(1.5, -1.0)
    ei = exp_integral_Ia(1.0)
    series_li2 = float(mpmath.nsum(lambda j: (-1) ** j / j**2, [1, mpmath.inf]))
    series_li32 = float(mpmath.nsum(lambda j: (-1) ** j / j**1.5, [1, mpmath.inf]))
    # E1(1) = -gamma - sum_{k>=1} (-1)^k / (k k!)
    series_e1 = float(-mpmath.euler - mpmath.nsum(lambda k: (-1) ** k / (k * mpmath.factorial(k)), [1, mpmath.inf]))
    return [check("Li2(-1) + pi^2/12", abs(li2 + math.pi**2 / 12), 1e-9),
            check("Li2(-1) vs series", abs(li2 - series_li2), 1e-9),
            check("Li3/2(-1) vs series", abs(li32 - series_li32), 1e-9),
            check("Li3/2(-1) vs -0.7651470 (7 digits)", abs(li32 + 0.7651470), 5e-8),
            check("e E1(1) vs series", abs(ei - math.e * series_e1), 1e-9),
            check("e E1(1) vs 0.596347 (6 digits)", abs(ei - 0.596347), 5e-7)]


@criterion(12, "CLI determinism and figure data")
def cli_determinism():
    config = ROOT / "configs" / "fig3_mu2.toml"
    cfg = parse_config(load_document(config))
    _, code, (header, table) = cli.run_sweep(cfg, workers=1)
    col = header.index("current_1")
    mu1 = cfg.reservoirs[0].mu
    mu2 = np.array([r[0] for r in table])
    J1 = np.array([r[col] for r in table])
    at = int(np.flatnonzero(mu2 == mu1)[0])
    crossing = bool(np.all(J1[:at] > 0) and np.all(J1[at + 1:] < 0))
    runs = []
    for workers in ("1", "1", "4"):
        out = subprocess.run([sys.executable, "-m", "starjunction", "sweep", "--config", str(config),
                              "--workers", workers], capture_output=True, check=False)
        runs.append((out.returncode, out.stdout))
    same = all(r == runs[0] for r in runs) and runs[0][0] == 0
    return [flag("sweep exit code 0", code == 0),
            flag("J_1 > 0 below and < 0 above mu_2 = mu_1", crossing),
            check("|J_1| at mu_2 = mu_1 relative to max |J_1|", abs(J1[at]) / np.max(np.abs(J1)), 1e-12),
            flag("byte-identical reruns (workers 1, 1, 4)", same, f"{len(runs[0][1])} bytes")]


def evaluate(number):
    if number not in RESULTS:
        title, fn = CRITERIA[number]
        try:
            RESULTS[number] = fn()
        except Exception as exc:  # report, do not hide, unexpected errors
            RESULTS[number] = [("raised", False, f"{type(exc).__name__}: {exc}")]
    return RESULTS[number]


def summary_line(number):
    title = CRITERIA[number][0]
    checks = RESULTS[number]
    failed = [c for c in checks if not c[1]]
    status = "PASS" if not failed else "FAIL"
    detail = "; ".join(f"{c[0]}: {c[2]}" for c in failed) if failed else f"{len(checks)} checks"
    return f"ACCEPTANCE {number:2d} {status}  {title}  ({detail})"


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_acceptance(number):
    checks = evaluate(number)
    failed = [f"{c[0]}: {c[2]}" for c in checks if not c[1]]
    assert not failed, "; ".join(failed)


if __name__ == "__main__":
    for n in sorted(CRITERIA):
        evaluate(n)
        print(summary_line(n), flush=True)
        for label, ok, detail in RESULTS[n]:
            print(f"    {'ok  ' if ok else 'FAIL'} {label}: {detail}")
    sys.exit(0 if all(all(c[1] for c in RESULTS[n]) for n in CRITERIA) else 1)
