"""Adaptive quadrature and the special functions used by the closed forms.

The integrator is a globally adaptive Gauss-Kronrod (10/21) scheme that is
vectorized both over abscissae and over integrand components, so a whole
matrix-valued integrand (e.g. an n x n noise kernel) is integrated in one
pass with a shared subdivision.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureSettings",
    "QuadratureResult",
    "QuadratureError",
    "integrate_finite",
    "integrate_semi_infinite",
    "oscillation_breakpoints",
    "polylog",
    "polylog_neg_exp",
    "exp_integral_Ia",
]

# Gauss-Kronrod 21-point nodes (positive half, descending) and weights.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
# 10-point Gauss weights live on the odd-indexed Kronrod nodes.
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 21 nodes, ascending
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[11:20:2] = _WG[::-1]

_GAMMA = {1.5: math.sqrt(math.pi) / 2.0, 2.0: 1.0}


class QuadratureError(ArithmeticError):
    """Raised when an integrand produces a non-finite value."""


@dataclass(frozen=True)
class QuadratureSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 60
    tail_decay_scale: float | None = None

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_subdivisions < 0:
            raise ValueError("max_subdivisions must be non-negative")
        if self.tail_decay_scale is not None and not self.tail_decay_scale > 0:
            raise ValueError("tail_decay_scale must be positive")


@dataclass(frozen=True)
class QuadratureResult:
    value: float | np.ndarray
    error_estimate: float
    evaluations: int
    converged: bool


DEFAULT_SETTINGS = QuadratureSettings()


class _Piece:
    """One interval of the adaptive partition, in the integration variable."""

    __slots__ = ("a", "b", "tail", "value", "error")

    def __init__(self, a, b, tail):
        self.a = a
        self.b = b
        self.tail = tail
        self.value = None
        self.error = 0.0


def _evaluate(f, pieces, k0, scale, shape_holder):
    """Apply the 21-point rule to every piece with one vectorized call."""
    mids = np.array([0.5 * (p.a + p.b) for p in pieces])
    halves = np.array([0.5 * (p.b - p.a) for p in pieces])
    t = mids[:, None] + halves[:, None] * _NODES[None, :]
    tails = np.array([p.tail for p in pieces])
    jac = np.broadcast_to(halves[:, None], t.shape).copy()
    x = t.copy()
    if tails.any():
        u = t[tails]
        x[tails] = k0 - scale * np.log(u)
        jac[tails] = jac[tails] * scale / u
    flat = x.ravel()
    vals = np.asarray(f(flat))
    if vals.shape[:1] != flat.shape:
        raise ValueError(
            f"integrand returned shape {vals.shape}, expected leading axis {flat.shape[0]}"
        )
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals.reshape(flat.size, -1)))[0, 0]
        raise QuadratureError(f"non-finite integrand value at abscissa {flat[bad]!r}")
    comp = vals.shape[1:]
    shape_holder.append(comp)
    vals = vals.reshape(len(pieces), 21, -1)
    jw = jac[:, :, None]
    kron = np.einsum("pnc,n->pc", vals * jw, _KW)
    gauss = np.einsum("pnc,n->pc", vals * jw, _GW)
    err = np.max(np.abs(kron - gauss), axis=1)
    for p, v, e in zip(pieces, kron, err):
        p.value = v
        p.error = float(e)
    return flat.size


def _adaptive(f, pieces, settings, k0=0.0, scale=1.0):
    shapes: list = []
    evals = _evaluate(f, pieces, k0, scale, shapes)
    heap = [(-p.error, i, p) for i, p in enumerate(pieces)]
    heapq.heapify(heap)
    counter = len(pieces)
    total = np.sum([p.value for p in pieces], axis=0)
    err = sum(p.error for p in pieces)
    splits = 0
    converged = True

    def tolerance():
        return max(settings.abs_tol, settings.rel_tol * float(np.max(np.abs(total))))

    while err > tolerance():
        if splits >= settings.max_subdivisions:
            converged = False
            break
        # bisect the worst few pieces together so one vectorized call serves them
        batch = []
        while heap and len(batch) < 8:
            neg_e, _, p = heap[0]
            if batch and -neg_e < 0.25 * batch[0].error:
                break
            heapq.heappop(heap)
            batch.append(p)
        children = []
        for p in batch:
            m = 0.5 * (p.a + p.b)
            children.append(_Piece(p.a, m, p.tail))
            children.append(_Piece(m, p.b, p.tail))
            total = total - p.value
            err -= p.error
        splits += len(batch)
        evals += _evaluate(f, children, k0, scale, shapes)
        for c in children:
            total = total + c.value
            err += c.error
            heapq.heappush(heap, (-c.error, counter, c))
            counter += 1
        # recompute from the partition to stop drift in the running sums
        if splits % 64 < len(batch):
            live = [h[2] for h in heap]
            total = np.sum([p.value for p in live], axis=0)
            err = sum(p.error for p in live)

    live = sorted((h[2] for h in heap), key=lambda p: (p.tail, p.a))
    total = np.sum([p.value for p in live], axis=0)
    err = float(sum(p.error for p in live))
    comp = shapes[0]
    value = total.reshape(comp) if comp else float(total[0])
    return QuadratureResult(value, err, evals, converged)


def _partition(a, b, breakpoints):
    pts = sorted({float(x) for x in breakpoints if a < x < b})
    edges = [a, *pts, b]
    return [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def integrate_finite(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    settings: QuadratureSettings = DEFAULT_SETTINGS,
    breakpoints: Sequence[float] = (),
) -> QuadratureResult:
    """Integrate a vectorized ``f`` over ``(a, b)``.

    ``f`` receives a 1-D array of abscissae and returns an array whose leading
    axis matches it; trailing axes are integrated componentwise.  Endpoints are
    never evaluated.
    """
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    pieces = [_Piece(lo, hi, False) for lo, hi in _partition(a, b, breakpoints)]
    budget = QuadratureSettings(
        settings.rel_tol, settings.abs_tol,
        settings.max_subdivisions + len(pieces) - 1, settings.tail_decay_scale,
    )
    return _adaptive(f, pieces, budget)


def integrate_semi_infinite(
    f: Callable[[np.ndarray], np.ndarray],
    settings: QuadratureSettings = DEFAULT_SETTINGS,
    breakpoints: Sequence[float] = (),
    scale: float | None = None,
) -> QuadratureResult:
    """Integrate a vectorized ``f`` over ``(0, inf)``.

    The finite stretch up to the last breakpoint is partitioned at the
    breakpoints; beyond it ``k = k_last - scale * ln(u)`` maps the tail onto
    ``(0, 1]``.  ``scale`` defaults to ``settings.tail_decay_scale`` or 1.
    """
    if scale is None:
        scale = settings.tail_decay_scale or 1.0
    scale = float(min(max(scale, 1e-6), 1e6))
    bps = sorted({float(x) for x in breakpoints if x > 0 and math.isfinite(x)})
    k0 = bps[-1] if bps else 0.0
    pieces = [_Piece(lo, hi, False) for lo, hi in _partition(0.0, k0, bps)] if k0 > 0 else []
    pieces.append(_Piece(0.0, 1.0, True))
    budget = QuadratureSettings(
        settings.rel_tol, settings.abs_tol,
        settings.max_subdivisions + len(pieces) - 1, settings.tail_decay_scale,
    )
    return _adaptive(f, pieces, budget, k0=k0, scale=scale)


def oscillation_breakpoints(x: float, upper: float, limit: int = 4000) -> list[float]:
    """Half-period abscissae ``k = j*pi/(2x)`` of ``exp(2ikx)`` on ``(0, upper)``."""
    if x <= 0 or upper <= 0:
        return []
    step = math.pi / (2.0 * x)
    count = min(int(upper / step), limit)
    return [j * step for j in range(1, count + 1)]


def polylog(s: float, x: float) -> float:
    """Real polylogarithm ``Li_s(x)`` for ``x <= 0`` and ``s > 0``.

    Uses the power series for ``|x| <= 1/2`` and otherwise the Fermi-Dirac
    integral ``Li_s(-e^a) = -1/Gamma(s) * int_0^inf t^(s-1) / (e^(t-a) + 1) dt``.
    """
    if x > 0:
        raise ValueError(f"polylog is implemented for x <= 0 only, got x={x}")
    if not s > 0:
        raise ValueError(f"polylog order must be positive, got s={s}")
    if x == 0:
        return 0.0
    if x >= -0.5:
        return _polylog_series(s, x)
    return polylog_neg_exp(s, math.log(-x))


def _polylog_series(s, x):
    total = 0.0
    term = 1.0
    for j in range(1, 200):
        term *= x
        add = term / j**s
        total += add
        if abs(add) < 1e-18 * abs(total):
            break
    return total


def polylog_neg_exp(s: float, a: float) -> float:
    """``Li_s(-e^a)`` from the exponent ``a``, so large ``a`` cannot overflow."""
    if not s > 0:
        raise ValueError(f"polylog order must be positive, got s={s}")
    if not math.isfinite(a):
        raise ValueError("exponent must be finite")
    if a <= -math.log(2.0):
        return _polylog_series(s, -math.exp(a))
    gamma = _GAMMA.get(float(s)) or math.gamma(s)

    # t = u^2 removes the t^(s-1) endpoint behaviour
    def integrand(u):
        return 2.0 * u ** (2.0 * s - 1.0) * _fermi_tail(u * u - a)

    root = math.sqrt(a) if a > 0 else 0.0
    width = 1.0 / (2.0 * root) if root > 1.0 else 1.0
    # resolve the smeared step at t = a
    bps = [math.sqrt(a + c) for c in (-32.0, -8.0, -2.0, 0.0, 2.0, 8.0, 32.0) if a + c > 0]
    res = integrate_semi_infinite(
        integrand, QuadratureSettings(rel_tol=1e-13, abs_tol=1e-300, max_subdivisions=200),
        breakpoints=bps, scale=width,
    )
    return -res.value / gamma


def _fermi_tail(z):
    """``1 / (e^z + 1)`` without overflow."""
    z = np.asarray(z, dtype=float)
    return np.exp(-np.logaddexp(0.0, z))


_EULER_GAMMA = 0.57721566490153286061


def exp_integral_Ia(a: float) -> float:
    """``int_0^1 dxi / (a - ln xi) = e^a E1(a)`` for ``a > 0``."""
    if not a > 0:
        raise ValueError(f"exp_integral_Ia needs a > 0 (the integral diverges at a=0), got {a}")
    if a <= 1.0:
        # E1(a) = -gamma - ln a - sum_{k>=1} (-a)^k / (k k!)
        total = 0.0
        term = 1.0
        for k in range(1, 60):
            term *= -a / k
            add = term / k
            total += add
            if abs(add) < 1e-17 * abs(total):
                break
        return math.exp(a) * (-_EULER_GAMMA - math.log(a) - total)
    # modified Lentz on e^a E1(a) = 1/(a+1- 1/(a+3- 4/(a+5- ...)))
    tiny = 1e-300
    b = a + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h
