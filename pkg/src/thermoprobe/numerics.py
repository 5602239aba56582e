"""Shared numerical kernels.

Adaptive Gauss-Kronrod quadrature with principal-value pairing around
interior singular points, central finite differences with Richardson
extrapolation, and an adaptive explicit ODE stepper.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

EPS = np.finfo(float).eps

# 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
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
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980171786,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# Full symmetric node set on [-1, 1] and matching weights.
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]


class NumericsError(RuntimeError):
    """Base class for failures of the numerical kernels."""


class QuadratureError(NumericsError):
    """Adaptive quadrature could not reach the requested tolerance."""


class NoisyFunctionError(NumericsError):
    """Finite-difference levels disagree; the function is not smooth at x."""


class OdeError(NumericsError):
    """ODE integration failed (step underflow or step budget exhausted)."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 2000
    singular_points: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        object.__setattr__(self, "singular_points",
                           tuple(sorted(float(c) for c in self.singular_points)))


@dataclass(frozen=True)
class OdeSpec:
    local_error_tol: float = 1e-10
    initial_step: float | None = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not self.local_error_tol > 0:
            raise ValueError("local_error_tol must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def gauss_kronrod(f, a: float, b: float) -> tuple[float, float]:
    """One 21-point Gauss-Kronrod panel on [a, b] with the QUADPACK error estimate."""
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fx = np.asarray(f(centre + half * NODES), dtype=float)
    if fx.shape != NODES.shape:
        fx = np.broadcast_to(fx, NODES.shape)
    resk = float(KRONROD_WEIGHTS @ fx)
    resg = float(GAUSS_WEIGHTS @ fx)
    mean = 0.5 * resk
    resabs = float(KRONROD_WEIGHTS @ np.abs(fx)) * abs(half)
    resasc = float(KRONROD_WEIGHTS @ np.abs(fx - mean)) * abs(half)
    err = abs((resk - resg) * half)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50.0 * EPS):
        err = max(50.0 * EPS * resabs, err)
    if not np.isfinite(resk):
        raise QuadratureError(f"non-finite integrand value on [{a}, {b}]")
    return resk * half, err


def _adaptive(f, pieces: Sequence[tuple[float, float]], spec: QuadratureSpec) -> tuple[float, float]:
    """Globally adaptive bisection over a list of panels sharing one error budget."""
    heap = []
    total = 0.0
    total_err = 0.0
    for a, b in pieces:
        if b <= a:
            continue
        val, err = gauss_kronrod(f, a, b)
        total += val
        total_err += err
        heapq.heappush(heap, (-err, a, b, val))
    n_sub = len(heap)
    while heap and total_err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if n_sub >= spec.max_subdivisions:
            raise QuadratureError(
                f"no convergence after {n_sub} subdivisions "
                f"(value {total:.6g}, error estimate {total_err:.3g})")
        neg_err, a, b, val = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b) or (b - a) <= 4 * EPS * max(abs(a), abs(b)):
            raise QuadratureError(f"interval [{a}, {b}] cannot be bisected further")
        v1, e1 = gauss_kronrod(f, a, mid)
        v2, e2 = gauss_kronrod(f, mid, b)
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, a, mid, v1))
        heapq.heappush(heap, (-e2, mid, b, v2))
        n_sub += 1
    # Re-sum to shed accumulated cancellation in the running totals.
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    return total, total_err


def _split(a: float, b: float, points) -> list[tuple[float, float]]:
    edges = [a] + sorted(p for p in points if a < p < b) + [b]
    return list(zip(edges[:-1], edges[1:]))


def integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
              spec: QuadratureSpec | None = None,
              breakpoints: Sequence[float] = ()) -> tuple[float, float]:
    """Integrate a vectorised integrand ``f`` over [a, b].

    Interior ``spec.singular_points`` are excised with symmetric windows
    (c - d, c + d); each window is then integrated as the symmetrised
    integrand f(c + t) + f(c - t) over t in (0, d], with adaptive
    bisection generating shells that shrink by halves towards t = 0.
    This yields the Cauchy principal value for
    odd singularities and the ordinary improper integral for integrable
    (e.g. logarithmic) ones. ``breakpoints`` are plain panel boundaries.

    Returns ``(value, error_estimate)``.
    """
    spec = spec or QuadratureSpec()
    if not a < b:
        raise ValueError(f"integration requires a < b, got [{a}, {b}]")
    sing = spec.singular_points
    for c in sing:
        if not a < c < b:
            raise ValueError(f"singular point {c} is not strictly inside [{a}, {b}]")
    if len(set(sing)) != len(sing):
        raise ValueError("singular points must be distinct")

    if not sing:
        return _adaptive(f, _split(a, b, breakpoints), spec)

    edges = [a, *sing, b]
    widths = []
    for i, c in enumerate(sing):
        gap = min(c - edges[i], edges[i + 2] - c)
        widths.append(0.25 * gap)

    pieces = []
    lo = a
    for c, d in zip(sing, widths):
        pieces.extend(_split(lo, c - d, breakpoints))
        lo = c + d
    pieces.extend(_split(lo, b, breakpoints))
    def paired_for(c):
        # Mirrored abscissae make odd singular parts cancel pointwise; the
        # Gauss-Kronrod nodes never touch t = 0, and bisection towards it
        # produces the geometrically shrinking shells.
        def paired(t):
            return f(c + t) + f(c - t)
        return paired

    # The regular part and the windows may cancel, so budgets derived from
    # their own sizes can overshoot the target on the total; tighten and
    # retry by the observed cancellation factor.
    tighten = 1.0
    for _ in range(4):
        # Half the error budget goes to the regular part, half to the windows.
        regular_spec = QuadratureSpec(rel_tol=0.5 * tighten * spec.rel_tol,
                                      abs_tol=0.5 * tighten * spec.abs_tol,
                                      max_subdivisions=spec.max_subdivisions)
        regular, regular_err = _adaptive(f, pieces, regular_spec)
        # Windows are small pieces of the whole; judge them against the
        # regular part rather than against their own (possibly tiny) size.
        window_abs = (0.4 * tighten * max(spec.abs_tol, spec.rel_tol * abs(regular))
                      / len(sing))
        window_spec = QuadratureSpec(rel_tol=tighten * spec.rel_tol, abs_tol=window_abs,
                                     max_subdivisions=spec.max_subdivisions)
        parts = [regular]
        total_err = regular_err
        for c, d in zip(sing, widths):
            value, err = _adaptive(paired_for(c), [(0.0, d)], window_spec)
            parts.append(value)
            total_err += err
        total = math.fsum(parts)
        target = max(spec.abs_tol, spec.rel_tol * abs(total))
        if total_err <= target:
            return total, total_err
        tighten *= 0.5 * target / total_err
    raise QuadratureError(
        f"error estimate {total_err:.3g} exceeds tolerance for value {total:.6g}")


def differentiate(f: Callable, x: float, order: int = 1, h0: float | None = None,
                  lower: float | None = None, upper: float | None = None,
                  levels: int = 14):
    """Derivative of ``f`` at ``x`` by central differences with two Richardson levels.

    A geometric ladder of steps h0 / 2**k is scanned and the step whose
    extrapolation levels agree best is kept, which balances truncation
    against roundoff. ``lower``/``upper`` bound the sampled abscissae
    (open bounds); the step shrinks until x +- 2h stays inside.
    ``f`` may return an array; the error estimate is then a max-norm.

    Raises NoisyFunctionError when one-sided and central estimates
    disagree by more than ten times the combined error budget.
    """
    if order not in (1, 2):
        raise ValueError("only first and second derivatives are supported")
    x = float(x)
    h = float(h0) if h0 is not None else 0.1 * max(abs(x), 1e-3)
    while ((lower is not None and x - 2 * h <= lower)
           or (upper is not None and x + 2 * h >= upper)):
        h *= 0.5
        if h <= 8 * EPS * max(abs(x), 1.0):
            raise ValueError(f"no admissible step at x={x} inside ({lower}, {upper})")

    cache: dict[float, np.ndarray] = {}

    def fx(t):
        if t not in cache:
            cache[t] = np.asarray(f(t))
        return cache[t]

    f0 = fx(x)
    steps = [h * 0.5 ** k for k in range(levels)]
    if order == 1:
        diffs = [(fx(x + s) - fx(x - s)) / (2 * s) for s in steps]
    else:
        diffs = [(fx(x + s) - 2 * f0 + fx(x - s)) / s ** 2 for s in steps]
    r1 = [(4 * diffs[k + 1] - diffs[k]) / 3 for k in range(levels - 1)]
    r2 = [(16 * r1[k + 1] - r1[k]) / 15 for k in range(levels - 2)]

    scale = float(np.max(np.abs(f0))) if np.size(f0) else 0.0
    best = None
    for k in range(levels - 2):
        roundoff = 10 * EPS * max(scale, 1e-300) / steps[k + 2] ** order
        err = float(np.max(np.abs(r2[k] - r1[k + 1]))) + roundoff
        if best is None or err < best[1]:
            best = (k, err)
    k, err = best
    value = r2[k]

    if order == 1:
        s = steps[k + 2]
        fwd = (-3 * f0 + 4 * fx(x + s) - fx(x + 2 * s)) / (2 * s)
        bwd = (3 * f0 - 4 * fx(x - s) + fx(x - 2 * s)) / (2 * s)
        trunc = float(np.max(np.abs(diffs[k + 2] - diffs[min(k + 3, levels - 1)])))
        budget = err + 6 * trunc + 10 * EPS * max(scale, 1e-300) / s
        mismatch = float(np.max(np.abs(fwd - bwd)))
        if mismatch > 10 * budget:
            raise NoisyFunctionError(
                f"one-sided derivatives disagree at x={x}: mismatch {mismatch:.3g}, "
                f"budget {budget:.3g}")
    return value, err


def ode_integrate(rhs: Callable[[float, np.ndarray], np.ndarray], y0, t_span,
                  spec: OdeSpec | None = None) -> np.ndarray:
    """Integrate y' = rhs(t, y) with an embedded 8(5,3) Dormand-Prince pair.

    The local error per step stays below ``spec.local_error_tol`` (for
    |y| <= 1, as for density matrices). Returns y at ``t_span[1]``.
    """
    spec = spec or OdeSpec()
    t0, t1 = map(float, t_span)
    y0 = np.asarray(y0)
    if t1 == t0:
        return y0.copy()
    budget = {"calls": 0}
    limit = 12 * spec.max_steps + 2

    def counted(t, y):
        budget["calls"] += 1
        if budget["calls"] > limit:
            raise OdeError(f"step budget of {spec.max_steps} steps exhausted at t={t:.6g}")
        return rhs(t, y)

    # scipy accepts a step when err <= atol + rtol |y|; halving both keeps
    # the local error below local_error_tol for |y| <= 1
    half = 0.5 * spec.local_error_tol
    sol = solve_ivp(counted, (t0, t1), y0, method="DOP853", rtol=half, atol=half,
                    first_step=spec.initial_step)
    if sol.status != 0:
        raise OdeError(f"integration failed: {sol.message}")
    return sol.y[:, -1]
