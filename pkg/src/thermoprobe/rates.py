"""Bath-response quantities seen by a uniformly moving two-level probe.

All quantities are in scaled units (c = hbar = k_B = 1). The probe moves
with rapidity ``u`` through a thermal massless scalar field at
temperature ``T`` and couples either to the field amplitude (UDW) or to
its proper-time derivative (TD).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import QuadratureSpec, integrate

EULER_GAMMA = 0.5772156649015329

# Below this rapidity the comoving (u -> 0) limits are used.
U_MIN = 1e-6

# Integrals feeding N are needed to relative accuracy even when N is
# exponentially small, so the absolute floor sits near underflow.
_RATE_QUAD = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300, max_subdivisions=4000)

# Target accuracy of the Lamb shift relative to its magnitude.
_LAMB_REL_TOL = 1e-10

# Bose tail cut-off, in units of T, beyond the lower integration limit.
_TAIL = 60.0


class DomainError(ValueError):
    """Argument outside the physical domain of an operation."""


class CouplingKind(str, enum.Enum):
    UDW = "udw"
    TD = "td"

    @classmethod
    def parse(cls, value) -> "CouplingKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown coupling {value!r}; expected 'udw' or 'td'") from None


@dataclass(frozen=True)
class ProbeParams:
    """Controls of the experiment: gap, coupling, rapidity and initial state."""

    omega0: float
    lam: float
    u: float = 0.0
    theta: float = math.pi
    phi: float = 0.0
    coupling: CouplingKind = CouplingKind.UDW

    def __post_init__(self):
        object.__setattr__(self, "coupling", CouplingKind.parse(self.coupling))
        for name in ("omega0", "lam", "u", "theta", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.omega0 > 0:
            raise DomainError(f"omega0 must be > 0, got {self.omega0}")
        if self.lam < 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if self.u < 0:
            raise DomainError(f"rapidity u must be >= 0, got {self.u}")
        if not 0 <= self.theta <= math.pi:
            raise DomainError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0 <= self.phi < 2 * math.pi:
            raise DomainError(f"phi must lie in [0, 2 pi), got {self.phi}")

    @property
    def velocity(self) -> float:
        return math.tanh(self.u)


@dataclass(frozen=True)
class BathParams:
    temperature: float
    cutoff_eps: float = 0.01
    euler_gamma: float = EULER_GAMMA

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise DomainError(f"temperature must be > 0, got {self.temperature}")
        if not (math.isfinite(self.cutoff_eps) and self.cutoff_eps > 0):
            raise DomainError(f"cutoff_eps must be > 0, got {self.cutoff_eps}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature


@dataclass(frozen=True)
class RateBundle:
    """Rates at the bare gap, consumed by the dynamics."""

    gamma0: float
    n_mean: float
    dn_dT: float
    delta: float
    omega_shifted: float
    m_factor: float


def bose_occupancy(k, T):
    """Planck occupation 1/(exp(k/T) - 1), overflow-free for any k/T > 0."""
    k = np.asarray(k, dtype=float)
    if T <= 0 or not math.isfinite(T):
        raise DomainError(f"temperature must be > 0, got {T}")
    if np.any(k <= 0):
        raise DomainError("momentum k must be > 0")
    x = k / T
    out = np.exp(-x) / -np.expm1(-x)
    return out if out.ndim else float(out)


def _bose(x):
    # n(x) with x = k/T > 0; callers guarantee positivity.
    return np.exp(-x) / -np.expm1(-x)


def _planck(omega: float, T: float) -> float:
    x = omega / T
    return math.exp(-x) / -math.expm1(-x) if x < 745 else 0.0


def _planck_dT(omega: float, T: float) -> float:
    x = omega / T
    if x > 745:
        return 0.0
    n = math.exp(-x) / -math.expm1(-x)
    return x / T * n * (n + 1.0)


def gamma_vacuum(p: ProbeParams) -> float:
    """Vacuum decay rate at the bare gap."""
    lam2 = p.lam * p.lam
    if p.coupling is CouplingKind.UDW:
        return lam2 * p.omega0 / (2 * math.pi)
    return lam2 * (2 * math.cosh(2 * p.u) + 1) * p.omega0 ** 3 / (6 * math.pi)


def _td_prefactor(p: ProbeParams) -> float:
    return 3.0 / (2 * p.omega0 ** 3 * math.sinh(p.u) * (2 * math.cosh(2 * p.u) + 1))


def _td_moment(p: ProbeParams, T: float, weight) -> float:
    """Integral of weight(k) over [omega0 e^-u, omega0 e^u], Bose tail truncated."""
    lo = p.omega0 * math.exp(-p.u)
    hi = min(p.omega0 * math.exp(p.u), lo + _TAIL * T)
    if lo / T > 745:
        return 0.0
    marks = [lo + T * m for m in (0.5, 2.0, 8.0, 25.0)]
    value, _ = integrate(weight, lo, hi, _RATE_QUAD, breakpoints=marks)
    return value


def mean_excitation(p: ProbeParams, b: BathParams) -> float:
    """Mean excitation N(omega0) seen by the moving detector."""
    T = b.temperature
    if p.u < U_MIN:
        return _planck(p.omega0, T)
    if p.coupling is CouplingKind.UDW:
        x = p.omega0 / T
        lo = x * math.exp(-p.u)
        width = 2 * x * math.sinh(p.u)
        # ln[(1 - e^-A)/(1 - e^-B)] with A - B = width, written without cancellation
        ratio = math.exp(-lo) * -math.expm1(-width) / -math.expm1(-lo)
        return T / (2 * p.omega0 * math.sinh(p.u)) * math.log1p(ratio)
    moment = _td_moment(p, T, lambda k: k * k * _bose(k / T))
    return _td_prefactor(p) * moment


def mean_excitation_dT(p: ProbeParams, b: BathParams) -> float:
    """Temperature derivative of ``mean_excitation``."""
    T = b.temperature
    if p.u < U_MIN:
        return _planck_dT(p.omega0, T)
    if p.coupling is CouplingKind.UDW:
        x = p.omega0 / T
        a_hi = x * math.exp(p.u)
        a_lo = x * math.exp(-p.u)

        def weighted(y):
            return y * _planck(y, 1.0) if y < 745 else 0.0

        n = mean_excitation(p, b)
        return n / T - (weighted(a_hi) - weighted(a_lo)) / (2 * p.omega0 * math.sinh(p.u))

    def integrand(k):
        n = _bose(k / T)
        return k ** 3 / T ** 2 * n * (n + 1.0)

    return _td_prefactor(p) * _td_moment(p, T, integrand)


def _x_bose(x):
    # x n(x) = x / (e^x - 1), finite for all x > 0 (tends to 1 as x -> 0).
    return x * np.exp(-x) / -np.expm1(-x)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_FACTORIALS = np.array([math.factorial(n + 1) for n in range(1, 25)], dtype=float)


def _expm1_minus_x(x):
    """e^x - 1 - x, exact to rounding for small x."""
    x = np.asarray(x, dtype=float)
    series = np.zeros_like(x)
    term = x * x / 2
    for n in range(3, 20):
        series = series + term
        term = term * x / n
    return np.where(x < 0.5, series, np.expm1(x) - x)


def _bose_minus_classical(x):
    """1/(e^x - 1) - 1/x, the occupancy with its classical (Rayleigh-Jeans) part removed."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        xs = np.where(x < 1.0, x, 0.5)
        small = -_expm1_minus_x(xs) / (xs * np.expm1(xs))
        large = 1.0 / np.expm1(np.maximum(x, 1.0)) - 1.0 / np.maximum(x, 1.0)
    return np.where(x < 1.0, small, large)


def _classical_kernel_tail(r_max: float, u: float) -> float:
    """int_0^K kernel(k) / k dk for K = w / r_max, independent of w.

    The integral over the whole half-line vanishes: in terms of dilogarithms
    it equals Phi(y e^-u) - Phi(y e^u) as y -> infinity, where
    Phi(y) = Re Li2(y) - Li2(-y) tends to pi^2/2. What remains is minus the
    tail beyond K, which in r = w/k reads
    -int_0^{r_max} 2 atanh(2 r sinh u / (1 - r^2)) dr / r.
    """
    s = 2 * math.sinh(u)

    def f(r):
        return 2 * np.arctanh(r * s / ((1 - r) * (1 + r))) / r

    spec = QuadratureSpec(rel_tol=1e-13, abs_tol=1e-300, max_subdivisions=500)
    value, _ = integrate(f, 0.0, r_max, spec)
    return -value


def _moment_log_derivative(X, power: int):
    """X d/dX [X^(p+1) n(X)] / X^... i.e. X^p psi(X) [(p+1) - X - psi(X)], psi = X n(X)."""
    psi = _x_bose(X)
    with np.errstate(over="ignore", invalid="ignore"):
        # for small X use (p+1) - psi = p + (e^X - 1 - X)/(e^X - 1)
        small = power + _expm1_minus_x(X) / np.expm1(np.minimum(X, 0.5)) - X
    bracket = np.where(X < 0.5, small, (power + 1) - X - psi)
    return X ** power * psi * bracket


def _moment_difference(k, T: float, u: float, power: int):
    """H(k e^-u) - H(k e^u) for H(k) = k^(power+1) n(k), without cancellation.

    With x = k/T the two terms are close only when the spread
    x_b - x_a = 2 x sinh(u) is small; elsewhere plain subtraction is safe.
    For a small spread the difference is formed as
      * u <= 0.5: -int_{-u}^{u} dH(k e^s)/ds ds by Gauss-Legendre (the
        integrand varies on a scale >= 1 in X = x e^s, so it is smooth);
      * u > 0.5, power = 0: psi_a psi_b (E(x_b) - E(x_a)) with
        E(x) = (e^x - 1)/x summed as a series of positive terms;
      * u > 0.5, power > 0: H(a) < H(b)/e^2 there, so subtraction is safe.
    """
    k = np.asarray(k, dtype=float)
    x = k / T
    scale = T ** (power + 1)
    xa = x * math.exp(-u)
    xb = x * math.exp(u)
    h_a = xa ** power * _x_bose(xa)
    h_b = xb ** power * _x_bose(xb)
    direct = h_a - h_b
    close = 2 * x * math.sinh(u) < 1.0
    if not np.any(close):
        return scale * direct
    if u <= 0.5:
        xc = np.where(close, x, 1e-3)
        X = np.multiply.outer(xc, np.exp(u * _GL_NODES))
        near = -u * (_moment_log_derivative(X, power) @ _GL_WEIGHTS)
    elif power == 0:
        n = np.arange(1, 25)
        xbc = np.where(close, xb, 1e-3)
        # x^n 2 sinh(n u) = x_b^n (1 - e^{-2 n u})
        with np.errstate(under="ignore"):
            e_diff = (np.power.outer(xbc, n) * -np.expm1(-2 * n * u) / _FACTORIALS).sum(axis=-1)
        near = h_a * h_b * e_diff
    else:
        near = direct
    return scale * np.where(close, near, direct)


def _thermal_log_integral(w: float, u: float, T: float, power: int, abs_tol: float) -> float:
    """Principal-value integral of k^power n_k times the Lamb-shift log kernel.

    The kernel is log[(k e^-u + w)/(k e^u + w)] + log|w - k e^u| - log|w - k e^-u|.
    Far from the singularities (k > K = 4 w e^u) it is evaluated in the
    cancellation-free form 2 atanh(2 (w/k) sinh u / (1 - (w/k)^2)); the three
    logarithms individually grow like u whereas their sum decays like w/k.

    On [0, K] the regular logarithm is integrated directly and the two
    singular ones are rescaled so their singularities merge at k = w:
        int_0^K k^p n_k log|w - k e^{+-u}| dk = int_0^{K e^{+-u}} log|w - k| H(k e^{-+u}) / k dk,
    with H(k) = k^(p+1) n_k. Their difference is one integral over
    [0, K e^-u] of log|w - k| (H(k e^-u) - H(k e^u)) / k plus a regular
    remainder over [K e^-u, K e^u]. For p = 0 each term diverges at k -> 0
    and the rescaling moves the lower cut-off by e^{+-u}, leaving the
    boundary term -2 u H(0) log w with H(0) = T.

    For p = 0 and T >> w the occupancy is close to T/k over a wide range,
    and the pieces above are each of order u T while their sum is of order
    u w. In that case the classical part T/k is integrated in closed form
    and only n_k - T/k (bounded, and with H(0) = 0) goes through the
    quadratures.
    """
    s = 2 * math.sinh(u)
    eu = math.exp(u)
    k_top = _TAIL * T
    k_near = min(4 * w * eu, k_top)

    classical = power == 0 and k_near < k_top

    def regular(k):
        z = k * s / (w + k * eu)
        log_ratio = np.where(z < 0.5, np.log1p(-np.minimum(z, 0.5)),
                             np.log(w + k / eu) - np.log(w + k * eu))
        if classical:
            return _bose_minus_classical(k / T) * log_ratio
        return k ** power * T * _x_bose(k / T) * (log_ratio / k)

    def merged(k):
        with np.errstate(divide="ignore"):
            log_dist = np.log(np.abs(w - k))
        return log_dist * _moment_difference(k, T, u, power) / k

    def remainder(k):
        with np.errstate(divide="ignore"):
            log_dist = np.log(np.abs(w - k))
        x = k / (eu * T)
        if classical:
            return log_dist * _bose_minus_classical(x) / eu
        return log_dist * T ** (power + 1) * x ** power * _x_bose(x) / k

    def far(k):
        r = w / k
        kernel = 2 * np.arctanh(r * s / ((1 - r) * (1 + r)))
        if classical:
            return _bose_minus_classical(k / T) * kernel
        return k ** power * T * _x_bose(k / T) * (kernel / k)

    marks = [T * f * m for f in (1 / eu, 1.0, eu) for m in (1.0, 5.0, 20.0)]
    pieces = [(regular, 0.0, k_near), (merged, 0.0, k_near / eu),
              (remainder, k_near / eu, k_near * eu)]
    if k_near < k_top:
        pieces.append((far, k_near, k_top))
    value = 0.0
    for f, a, b in pieces:
        spec = QuadratureSpec(rel_tol=_LAMB_REL_TOL, abs_tol=abs_tol / len(pieces),
                              max_subdivisions=4000,
                              singular_points=(w,) if a < w < b else ())
        part, _ = integrate(f, a, b, spec, breakpoints=[m for m in marks if a < m < b])
        value += part
    if classical:
        value += T * _classical_kernel_tail(w / k_top, u)
    elif power == 0:
        value -= 2 * u * T * math.log(w)
    return value


def _comoving_pole_integral(w: float, T: float, power: int, abs_tol: float) -> float:
    """PV of int k^power n_k k / (k^2 - w^2) dk, the u -> 0 limit of the log kernel.

    For power = 0 the classical part T/k of n_k is integrated in closed
    form, PV int_0^K T / (k^2 - w^2) dk = T/(2w) log((K - w)/(K + w)).
    """
    k_max = max(_TAIL * T, 10 * w)
    classical = power == 0

    def integrand(k):
        pole = k / ((k - w) * (k + w))
        if classical:
            return _bose_minus_classical(k / T) * pole
        return k ** power * _bose(k / T) * pole

    marks = [T * m for m in (1.0, 5.0, 20.0)]
    spec = QuadratureSpec(rel_tol=_LAMB_REL_TOL, abs_tol=abs_tol, max_subdivisions=4000,
                          singular_points=(w,))
    value, _ = integrate(integrand, 0.0, k_max, spec,
                         breakpoints=[m for m in marks if m < k_max])
    if classical:
        value += T / (2 * w) * math.log((k_max - w) / (k_max + w))
    return value


def lamb_shift(p: ProbeParams, b: BathParams) -> float:
    """Lamb shift Delta(omega0) at the bare gap."""
    return lamb_shift_at(p.omega0, p, b)


def lamb_shift_at(omega: float, p: ProbeParams, b: BathParams) -> float:
    """Delta(omega) = sgn(omega) F(|omega|) for either sign of omega.

    The thermal integrands have logarithmic singularities at
    |omega| e^-u and |omega| e^u, where the log is taken of the absolute
    value (principal value). Below ``U_MIN`` the u -> 0 kernel
    -4 k w u / (w^2 - k^2) is used, whose pole at k = w is a Cauchy
    principal value.
    """
    if omega == 0:
        return 0.0
    if p.lam == 0:
        return 0.0
    w = abs(omega)
    sign = 1.0 if omega > 0 else -1.0
    T = b.temperature
    eps = b.cutoff_eps
    lam2 = p.lam * p.lam
    log_term = math.log(eps * math.exp(b.euler_gamma - 1) * w)
    if p.coupling is CouplingKind.UDW:
        vacuum = lam2 * w * log_term / (4 * math.pi ** 2)
    else:
        vacuum = (lam2 * (2 * math.cosh(2 * p.u) + 1) * w ** 3 / (12 * math.pi ** 2)
                  * (3 / (w * eps) ** 2 + log_term))

    power = 0 if p.coupling is CouplingKind.UDW else 2
    # When the bath is cold the thermal part is exponentially small next to
    # the vacuum part; accuracy is then judged against the whole shift.
    floor = _LAMB_REL_TOL * max(abs(vacuum), 1e-300)
    if p.u < U_MIN:
        scale = lam2 * w / (2 * math.pi ** 2)
        thermal = scale * _comoving_pole_integral(w, T, power, floor / scale)
    else:
        scale = lam2 / (8 * math.pi ** 2 * math.sinh(p.u))
        thermal = scale * _thermal_log_integral(w, p.u, T, power, floor / scale)
    return sign * (vacuum + thermal)


def rate_bundle(p: ProbeParams, b: BathParams, include_lamb: bool = True) -> RateBundle:
    n = mean_excitation(p, b)
    delta = lamb_shift(p, b) if include_lamb else 0.0
    return RateBundle(
        gamma0=gamma_vacuum(p),
        n_mean=n,
        dn_dT=mean_excitation_dT(p, b),
        delta=delta,
        omega_shifted=p.omega0 + 2 * delta,
        m_factor=2 * n + 1,
    )
