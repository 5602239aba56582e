"""Quantum and classical Fisher information for temperature (and angle) estimation.

Three independent routes to the temperature QFI are provided:

* ``qfi_temperature_closed`` -- the analytic expression in (g, M, theta),
* ``qfi_bloch`` -- the Bloch-vector formula,
* ``qfi_sld`` -- Tr(d_rho L) with the symmetric logarithmic derivative L.

Derivatives with respect to T act through the mean excitation N only; the
Lamb-shifted frequency Omega is treated as a fixed parameter of the state,
so every route is independent of Omega and of the initial phase phi.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (SIGMA_X, SIGMA_Y, SIGMA_Z, BlochVector, EvolutionContext, ProbeState, half_angles,
                       bloch_vector, evolve)
from .numerics import differentiate
from .rates import BathParams, DomainError, ProbeParams, RateBundle, mean_excitation, rate_bundle

# Eigenvalue-pair floor below which the SLD is left undetermined (set to 0).
SLD_NULL_TOL = 1e-12
# Threshold on 1 - |w| for the pure branch of the Bloch formula.
PURE_TOL = 1e-9
# Largest condition number accepted when inverting the QFI matrix.
MAX_CONDITION = 1e12
# Below this g M the closed form is replaced by its two-term series.
SERIES_GM = 1e-6


class EstimationError(ArithmeticError):
    """Estimation quantity undefined for the given input."""


class SingularMatrixError(EstimationError):
    pass


class IllPosedSldWarning(UserWarning):
    """The SLD equation has no solution on a null eigen-subspace."""


@dataclass(frozen=True)
class ParamDerivatives:
    d_rho_dT: np.ndarray
    d_rho_dTheta: np.ndarray


@dataclass(frozen=True)
class SldOperator:
    L: np.ndarray


@dataclass(frozen=True)
class QfiMatrix:
    """2x2 QFI matrix over the parameter order (T, theta)."""

    h: np.ndarray

    @property
    def h_tt(self) -> float:
        return float(self.h[0, 0])

    @property
    def h_ttheta(self) -> float:
        return float(self.h[0, 1])

    @property
    def h_thetatheta(self) -> float:
        return float(self.h[1, 1])


@dataclass(frozen=True)
class EstimationReport:
    qfi_closed: float
    qfi_bloch: float
    qfi_sld: float
    fi_sigma_z: float
    qfi_matrix: QfiMatrix
    delta_i: float
    delta_s: float
    ratio_r: float
    compat_residual: float


# --------------------------------------------------------------------------
# closed-form state and its analytic derivatives


@dataclass(frozen=True)
class _Model:
    """Everything the closed-form state depends on, without range checks."""

    theta: float
    phi: float
    g: float
    n: float
    tau: float
    omega: float

    @property
    def m(self) -> float:
        return 2 * self.n + 1

    @property
    def gm(self) -> float:
        return self.g * self.m


def _model(p: ProbeParams, ctx: EvolutionContext) -> _Model:
    return _Model(p.theta, p.phi, ctx.g, ctx.bundle.n_mean, ctx.tau, ctx.bundle.omega_shifted)


def _phase(mod: _Model) -> complex:
    if mod.tau == 0:
        return complex(np.exp(1j * mod.phi))
    return complex(np.exp(-1j * mod.tau * mod.omega + 1j * mod.phi))


def _rho(mod: _Model) -> np.ndarray:
    """Closed-form density matrix, valid for any real theta (used by finite differences)."""
    decay = math.exp(-mod.gm)
    loss = -math.expm1(-mod.gm)
    ch, sh = half_angles(mod.theta)
    excited = ch * ch * decay + loss * mod.n / mod.m
    ground = sh * sh * decay + loss * (mod.n + 1) / mod.m
    coh = ch * sh * math.exp(-mod.gm / 2) * _phase(mod)
    return np.array([[excited, coh], [np.conj(coh), ground]], dtype=complex)


def _drho_dn(mod: _Model) -> np.ndarray:
    decay = math.exp(-mod.gm)
    loss = -math.expm1(-mod.gm)
    m = mod.m
    ch, sh = half_angles(mod.theta)
    d_exc = -2 * mod.g * decay * (ch * ch - mod.n / m) + loss / m ** 2
    d_coh = -mod.g * ch * sh * math.exp(-mod.gm / 2) * _phase(mod)
    return np.array([[d_exc, d_coh], [np.conj(d_coh), -d_exc]], dtype=complex)


def _drho_dtheta(mod: _Model) -> np.ndarray:
    decay = math.exp(-mod.gm)
    ch, sh = half_angles(mod.theta)
    d_exc = -ch * sh * decay
    d_coh = 0.5 * (ch - sh) * (ch + sh) * math.exp(-mod.gm / 2) * _phase(mod)
    return np.array([[d_exc, d_coh], [np.conj(d_coh), -d_exc]], dtype=complex)


def _determinant(mod: _Model) -> float:
    """det(rho) as a sum of non-negative terms (accurate for nearly pure states)."""
    decay = math.exp(-mod.gm)
    loss = -math.expm1(-mod.gm)
    n, m = mod.n, mod.m
    ch, sh = half_angles(mod.theta)
    c2, s2 = ch * ch, sh * sh
    return (decay * loss * (n * (c2 * c2 + s2 * s2) + c2 * c2) / m
            + n * (n + 1) * (loss / m) ** 2)


def mixedness(p: ProbeParams, ctx: EvolutionContext) -> float:
    """1 - |w|^2 = 4 det(rho) of the evolved state, without cancellation."""
    return 4 * _determinant(_model(p, ctx))


# --------------------------------------------------------------------------
# derivatives


def d_rho(p: ProbeParams, b: BathParams, ctx: EvolutionContext, which: str = "T",
          mode: str = "analytic") -> np.ndarray:
    """Derivative of the evolved state with respect to ``which`` in {"T", "theta"}.

    ``mode="fd"`` uses Richardson-extrapolated central differences of the
    closed-form state. For T the rates are re-evaluated at T +- h while g
    and Omega are held fixed (they do not depend on T), matching the
    analytic derivative, which acts through N alone.
    """
    mod = _model(p, ctx)
    if which not in ("T", "theta"):
        raise ValueError(f"unknown parameter {which!r}; expected 'T' or 'theta'")
    if mode == "analytic":
        if which == "T":
            return ctx.bundle.dn_dT * _drho_dn(mod)
        return _drho_dtheta(mod)
    if mode != "fd":
        raise ValueError(f"unknown derivative mode {mode!r}")
    if which == "theta":
        def f(theta):
            return _rho(replace(mod, theta=theta))
        value, _ = differentiate(f, p.theta, h0=1e-4 * max(1.0, abs(p.theta)))
        return value

    def f(T):
        return _rho(replace(mod, n=mean_excitation(p, BathParams(T, b.cutoff_eps))))

    value, _ = differentiate(f, b.temperature, h0=1e-2 * b.temperature, lower=0.0)
    return value


def param_derivatives(p: ProbeParams, b: BathParams, ctx: EvolutionContext,
                      mode: str = "analytic") -> ParamDerivatives:
    return ParamDerivatives(d_rho(p, b, ctx, "T", mode), d_rho(p, b, ctx, "theta", mode))


# --------------------------------------------------------------------------
# SLD and QFI routes


def _as_matrix(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, ProbeState) else np.asarray(rho, dtype=complex)


def _spectrum(rho, det: float | None):
    mat = _as_matrix(rho)
    vals, vecs = np.linalg.eigh(mat)
    if det is not None:
        # eigh resolves a tiny eigenvalue only to absolute precision; the
        # determinant gives it to relative precision.
        radius = math.sqrt(max(0.0, 1 - 4 * det))
        small = 2 * det / (1 + radius)
        vals = np.array([small, 1 - small])
    return vals, vecs


def _sld_frame(rho, drho, det):
    """Eigen-frame of rho, d_rho in that frame, and the null mask of p_i + p_j.

    With an accurate spectrum (``det`` given) only exactly vanishing pairs
    are null; otherwise pairs below SLD_NULL_TOL are, since eigh resolves
    eigenvalues only to absolute precision.
    """
    vals, vecs = _spectrum(rho, det)
    d = vecs.conj().T @ np.asarray(drho, dtype=complex) @ vecs
    denom = vals[:, None] + vals[None, :]
    null = denom <= (0.0 if det is not None else SLD_NULL_TOL)
    if np.any(null & (np.abs(d) > 1e-10)):
        warnings.warn("SLD is ill-posed: derivative has weight on the null space of rho",
                      IllPosedSldWarning, stacklevel=3)
    return vals, vecs, d, null


def sld(rho, drho, det: float | None = None) -> SldOperator:
    """Symmetric logarithmic derivative: solves d_rho = (L rho + rho L) / 2.

    ``det`` optionally supplies det(rho) from an accurate closed form, used
    for the eigenvalues of nearly pure states.
    """
    vals, vecs, d, null = _sld_frame(rho, drho, det)
    denom = vals[:, None] + vals[None, :]
    lv = np.where(null, 0.0, 2 * d / np.where(null, 1.0, denom))
    L = vecs @ lv @ vecs.conj().T
    return SldOperator(0.5 * (L + L.conj().T))


def lyapunov_residual(rho, drho, L: SldOperator) -> float:
    mat = _as_matrix(rho)
    drho = np.asarray(drho, dtype=complex)
    return float(np.linalg.norm(0.5 * (L.L @ mat + mat @ L.L) - drho))


def qfi_sld(rho, drho, det: float | None = None) -> float:
    """H = Tr(d_rho L), evaluated in the eigenbasis of rho."""
    vals, vecs, d, null = _sld_frame(rho, drho, det)
    denom = vals[:, None] + vals[None, :]
    terms = np.where(null, 0.0, 2 * np.abs(d) ** 2 / np.where(null, 1.0, denom))
    return float(max(0.0, math.fsum(terms.ravel())))


def qfi_bloch(w: BlochVector, dw, mix: float | None = None) -> float:
    """Single-qubit QFI from the Bloch vector w and its derivative dw.

    ``mix`` optionally supplies 1 - |w|^2 from an accurate closed form; the
    mixed-state branch is then used whenever it is positive. Without it,
    the pure branch applies once |w| >= 1 - PURE_TOL.
    """
    wv = w.as_array() if isinstance(w, BlochVector) else np.asarray(w, dtype=float)
    dv = dw.as_array() if isinstance(dw, BlochVector) else np.asarray(dw, dtype=float)
    dot = float(wv @ dv)
    speed = float(dv @ dv)
    if mix is not None:
        if mix > 0:
            return speed + dot * dot / mix
        pure = True
    else:
        norm = float(np.linalg.norm(wv))
        if norm > 1 + 1e-12:
            raise DomainError(f"Bloch vector norm {norm:.15g} exceeds 1")
        pure = norm >= 1 - PURE_TOL
        if not pure:
            return speed + dot * dot / (1 - norm * norm)
    if abs(dot) > PURE_TOL:
        raise EstimationError(
            f"pure state with non-tangent derivative (w . dw = {dot:.3g}); family is inconsistent")
    return speed


def _bloch_of(matrix: np.ndarray) -> np.ndarray:
    return np.array([2 * matrix[0, 1].real, -2 * matrix[0, 1].imag,
                     (matrix[0, 0] - matrix[1, 1]).real])


def _closed_form_qfi(mod: _Model, dn: float) -> float:
    """Temperature QFI of the closed-form state, given dN/dT.

    Algebraically identical to the published expression, rearranged so that
    1 - |w|^2 enters through det(rho) and no difference of nearly equal
    terms is formed. Below g M = SERIES_GM a two-term series in g is used.
    The factor (dN/dT)^2 is distributed over the terms whose denominators
    vanish with N, so that a tiny N cannot overflow the result.
    """
    g, n, th = mod.g, mod.n, mod.theta
    m = mod.m
    gm = mod.gm
    if g == 0:
        return 0.0
    ch, sh = half_angles(th)
    c2, s2 = ch * ch, sh * sh
    if gm < SERIES_GM:
        q = 2 * c2  # 1 + cos(theta)
        d = q * q + n * (2 * q * q - 4 * q + 4)
        r = dn / d
        p2 = ((((((12 * q - 72) * q + 208) * q - 352) * q + 368) * q - 224) * q + 64)
        p1 = ((((((12 * q - 60) * q + 148) * q - 208) * q + 176) * q - 80) * q + 16)
        p0 = q * q * ((((3 * q - 12) * q + 20) * q - 8) * q - 4)
        first = g * (1 + (q - 1) ** 2) ** 2 * r * dn
        second = -g * g * (n * n * p2 + n * p1 + p0) * r * r / 2
        return first + second
    c = (ch - sh) * (ch + sh)
    s = 2 * ch * sh
    x = math.exp(-gm)
    a = -math.expm1(-gm)
    wz = x * (c2 - s2) - a / m
    det = _determinant(mod)
    t1 = g * (4 * c * x * x * (g * m * m * c + 2 * g * m + 2) + x * (g * m * m * s * s - 8 * c)) / m ** 2
    cross = x * g * s * s - 2 * (a - x * g * m * (m * c + 1)) * wz / m ** 2
    t3 = 4 * (g * m * x - a) ** 2 / m ** 4
    regular = (t1 + t3) * dn * dn
    if det == 0:
        if cross * dn != 0:
            raise EstimationError("temperature QFI undefined: pure state with non-tangent derivative")
        return regular
    return regular + (cross * dn / (2 * math.sqrt(det))) ** 2


def qfi_temperature_closed(p: ProbeParams, b: BathParams, tau: float,
                           bundle: RateBundle | None = None) -> float:
    """Analytic temperature QFI H_T of the evolved probe state."""
    bundle = bundle or rate_bundle(p, b, include_lamb=False)
    ctx = EvolutionContext.from_bundle(bundle, tau)
    return _qfi_closed_ctx(p, ctx)


def _qfi_closed_ctx(p: ProbeParams, ctx: EvolutionContext) -> float:
    mod = _model(p, ctx)
    dn = ctx.bundle.dn_dT
    if dn == 0 or mod.g == 0:
        return 0.0
    return max(0.0, _closed_form_qfi(mod, dn))


def steady_state_qfi(bundle: RateBundle) -> float:
    """Large-time QFI 4 (dN/dT)^2 / (M^2 (M^2 - 1)) = (dN/dT)^2 / (N (N + 1) M^2)."""
    n = bundle.n_mean
    if n == 0:
        return 0.0
    m = bundle.m_factor
    dn = bundle.dn_dT
    return (dn / m) ** 2 / (n * (n + 1))


def fi_projective(p: ProbeParams, b: BathParams, tau: float, basis="z",
                  ctx: EvolutionContext | None = None) -> float:
    """Classical Fisher information on T of a two-outcome projective measurement.

    ``basis`` is "z" (sigma_z eigenbasis), "x", "y" or a Bloch direction
    (3-vector); outcomes are the projectors (1 +- n.sigma)/2.
    """
    ctx = ctx or EvolutionContext.build(p, b, tau, include_lamb=False)
    mod = _model(p, ctx)
    if isinstance(basis, str):
        axes = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
        if basis not in axes:
            raise ValueError(f"unknown basis {basis!r}")
        direction = np.array(axes[basis])
    else:
        direction = np.asarray(basis, dtype=float)
        norm = np.linalg.norm(direction)
        if not norm > 0:
            raise ValueError("measurement direction must be non-zero")
        direction = direction / norm
    drho = ctx.bundle.dn_dT * _drho_dn(mod)
    dw = _bloch_of(drho)
    slope = 0.5 * float(direction @ dw)  # dp_+/dT = -dp_-/dT
    if np.array_equal(direction, [0.0, 0.0, 1.0]):
        rho = _rho(mod)
        probs = (float(rho[0, 0].real), float(rho[1, 1].real))
    else:
        proj = 0.5 * float(direction @ _bloch_of(_rho(mod)))
        probs = (0.5 + proj, 0.5 - proj)
    total = 0.0
    for prob in probs:
        if prob <= 0:
            if slope != 0:
                raise EstimationError("measurement outcome with vanishing probability but "
                                      "non-vanishing temperature sensitivity")
            continue
        total += slope * (slope / prob)
    return total


# --------------------------------------------------------------------------
# two-parameter estimation


def qfi_matrix_from(rho, drhos, det: float | None = None) -> tuple[QfiMatrix, list[SldOperator]]:
    mat = _as_matrix(rho)
    slds = [sld(mat, d, det) for d in drhos]
    n = len(slds)
    h = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            anti = slds[i].L @ slds[j].L + slds[j].L @ slds[i].L
            h[i, j] = 0.5 * np.trace(mat @ anti).real
    return QfiMatrix(0.5 * (h + h.T)), slds


def qfi_matrix(p: ProbeParams, b: BathParams, tau: float,
               ctx: EvolutionContext | None = None) -> QfiMatrix:
    """QFI matrix over (T, theta) with H_ij = Tr(rho {L_i, L_j}) / 2."""
    ctx = ctx or EvolutionContext.build(p, b, tau, include_lamb=False)
    mod = _model(p, ctx)
    derivs = param_derivatives(p, b, ctx)
    h, _ = qfi_matrix_from(_rho(mod), [derivs.d_rho_dT, derivs.d_rho_dTheta], _determinant(mod))
    return h


def compatibility_residual(rho, L_T: SldOperator, L_theta: SldOperator) -> float:
    """|Tr(rho [L_T, L_theta])|."""
    mat = _as_matrix(rho)
    comm = L_T.L @ L_theta.L - L_theta.L @ L_T.L
    return float(abs(np.trace(mat @ comm)))


def ratio_r(h: QfiMatrix) -> tuple[float, float, float]:
    """(Delta_i, Delta_s, R) for one run of each scheme.

    Delta_i = sum_j 1/H_jj, Delta_s = Tr(H^-1)/n, R = Delta_i / Delta_s.
    """
    mat = np.asarray(h.h, dtype=float)
    n = mat.shape[0]
    diag = np.diag(mat)
    if np.any(diag <= 0) or not np.all(np.isfinite(mat)):
        raise SingularMatrixError("QFI matrix has a non-positive diagonal entry")
    # condition number of the correlation matrix, so that the scale of T
    # relative to theta does not count as ill-conditioning
    with np.errstate(over="ignore", invalid="ignore"):
        scale = 1 / np.sqrt(diag)
        corr = mat * np.outer(scale, scale)
        cond = np.linalg.cond(corr) if np.all(np.isfinite(corr)) else math.inf
    if not cond <= MAX_CONDITION:
        raise SingularMatrixError(f"QFI matrix is singular (condition number {cond:.3g})")
    delta_i = float(np.sum(1 / diag))
    if n == 2:
        # Tr(H^-1) = Delta_i / (1 - rho^2) with rho the (T, theta) correlation,
        # so R = 2 (1 - rho^2): exactly 2 for a diagonal matrix
        decorrelation = 1 - corr[0, 1] * corr[1, 0]
        return delta_i, delta_i / (2 * decorrelation), 2 * decorrelation
    inv = np.outer(scale, scale) * np.linalg.inv(corr)
    delta_s = float(np.trace(inv) / n)
    return delta_i, delta_s, delta_i / delta_s


def estimation_report(p: ProbeParams, b: BathParams, tau: float,
                      include_lamb: bool = True) -> EstimationReport:
    """All estimation figures of merit for one configuration."""
    ctx = EvolutionContext.build(p, b, tau, include_lamb=include_lamb)
    mod = _model(p, ctx)
    state = evolve(p, ctx)
    det = _determinant(mod)
    derivs = param_derivatives(p, b, ctx)
    closed = _qfi_closed_ctx(p, ctx)
    w = bloch_vector(state)
    q_bloch = qfi_bloch(w, _bloch_of(derivs.d_rho_dT), mix=4 * det)
    q_sld = qfi_sld(state, derivs.d_rho_dT, det)
    fi_z = fi_projective(p, b, tau, "z", ctx=ctx)
    h, (l_t, l_th) = qfi_matrix_from(state, [derivs.d_rho_dT, derivs.d_rho_dTheta], det)
    try:
        delta_i, delta_s, r = ratio_r(h)
    except SingularMatrixError:
        delta_i = delta_s = r = math.nan
    return EstimationReport(
        qfi_closed=closed,
        qfi_bloch=q_bloch,
        qfi_sld=q_sld,
        fi_sigma_z=fi_z,
        qfi_matrix=h,
        delta_i=delta_i,
        delta_s=delta_s,
        ratio_r=r,
        compat_residual=compatibility_residual(state, l_t, l_th),
    )


__all__ = [
    "EstimationError", "SingularMatrixError", "IllPosedSldWarning", "ParamDerivatives",
    "SldOperator", "QfiMatrix", "EstimationReport", "d_rho", "param_derivatives", "sld",
    "lyapunov_residual", "qfi_sld", "qfi_bloch", "qfi_temperature_closed", "steady_state_qfi",
    "fi_projective", "qfi_matrix", "qfi_matrix_from", "compatibility_residual", "ratio_r",
    "estimation_report", "mixedness", "SIGMA_X", "SIGMA_Y", "SIGMA_Z",
]
