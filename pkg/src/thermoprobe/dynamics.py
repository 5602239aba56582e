"""Reduced dynamics of the probe qubit.

Basis ordering is (excited, ground): ``rho[0, 0]`` is the excited-state
population and ``rho[0, 1]`` the coherence <1|rho|0>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import OdeSpec, ode_integrate
from .rates import BathParams, DomainError, ProbeParams, RateBundle, rate_bundle

STATE_TOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_minus lowers |1> (excited, index 0) to |0> (ground, index 1).
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T


class StateError(ValueError):
    """Matrix violates the density-matrix invariants."""


@dataclass(frozen=True)
class ProbeState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise StateError(f"density matrix must be 2x2, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise StateError("density matrix has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > STATE_TOL:
            raise StateError(f"trace {np.trace(rho).real:.15g} differs from 1")
        if np.linalg.eigvalsh(rho).min() < -STATE_TOL:
            raise StateError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


@dataclass(frozen=True)
class BlochVector:
    wx: float
    wy: float
    wz: float

    def __post_init__(self):
        if self.norm() > 1 + STATE_TOL:
            raise StateError(f"Bloch vector norm {self.norm():.15g} exceeds 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.wx, self.wy, self.wz])

    def norm(self) -> float:
        return math.sqrt(self.wx ** 2 + self.wy ** 2 + self.wz ** 2)

    def to_state(self) -> ProbeState:
        return ProbeState(0.5 * (np.eye(2) + self.wx * SIGMA_X + self.wy * SIGMA_Y + self.wz * SIGMA_Z))


@dataclass(frozen=True)
class EvolutionContext:
    """Proper time together with the rates it is evolved under."""

    tau: float
    g: float
    bundle: RateBundle

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise DomainError(f"proper time must be >= 0, got {self.tau}")
        if self.g != self.bundle.gamma0 * self.tau:
            raise DomainError("g must equal gamma0 * tau")

    @classmethod
    def build(cls, p: ProbeParams, b: BathParams, tau: float,
              include_lamb: bool = True) -> "EvolutionContext":
        bundle = rate_bundle(p, b, include_lamb=include_lamb)
        return cls.from_bundle(bundle, tau)

    @classmethod
    def from_bundle(cls, bundle: RateBundle, tau: float) -> "EvolutionContext":
        return cls(tau=tau, g=bundle.gamma0 * tau, bundle=bundle)


def _check_angles(theta: float, phi: float) -> None:
    if not 0 <= theta <= math.pi:
        raise DomainError(f"theta must lie in [0, pi], got {theta}")
    if not 0 <= phi < 2 * math.pi:
        raise DomainError(f"phi must lie in [0, 2 pi), got {phi}")


def half_angles(theta: float) -> tuple[float, float]:
    """(cos(theta/2), sin(theta/2)), exact at theta = pi.

    ``math.cos(math.pi / 2)`` is 6e-17 rather than 0; squared, that would
    swamp excited populations of order 1e-30 that occur at large rapidity.
    """
    if theta > math.pi / 2:
        rest = (math.pi - theta) / 2
        return math.sin(rest), math.cos(rest)
    return math.cos(theta / 2), math.sin(theta / 2)


def initial_state(theta: float, phi: float) -> ProbeState:
    """|psi> = e^{i phi} cos(theta/2) |1> + sin(theta/2) |0>."""
    _check_angles(theta, phi)
    ch, sh = half_angles(theta)
    psi = np.array([np.exp(1j * phi) * ch, sh])
    return ProbeState(np.outer(psi, psi.conj()))


def populations(theta: float, gm: float, n: float) -> tuple[float, float]:
    """(excited, ground) populations after relaxation time gM.

    Both are written as sums of non-negative terms, using 1 = e^{-gM} +
    (1 - e^{-gM}) and 1 -+ 1/M = (2N or 2N + 2)/M, so that neither a tiny
    N nor theta ~ pi loses precision.
    """
    m = 2 * n + 1
    decay = math.exp(-gm)
    loss = -math.expm1(-gm)
    ch, sh = half_angles(theta)
    excited = ch * ch * decay + loss * n / m
    ground = sh * sh * decay + loss * (n + 1) / m
    return excited, ground


def evolve(p: ProbeParams, ctx: EvolutionContext) -> ProbeState:
    """Closed-form state of the probe at proper time ``ctx.tau``."""
    bundle = ctx.bundle
    gm = ctx.g * bundle.m_factor
    excited, ground = populations(p.theta, gm, bundle.n_mean)
    if ctx.tau == 0:
        phase = np.exp(1j * p.phi)
    else:
        phase = np.exp(-1j * ctx.tau * bundle.omega_shifted + 1j * p.phi)
    ch, sh = half_angles(p.theta)
    coherence = ch * sh * math.exp(-gm / 2) * phase
    rho = np.array([[excited, coherence], [np.conj(coherence), ground]], dtype=complex)
    return ProbeState(rho)


def _dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    op_dag = op.conj().T
    anti = op_dag @ op
    return op @ rho @ op_dag - 0.5 * (anti @ rho + rho @ anti)


def evolve_ode_oracle(p: ProbeParams, ctx: EvolutionContext,
                      spec: OdeSpec | None = None) -> ProbeState:
    """Integrate the master equation numerically; a validation oracle for ``evolve``.

    The generator is -i[h + h_LS, rho] + Gamma(W0) D[sigma-] + Gamma(-W0) D[sigma+]
    with h = W0 sigma_z / 2 and h_LS = Delta(W0) s+s- + Delta(-W0) s-s+,
    where Delta(-W0) = -Delta(W0).
    """
    bundle = ctx.bundle
    gamma = bundle.gamma0
    n = bundle.n_mean
    delta = bundle.delta
    h = 0.5 * p.omega0 * SIGMA_Z
    h_ls = delta * (SIGMA_PLUS @ SIGMA_MINUS) + (-delta) * (SIGMA_MINUS @ SIGMA_PLUS)
    h_total = h + h_ls
    rate_down = gamma * (1 + n)
    rate_up = gamma * n

    def rhs(_t, y):
        rho = y.reshape(2, 2)
        drho = (-1j * (h_total @ rho - rho @ h_total)
                + rate_down * _dissipator(SIGMA_MINUS, rho)
                + rate_up * _dissipator(SIGMA_PLUS, rho))
        return drho.ravel()

    rho0 = initial_state(p.theta, p.phi).rho
    y = ode_integrate(rhs, rho0.ravel().astype(complex), (0.0, ctx.tau), spec)
    rho = y.reshape(2, 2)
    # remove the O(tol) non-Hermitian part produced by the integrator
    rho = 0.5 * (rho + rho.conj().T)
    # After many relaxation times a population of order e^{-gM} sits below
    # the integrator's absolute error and can come out slightly negative;
    # clip eigenvalues that are negative only within that error.
    vals, vecs = np.linalg.eigh(rho)
    slack = 10 * (spec or OdeSpec()).local_error_tol
    if vals.min() < -slack:
        raise StateError(f"ODE state has eigenvalue {vals.min():.3g} beyond integrator error")
    if vals.min() < 0:
        vals = np.clip(vals, 0, None)
        vals /= vals.sum()
        rho = (vecs * vals) @ vecs.conj().T
    return ProbeState(rho)


def bloch_vector(s: ProbeState) -> BlochVector:
    rho = s.rho
    return BlochVector(
        wx=float(2 * rho[0, 1].real),
        wy=float(-2 * rho[0, 1].imag),
        wz=float((rho[0, 0] - rho[1, 1]).real),
    )


def steady_state(bundle: RateBundle) -> ProbeState:
    """Large-time limit diag(N/M, (N+1)/M)."""
    if not bundle.gamma0 > 0:
        raise DomainError("steady state requires gamma0 > 0 (the probe never relaxes)")
    m = bundle.m_factor
    return ProbeState(np.diag([bundle.n_mean / m, (bundle.n_mean + 1) / m]).astype(complex))


def trace_distance(a: ProbeState, b: ProbeState) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a.rho - b.rho)).sum())
