"""Acceptance checks, runnable from the command line (``thermoprobe selftest``).

Each check returns a :class:`CriterionResult` carrying the worst measured
deviation next to the tolerance it is held to, so that callers (the CLI and
the test-suite) can both print and assert on the same numbers.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import zeta

from . import scan
from .dynamics import EvolutionContext, evolve, evolve_ode_oracle, trace_distance
from .estimation import (
    estimation_report,
    fi_projective,
    qfi_temperature_closed,
    steady_state_qfi,
)
from .numerics import QuadratureSpec, differentiate, integrate
from .rates import (
    U_MIN,
    BathParams,
    ProbeParams,
    bose_occupancy,
    mean_excitation,
    mean_excitation_dT,
    rate_bundle,
)

COUPLINGS = ("udw", "td")

# Sampling box shared by the randomized checks.
T_RANGE = (1e-3, 300.0)
U_MAX = 30.0
LAMBDA_MAX = 2.5
OMEGA_RANGE = (0.01, 200.0)
TAU_DECADES = (-3.0, 3.0)  # tau * gamma0 * M spans six decades around relaxation

# Points whose QFI is below this are dominated by subnormal arithmetic in
# the matrix routes and are not counted as valid samples.
QFI_FLOOR = 1e-200
# The ODE oracle is explicit; cap the number of Bloch precessions.
MAX_PHASE = 300.0


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    metric: float
    tolerance: float
    seconds: float
    time_limit: float
    detail: str = ""
    ok: bool = True

    @property
    def passed(self) -> bool:
        return self.ok and self.metric <= self.tolerance and self.seconds < self.time_limit

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        text = (f"[{flag}] criterion {self.number} ({self.name}): worst {self.metric:.3g} "
                f"vs tolerance {self.tolerance:.3g}; {self.seconds:.2f} s of {self.time_limit:g} s")
        return f"{text}; {self.detail}" if self.detail else text


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(10 ** rng.uniform(math.log10(lo), math.log10(hi)))


def random_configuration(rng: np.random.Generator, coupling: str):
    """One draw from the acceptance box: (probe, bath, tau)."""
    p = ProbeParams(
        omega0=_log_uniform(rng, *OMEGA_RANGE),
        lam=float(rng.uniform(0, LAMBDA_MAX)) or LAMBDA_MAX,
        u=float(rng.uniform(0, U_MAX)),
        theta=float(rng.uniform(0, math.pi)),
        phi=float(rng.uniform(0, 2 * math.pi)),
        coupling=coupling,
    )
    b = BathParams(_log_uniform(rng, *T_RANGE))
    bundle = rate_bundle(p, b, include_lamb=False)
    gm = 10 ** rng.uniform(*TAU_DECADES)
    return p, b, gm / (bundle.gamma0 * bundle.m_factor)


def valid_configurations(seed: int, coupling: str, count: int):
    """``count`` draws whose QFI is comfortably representable."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(100 * count):
        p, b, tau = random_configuration(rng, coupling)
        if qfi_temperature_closed(p, b, tau) >= QFI_FLOOR:
            out.append((p, b, tau))
            if len(out) == count:
                return out
    raise RuntimeError(f"could not draw {count} valid points for {coupling}")


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale else 0.0


def _spread(values) -> float:
    values = [float(v) for v in values]
    hi = max(abs(v) for v in values)
    return (max(values) - min(values)) / hi if hi else 0.0


# ---------------------------------------------------------------------------


def check_route_equivalence(points: int = 100, seed: int = 11) -> CriterionResult:
    start = time.perf_counter()
    worst = 0.0
    for coupling in COUPLINGS:
        for p, b, tau in valid_configurations(seed, coupling, points):
            r = estimation_report(p, b, tau, include_lamb=False)
            worst = max(worst, _spread([r.qfi_closed, r.qfi_bloch, r.qfi_sld]))
    return CriterionResult(1, "route equivalence", worst, 1e-8, time.perf_counter() - start, 30,
                           f"{points} points per coupling")


def check_ode_oracle(points: int = 100, seed: int = 12) -> CriterionResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    capped = 0
    for coupling in COUPLINGS:
        for _ in range(points):
            p, b, tau = random_configuration(rng, coupling)
            bundle = rate_bundle(p, b, include_lamb=True)
            if abs(bundle.omega_shifted) * tau > MAX_PHASE:
                tau = MAX_PHASE / abs(bundle.omega_shifted)
                capped += 1
            ctx = EvolutionContext.from_bundle(bundle, tau)
            worst = max(worst, trace_distance(evolve(p, ctx), evolve_ode_oracle(p, ctx)))
    return CriterionResult(2, "master-equation oracle", worst, 1e-8, time.perf_counter() - start,
                           120, f"{points} points per coupling, {capped} with tau capped")


def check_invariance(points: int = 20, seed: int = 13) -> CriterionResult:
    start = time.perf_counter()
    phis = [k * math.pi / 4 for k in range(8)]
    worst = 0.0
    for coupling in COUPLINGS:
        for p, b, tau in valid_configurations(seed, coupling, points):
            routes: dict[str, list[float]] = {"closed": [], "bloch": [], "sld": []}
            for phi in phis:
                q = ProbeParams(p.omega0, p.lam, p.u, p.theta, phi, p.coupling)
                for lamb in (True, False):
                    r = estimation_report(q, b, tau, include_lamb=lamb)
                    routes["closed"].append(r.qfi_closed)
                    routes["bloch"].append(r.qfi_bloch)
                    routes["sld"].append(r.qfi_sld)
            worst = max(worst, *(_spread(v) for v in routes.values()))
    return CriterionResult(3, "phi and Lamb-shift invariance", worst, 1e-10,
                           time.perf_counter() - start, 10,
                           f"{points} points per coupling x 8 phi x Lamb on/off")


def check_optimal_measurement() -> CriterionResult:
    start = time.perf_counter()
    worst = 0.0
    n = 0
    for coupling, omega0, lam, u in (("udw", 1.0, 0.5, 1.0), ("td", 0.5, 0.2, 0.5)):
        for T in (0.05, 0.2, 1.0, 10.0, 100.0):
            for gm in (0.01, 0.1, 1.0, 10.0, 100.0):
                p = ProbeParams(omega0, lam, u, theta=math.pi, coupling=coupling)
                b = BathParams(T)
                bundle = rate_bundle(p, b, include_lamb=False)
                tau = gm / (bundle.gamma0 * bundle.m_factor)
                worst = max(worst, _rel(fi_projective(p, b, tau, "z"),
                                        qfi_temperature_closed(p, b, tau)))
                n += 1
    return CriterionResult(4, "sigma_z measurement at theta = pi", worst, 1e-8,
                           time.perf_counter() - start, 10, f"{n}-point grid")


def check_comoving_limit() -> CriterionResult:
    start = time.perf_counter()
    u = 2 * U_MIN
    worst = 0.0
    for coupling in COUPLINGS:
        for omega0 in (0.05, 0.2, 1.0, 5.0, 20.0):
            for T in (0.5, 2.0, 10.0, 50.0):
                n = mean_excitation(ProbeParams(omega0, 1.0, u, coupling=coupling), BathParams(T))
                worst = max(worst, _rel(n, 1 / math.expm1(omega0 / T)))
    return CriterionResult(5, "comoving limit", worst, 1e-8, time.perf_counter() - start, 5,
                           "20-point (omega0, T) grid per coupling at u = 2e-6")


def check_multiparameter(points: int = 50, seed: int = 16) -> CriterionResult:
    start = time.perf_counter()
    compat = 0.0
    problems = []
    for coupling in COUPLINGS:
        for p, b, tau in valid_configurations(seed, coupling, points):
            r = estimation_report(p, b, tau, include_lamb=False)
            h = r.qfi_matrix.h
            scale = float(np.max(np.abs(h)))
            compat = max(compat, r.compat_residual)
            if np.linalg.eigvalsh(h).min() < -1e-12 * scale:
                problems.append("QFI matrix not PSD")
            if math.isfinite(r.ratio_r) and not 0 < r.ratio_r <= 2 + 1e-8:
                problems.append(f"R = {r.ratio_r} outside (0, 2]")
    r10a = scan.run_preset("fig10a")
    ratios = r10a.columns["ratio_r"]
    if np.isnan(ratios).any() or ratios.min() < 1.8:
        problems.append(f"fig10a R minimum {np.nanmin(ratios):.4g} < 1.8")
    r10b = scan.run_preset("fig10b")
    thetas = r10b.axes[0].values
    best = thetas[int(np.nanargmin(r10b.values))]
    if math.pi - best > (thetas[-1] - thetas[-2]) + 1e-12:
        problems.append(f"fig10b delta_s minimum at theta = {best:.4g}")
    detail = (f"fig10a min R = {np.nanmin(ratios):.6g}, fig10b argmin theta = {best:.6g}"
              + ("; " + "; ".join(sorted(set(problems))) if problems else ""))
    return CriterionResult(6, "multiparameter saturability", compat, 1e-10,
                           time.perf_counter() - start, 60, detail, ok=not problems)


def check_trapping() -> CriterionResult:
    start = time.perf_counter()
    worst = 0.0
    problems = []
    members = 0
    for preset_id in ("fig3c", "fig4b"):
        result = scan.run_preset(preset_id)
        spec = result.spec
        family = spec.axes[1].name
        for value, taus, qfi in scan.family_curves(result):
            members += 1
            pin = {family: value}
            # oracle: the closed form deep in the relaxed regime
            fixed = {**spec.fixed, family: value}
            p = ProbeParams(fixed["omega0"], fixed["lambda"], fixed["u"], fixed["theta"],
                            fixed["phi"], spec.coupling)
            b = BathParams(fixed["T"], spec.cutoff_eps)
            bundle = rate_bundle(p, b, include_lamb=False)
            steady = steady_state_qfi(bundle)
            deep = qfi_temperature_closed(p, b, 200 / (bundle.gamma0 * bundle.m_factor))
            worst = max(worst, _rel(deep, steady) * 1e5)  # held to 1e-8
            trapped, plateau = scan.trapping_detector(taus, qfi,
                                                      scan.relaxation_time(spec, pin))
            if not trapped:
                problems.append(f"{preset_id} {family}={value:g} not trapped")
            worst = max(worst, _rel(plateau, scan.steady_state_for(spec, pin)))
    return CriterionResult(7, "trapping plateau", worst, 1e-3, time.perf_counter() - start, 30,
                           f"{members} curves" + ("; " + "; ".join(problems) if problems else ""),
                           ok=not problems)


def check_morphology() -> CriterionResult:
    start = time.perf_counter()
    failures = []

    r2a = scan.run_preset("fig2a")
    spec = r2a.spec
    u_axis = spec.axis("u").values
    interior = 0
    for i, T in enumerate(spec.axis("T").values):
        row = r2a.values[i]
        j = int(np.argmax(row))
        if 0 < j < len(row) - 1:
            bracket = (u_axis[j - 1], u_axis[j], u_axis[j + 1])
            u_best, _ = scan.refine_argmax(spec.pin("T", T), "u", bracket)
            interior += u_axis[0] < u_best < u_axis[-1]
    if not interior:
        failures.append("fig2a: no interior u-maximum")

    spec = scan.figure_preset("fig3a")
    t_star = [scan.refine_argmax(spec.pin("u", u), "T")[0] for u in spec.axis("u").values]
    if not np.all(np.diff(t_star) < 0):
        failures.append(f"fig3a: T-argmax not decreasing in u {t_star}")

    spec = scan.figure_preset("fig5a")
    u_star = [scan.refine_argmax(spec.pin("omega0", w), "u")[0] for w in spec.axis("omega0").values]
    if not np.all(np.diff(u_star) < 0):
        failures.append(f"fig5a: u-argmax not decreasing in omega0 {u_star}")

    r1a = scan.run_preset("fig1a")
    spec = r1a.spec
    theta_axis = spec.axis("theta").values
    # theta = pi is the edge of the grid, so this is a grid argmax, not a refined one
    at_pi = 0
    for i, T in enumerate(spec.axis("T").values):
        j = int(np.argmax(r1a.values[i]))
        if j == len(theta_axis) - 1:
            at_pi += 1
        else:
            failures.append(f"fig1a: theta-argmax {theta_axis[j]:.4g} at T={T:.4g}")
            break

    detail = (f"fig2a interior maxima in {interior} rows; fig3a T* = "
              + ", ".join(f"{t:.4g}" for t in t_star)
              + "; fig5a u* = " + ", ".join(f"{u:.4g}" for u in u_star)
              + f"; fig1a theta* = pi in {at_pi} of {len(r1a.values)} rows")
    if failures:
        detail += "; " + "; ".join(failures)
    return CriterionResult(8, "figure morphology", float(len(failures)), 0.0,
                           time.perf_counter() - start, 120, detail)


def check_numerics() -> CriterionResult:
    start = time.perf_counter()
    spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-300)
    worst_zeta = 0.0
    for T in (0.01, 1.0, 300.0):
        k_max = 50 * T
        value, _ = integrate(lambda k: k * k * bose_occupancy(k, T), 0.0, k_max, spec,
                             breakpoints=[T, 5 * T, 20 * T])
        worst_zeta = max(worst_zeta, _rel(value, 2 * zeta(3) * T ** 3))

    pv_spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-15, singular_points=(1.0,))
    pv_log, _ = integrate(lambda x: np.log(np.abs(1 - x)), 0.0, 2.0, pv_spec)
    pv_pole, _ = integrate(lambda x: 1 / (x - 1), 0.0, 3.0, pv_spec)
    worst_pv = max(_rel(pv_log, -2.0), _rel(pv_pole, math.log(2.0)))

    worst_dn = 0.0
    for p, T in ((ProbeParams(1.0, 1.0, 1.0), 1.0),
                 (ProbeParams(0.5, 0.01, 4.0), 0.05),
                 (ProbeParams(0.2, 1.0, 0.1, coupling="td"), 0.05),
                 (ProbeParams(1.0, 1.0, 1.0, coupling="td"), 2.0)):
        fd, _ = differentiate(lambda t: mean_excitation(p, BathParams(t)), T, lower=0.0)
        worst_dn = max(worst_dn, _rel(fd, mean_excitation_dT(p, BathParams(T))))

    # normalise each sub-check by its own tolerance
    metric = max(worst_zeta / 1e-8, worst_pv / 1e-10, worst_dn / 1e-6)
    detail = f"zeta {worst_zeta:.2g}, PV {worst_pv:.2g}, dN/dT {worst_dn:.2g}"
    return CriterionResult(9, "numerics battery (normalised)", metric, 1.0,
                           time.perf_counter() - start, 5, detail)


CRITERIA: tuple[Callable[[], CriterionResult], ...] = (
    check_route_equivalence,
    check_ode_oracle,
    check_invariance,
    check_optimal_measurement,
    check_comoving_limit,
    check_multiparameter,
    check_trapping,
    check_morphology,
    check_numerics,
)


def run_all(stream=None) -> list[CriterionResult]:
    """Run every criterion, printing one line each as it completes."""
    stream = stream or sys.stdout
    results = []
    for check in CRITERIA:
        result = check()
        print(result.line(), file=stream, flush=True)
        results.append(result)
    return results
