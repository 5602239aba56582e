"""Parameter sweeps, argmax refinement and the figure presets.

A sweep evaluates one quantity (or a few companion quantities) on a 1- or
2-dimensional grid. Grid points are independent; a point that fails is
recorded as NaN together with the reason, and the sweep carries on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from . import __version__
from .dynamics import EvolutionContext, evolve
from .estimation import (SingularMatrixError, fi_projective, qfi_matrix,
                         qfi_temperature_closed, ratio_r, steady_state_qfi)
from .numerics import NumericsError
from .rates import BathParams, CouplingKind, ProbeParams, RateBundle, rate_bundle

AXIS_NAMES = ("T", "theta", "phi", "u", "lambda", "omega0", "tau")

# quantity -> CSV columns it produces
QUANTITY_COLUMNS: dict[str, tuple[str, ...]] = {
    "qfi": ("qfi",),
    "fi_sigma_z": ("fi_sigma_z",),
    "qfi_matrix": ("h_tt", "h_ttheta", "h_thetatheta"),
    "delta_s": ("delta_s",),
    "delta_i": ("delta_i",),
    "ratio_r": ("ratio_r",),
    "rho_entries": ("rho_ee", "rho_gg", "rho_eg_re", "rho_eg_im"),
    "rates": ("gamma0", "n_mean", "dn_dt", "delta", "omega_shifted", "m_factor"),
}

# low-temperature and normal-temperature default windows
LOW_T = (1e-3, 0.2)
NORMAL_T = (1.0, 300.0)
U_RANGE = (0.01, 40.0)
# proper time for presets that do not sweep or fix tau
DEFAULT_TAU = 1e5

GOLDEN = (math.sqrt(5) - 1) / 2
ARGMAX_XTOL = 1e-6
TRAP_DECADES = 2.0
TRAP_DRIFT = 1e-3


class SweepError(ValueError):
    """Invalid sweep specification."""


class BracketError(ValueError):
    """Bracket endpoints exceed the interior point."""


class InsufficientSpanError(ValueError):
    """Time series does not extend far enough past the relaxation time."""


class UnknownPresetError(LookupError):
    def __init__(self, preset_id: str):
        super().__init__(f"unknown figure preset {preset_id!r}; available: {', '.join(PRESETS)}")


# --------------------------------------------------------------------------
# sweep description


@dataclass(frozen=True)
class Axis:
    """A named grid. ``scale`` is "linear", "log" or "list" (explicit values)."""

    name: str
    values: tuple[float, ...]
    scale: str = "list"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise SweepError(f"unknown axis {self.name!r}; expected one of {AXIS_NAMES}")
        if self.scale not in ("linear", "log", "list"):
            raise SweepError(f"unknown axis scale {self.scale!r}")
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise SweepError(f"axis {self.name} needs at least 2 points")
        if not all(math.isfinite(v) for v in vals):
            raise SweepError(f"axis {self.name} has non-finite values")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise SweepError(f"axis {self.name} must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def linear(cls, name: str, lo: float, hi: float, count: int) -> "Axis":
        _check_range(name, lo, hi, count)
        return cls(name, tuple(np.linspace(lo, hi, count)), "linear")

    @classmethod
    def log(cls, name: str, lo: float, hi: float, count: int) -> "Axis":
        _check_range(name, lo, hi, count)
        if lo <= 0:
            raise SweepError(f"log axis {name} needs a positive lower bound")
        return cls(name, tuple(np.geomspace(lo, hi, count)), "log")

    @classmethod
    def listed(cls, name: str, values: Sequence[float]) -> "Axis":
        return cls(name, tuple(values), "list")

    def __len__(self) -> int:
        return len(self.values)

    def describe(self) -> str:
        if self.scale == "list":
            return f"{self.name} in {{{', '.join(_fmt(v) for v in self.values)}}}"
        return (f"{self.name} {self.scale} [{_fmt(self.values[0])}, {_fmt(self.values[-1])}] "
                f"x {len(self.values)}")


def _check_range(name, lo, hi, count):
    if count < 2:
        raise SweepError(f"axis {name}: count must be >= 2, got {count}")
    if not lo < hi:
        raise SweepError(f"axis {name}: min must be < max, got [{lo}, {hi}]")


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class SweepSpec:
    """Grid axes, the fixed values of every other parameter, and what to compute."""

    axes: tuple[Axis, ...]
    fixed: Mapping[str, float]
    quantity: str = "qfi"
    coupling: CouplingKind = CouplingKind.UDW
    companions: tuple[str, ...] = ()
    include_lamb: bool = True
    cutoff_eps: float = 0.01

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "fixed", dict(self.fixed))
        object.__setattr__(self, "coupling", CouplingKind.parse(self.coupling))
        object.__setattr__(self, "companions", tuple(self.companions))
        if not 1 <= len(axes) <= 2:
            raise SweepError(f"a sweep has 1 or 2 free axes, got {len(axes)}")
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise SweepError(f"free axes must be distinct, got {names}")
        for q in (self.quantity, *self.companions):
            if q not in QUANTITY_COLUMNS:
                raise SweepError(f"unknown quantity {q!r}; expected one of {tuple(QUANTITY_COLUMNS)}")
        overlap = set(names) & set(self.fixed)
        if overlap:
            raise SweepError(f"parameters {sorted(overlap)} are both fixed and swept")
        missing = set(AXIS_NAMES) - set(names) - set(self.fixed)
        if missing:
            raise SweepError(f"no value for parameters {sorted(missing)}")
        unknown = set(self.fixed) - set(AXIS_NAMES)
        if unknown:
            raise SweepError(f"unknown fixed parameters {sorted(unknown)}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def columns(self) -> tuple[str, ...]:
        cols: list[str] = []
        for q in (self.quantity, *self.companions):
            cols.extend(c for c in QUANTITY_COLUMNS[q] if c not in cols)
        return tuple(cols)

    def axis(self, name: str) -> Axis:
        for a in self.axes:
            if a.name == name:
                return a
        raise SweepError(f"{name!r} is not a free axis of this sweep")

    def pin(self, name: str, value: float) -> "SweepSpec":
        """The same sweep with axis ``name`` fixed at ``value``."""
        self.axis(name)
        fixed = dict(self.fixed)
        fixed[name] = float(value)
        axes = tuple(a for a in self.axes if a.name != name)
        return _replace_spec(self, axes=axes, fixed=fixed)

    def with_axis(self, axis: Axis) -> "SweepSpec":
        """Replace (or add) a free axis; the parameter is removed from ``fixed``."""
        fixed = {k: v for k, v in self.fixed.items() if k != axis.name}
        axes = tuple(a for a in self.axes if a.name != axis.name) + (axis,)
        return _replace_spec(self, axes=axes, fixed=fixed)

    def point(self, index: tuple[int, ...]) -> dict[str, float]:
        values = dict(self.fixed)
        for a, i in zip(self.axes, index):
            values[a.name] = a.values[i]
        return values

    def metadata(self) -> dict[str, str]:
        meta = {
            "quantity": self.quantity,
            "companions": ",".join(self.companions) or "-",
            "coupling": self.coupling.value,
            "include_lamb": str(self.include_lamb).lower(),
            "cutoff_eps": _fmt(self.cutoff_eps),
        }
        for a in self.axes:
            meta[f"axis_{a.name}"] = a.describe()
        for k in AXIS_NAMES:
            if k in self.fixed:
                meta[f"fixed_{k}"] = _fmt(self.fixed[k])
        return meta


def _replace_spec(spec: SweepSpec, **changes) -> SweepSpec:
    kwargs = dict(axes=spec.axes, fixed=spec.fixed, quantity=spec.quantity,
                  coupling=spec.coupling, companions=spec.companions,
                  include_lamb=spec.include_lamb, cutoff_eps=spec.cutoff_eps)
    kwargs.update(changes)
    return SweepSpec(**kwargs)


@dataclass
class SweepResult:
    """Column arrays of shape ``spec.shape`` plus the reasons for missing points."""

    spec: SweepSpec
    columns: dict[str, np.ndarray]
    missing: list[tuple[tuple[int, ...], str]] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def axes(self) -> tuple[Axis, ...]:
        return self.spec.axes

    @property
    def values(self) -> np.ndarray:
        """The primary quantity's first column."""
        return self.columns[QUANTITY_COLUMNS[self.spec.quantity][0]]

    def rows(self) -> Iterator[dict[str, float]]:
        """Row-major records with axis values followed by every column."""
        for index in np.ndindex(*self.spec.shape):
            row = {a.name: a.values[i] for a, i in zip(self.axes, index)}
            for name, arr in self.columns.items():
                row[name] = float(arr[index])
            yield row


# --------------------------------------------------------------------------
# evaluation


@lru_cache(maxsize=4096)
def _bundle(coupling: str, omega0: float, lam: float, u: float, T: float,
            eps: float, include_lamb: bool) -> RateBundle:
    p = ProbeParams(omega0, lam, u, coupling=CouplingKind(coupling))
    return rate_bundle(p, BathParams(T, eps), include_lamb=include_lamb)


def evaluate_point(spec: SweepSpec, values: Mapping[str, float]) -> dict[str, float]:
    """All columns of ``spec`` at one parameter assignment."""
    p = ProbeParams(values["omega0"], values["lambda"], values["u"], theta=values["theta"],
                    phi=values["phi"], coupling=spec.coupling)
    b = BathParams(values["T"], spec.cutoff_eps)
    tau = values["tau"]
    wanted = (spec.quantity, *spec.companions)
    # the QFI quantities do not depend on the Lamb shift, so skip it there
    needs_lamb = spec.include_lamb and ("rho_entries" in wanted or "rates" in wanted)
    bundle = _bundle(spec.coupling.value, p.omega0, p.lam, p.u, b.temperature,
                     b.cutoff_eps, needs_lamb)
    ctx = EvolutionContext.from_bundle(bundle, tau)
    out: dict[str, float] = {}
    if "qfi" in wanted:
        out["qfi"] = qfi_temperature_closed(p, b, tau, bundle=bundle)
    if "fi_sigma_z" in wanted:
        out["fi_sigma_z"] = fi_projective(p, b, tau, "z", ctx=ctx)
    if {"qfi_matrix", "delta_s", "delta_i", "ratio_r"} & set(wanted):
        h = qfi_matrix(p, b, tau, ctx=ctx)
        out.update(h_tt=h.h_tt, h_ttheta=h.h_ttheta, h_thetatheta=h.h_thetatheta)
        if {"delta_s", "delta_i", "ratio_r"} & set(wanted):
            out["delta_i"], out["delta_s"], out["ratio_r"] = ratio_r(h)
    if "rho_entries" in wanted:
        rho = evolve(p, ctx).rho
        out.update(rho_ee=rho[0, 0].real, rho_gg=rho[1, 1].real,
                   rho_eg_re=rho[0, 1].real, rho_eg_im=rho[0, 1].imag)
    if "rates" in wanted:
        out.update(gamma0=bundle.gamma0, n_mean=bundle.n_mean, dn_dt=bundle.dn_dT,
                   delta=bundle.delta, omega_shifted=bundle.omega_shifted,
                   m_factor=bundle.m_factor)
    return {c: float(out[c]) for c in spec.columns}


# errors that mark a point as missing; anything else is a bug and propagates
POINT_ERRORS = (ValueError, ArithmeticError, NumericsError)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate ``spec`` on its full grid (row-major, deterministic)."""
    columns = {c: np.full(spec.shape, np.nan) for c in spec.columns}
    missing: list[tuple[tuple[int, ...], str]] = []
    for index in np.ndindex(*spec.shape):
        try:
            row = evaluate_point(spec, spec.point(index))
        except SingularMatrixError as exc:
            missing.append((index, f"singular QFI matrix: {exc}"))
            continue
        except POINT_ERRORS as exc:
            missing.append((index, f"{type(exc).__name__}: {exc}"))
            continue
        for c, v in row.items():
            columns[c][index] = v
    metadata = {"version": __version__, **spec.metadata(),
                "quadrature_rel_tol": "1e-10", "argmax_xtol": repr(ARGMAX_XTOL)}
    return SweepResult(spec=spec, columns=columns, missing=missing, metadata=metadata)


# --------------------------------------------------------------------------
# argmax refinement


def golden_maximize(f: Callable[[float], float], lo: float, mid: float, hi: float,
                    xtol: float) -> tuple[float, float]:
    """Golden-section search for a maximum inside the bracket lo < mid < hi.

    Requires f(mid) >= max(f(lo), f(hi)). Stops once the bracket is
    narrower than ``xtol`` and returns the best point evaluated.
    """
    if not lo < mid < hi:
        raise BracketError(f"bracket must satisfy lo < mid < hi, got ({lo}, {mid}, {hi})")
    f_lo, f_mid, f_hi = f(lo), f(mid), f(hi)
    if not f_mid >= max(f_lo, f_hi):
        raise BracketError(f"bracket endpoint exceeds interior point: "
                           f"f({lo})={f_lo}, f({mid})={f_mid}, f({hi})={f_hi}")
    best_x, best_f = mid, f_mid
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        for x, fx in ((c, fc), (d, fd)):
            if fx > best_f:
                best_x, best_f = x, fx
    return best_x, best_f


def grid_bracket(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """(lo, mid, hi) around the grid maximum; raises if the maximum sits on an edge."""
    ys = np.asarray(ys, dtype=float)
    if np.all(np.isnan(ys)):
        raise BracketError("no finite values on the grid")
    i = int(np.nanargmax(ys))
    if i == 0 or i == len(ys) - 1:
        raise BracketError(f"grid maximum at the edge ({xs[i]}); no interior maximum")
    return xs[i - 1], xs[i], xs[i + 1]


def refine_argmax(spec: SweepSpec, axis: str,
                  bracket: tuple[float, float, float] | None = None) -> tuple[float, float]:
    """Refine the maximum of the primary quantity along ``axis``.

    Other free axes must already be pinned. Without a bracket the grid is
    evaluated first. The search runs in log coordinates on log axes, and
    the tolerance is ARGMAX_XTOL relative to the axis span.
    """
    ax = spec.axis(axis)
    if len(spec.axes) != 1:
        raise SweepError("pin the other free axes before refining along one of them")
    column = QUANTITY_COLUMNS[spec.quantity][0]
    if bracket is None:
        res = run_sweep(spec)
        bracket = grid_bracket(ax.values, res.columns[column])
    log = ax.scale == "log"

    def to_x(s):
        return math.exp(s) if log else s

    def objective(s):
        values = dict(spec.fixed)
        values[axis] = to_x(s)
        return evaluate_point(spec, values)[column]

    lo, mid, hi = (math.log(v) if log else v for v in bracket)
    span = (math.log(ax.values[-1]) - math.log(ax.values[0])) if log else ax.values[-1] - ax.values[0]
    s_opt, q_opt = golden_maximize(objective, lo, mid, hi, ARGMAX_XTOL * span)
    return to_x(s_opt), q_opt


# --------------------------------------------------------------------------
# trapping


def trapping_detector(taus: Sequence[float], values: Sequence[float],
                      relax_time: float) -> tuple[bool, float]:
    """Decide whether a QFI time series settles on a plateau.

    ``relax_time`` is 1/(gamma0 M). The series must reach TRAP_DECADES
    decades beyond it. The last decade of the series is trapped when its
    relative spread (max - min)/|mean| is at most TRAP_DRIFT; the plateau
    is the mean over that decade.
    """
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    if taus.shape != values.shape or taus.ndim != 1:
        raise ValueError("taus and values must be 1-d arrays of equal length")
    if not relax_time > 0:
        raise ValueError(f"relaxation time must be positive, got {relax_time}")
    if taus[-1] < relax_time * 10 ** TRAP_DECADES:
        raise InsufficientSpanError(
            f"series ends at tau={taus[-1]:.4g}, needs >= {10 ** TRAP_DECADES:g} x "
            f"relaxation time {relax_time:.4g}")
    tail = values[taus >= taus[-1] / 10]
    if len(tail) < 2 or np.any(~np.isfinite(tail)):
        raise InsufficientSpanError("need at least two finite points in the last decade")
    plateau = float(np.mean(tail))
    spread = float(np.max(tail) - np.min(tail))
    if plateau == 0:
        return spread == 0, 0.0
    return spread / abs(plateau) <= TRAP_DRIFT, plateau


def peak_to_plateau(values: Sequence[float]) -> float:
    """max(series) / final value: ~1 for monotone trapping, >> 1 for rise-then-decay."""
    values = np.asarray(values, dtype=float)
    last = values[-1]
    return math.inf if last == 0 else float(np.nanmax(values) / last)


def relaxation_time(spec: SweepSpec, values: Mapping[str, float] | None = None) -> float:
    """1/(gamma0 M) at a parameter assignment (default: the spec's fixed values)."""
    v = dict(spec.fixed)
    v.update(values or {})
    bundle = _bundle(spec.coupling.value, v["omega0"], v["lambda"], v["u"], v["T"],
                     spec.cutoff_eps, False)
    return 1.0 / (bundle.gamma0 * bundle.m_factor)


def steady_state_for(spec: SweepSpec, values: Mapping[str, float] | None = None) -> float:
    v = dict(spec.fixed)
    v.update(values or {})
    bundle = _bundle(spec.coupling.value, v["omega0"], v["lambda"], v["u"], v["T"],
                     spec.cutoff_eps, False)
    return steady_state_qfi(bundle)


# --------------------------------------------------------------------------
# figure presets


@dataclass(frozen=True)
class FigurePreset:
    """A named sweep reproducing one figure panel: fixed parameters plus grids.

    ``family`` is the parameter whose listed values give separate curves, if
    any; its values and any defaulted grids are recorded in ``notes``.
    """

    id: str
    coupling: CouplingKind
    fixed: Mapping[str, float]
    axes: tuple[Axis, ...]
    title: str
    quantity: str = "qfi"
    companions: tuple[str, ...] = ()
    family: str | None = None
    notes: str = ""

    def spec(self) -> SweepSpec:
        fixed = {"theta": math.pi, "phi": 0.0, "tau": DEFAULT_TAU}
        fixed.update(self.fixed)
        for a in self.axes:
            fixed.pop(a.name, None)
        return SweepSpec(axes=self.axes, fixed=fixed, quantity=self.quantity,
                         coupling=self.coupling, companions=self.companions)

    def metadata(self) -> dict[str, str]:
        meta = {"preset": self.id, "title": self.title}
        if self.family:
            meta["family"] = self.family
        if self.notes:
            meta["notes"] = self.notes
        return meta


UDW, TD = CouplingKind.UDW, CouplingKind.TD
_PI = math.pi


def _t_low(count=41):
    return Axis.log("T", *LOW_T, count)


def _t_normal(count=41):
    return Axis.log("T", *NORMAL_T, count)


def _u(count=81):
    return Axis.log("u", *U_RANGE, count)


def _theta(count=33):
    return Axis.linear("theta", 0.0, _PI, count)


def _tau(lo_exp, count=61):
    return Axis.log("tau", 10.0 ** lo_exp, 10.0 ** (lo_exp + 6), count)


_STATIC_TAU = f"tau = {DEFAULT_TAU:g} (default)"

_PRESET_LIST = [
    FigurePreset("fig1a", UDW, {"u": 4.0, "lambda": 0.01, "omega0": 0.5},
                 (_t_low(), _theta()), "UDW, low T: QFI vs T and theta; u=4, lambda=0.01, omega=0.5",
                 notes=_STATIC_TAU),
    FigurePreset("fig1b", UDW, {"u": 5.0, "omega0": 0.1},
                 (_t_low(), Axis.log("lambda", 0.001, 0.1, 41)),
                 "UDW, low T: QFI vs T and lambda; u=5, omega=0.1",
                 notes=f"lambda range [0.001, 0.1]; {_STATIC_TAU}"),
    FigurePreset("fig2a", UDW, {"lambda": 1.0, "omega0": 0.01},
                 (_t_low(), _u(61)), "UDW, low T: QFI vs T and u; lambda=1, omega=0.01",
                 notes=_STATIC_TAU),
    FigurePreset("fig2b", UDW, {"T": 0.001, "tau": 1e5, "omega0": 0.03},
                 (_u(), Axis.listed("lambda", (0.01, 0.02, 0.03))),
                 "UDW, low T: QFI vs u; T=0.001, t=1e5, omega=0.03, family lambda",
                 family="lambda", notes="lambda in {0.01, 0.02, 0.03}"),
    FigurePreset("fig2c", UDW, {"T": 0.001, "lambda": 0.1},
                 (_u(), Axis.listed("omega0", (0.01, 0.02, 0.03))),
                 "UDW, low T: QFI vs u; T=0.001, lambda=0.1, family omega",
                 family="omega0", notes=f"omega in {{0.01, 0.02, 0.03}}; {_STATIC_TAU}"),
    FigurePreset("fig3a", UDW, {"lambda": 0.1, "omega0": 200.0},
                 (_t_low(81), Axis.listed("u", (7.0, 8.0, 9.0, 10.0))),
                 "UDW, low T: QFI vs T; lambda=0.1, omega=200, family u",
                 family="u", notes=f"u in {{7, 8, 9, 10}}; {_STATIC_TAU}"),
    FigurePreset("fig3b", UDW, {"u": 0.01, "lambda": 1.0, "omega0": 0.05},
                 (_t_low(), _tau(-1, 41)), "UDW, low T: QFI vs T and t; u=0.01, lambda=1, omega=0.05",
                 notes="tau log over [1e-1, 1e5]"),
    FigurePreset("fig3c", UDW, {"T": 0.05, "lambda": 0.1, "u": 0.1},
                 (_tau(1), Axis.listed("omega0", (0.02, 0.05, 0.1, 0.2, 0.3))),
                 "UDW, low T: QFI vs t; T=0.05, lambda=0.1, u=0.1, family omega",
                 family="omega0", notes="omega in {0.02, 0.05, 0.1, 0.2, 0.3}; tau log over [1e1, 1e7]"),
    FigurePreset("fig4a", UDW, {"T": 0.05, "omega0": 0.02, "u": 0.1},
                 (_tau(1), Axis.listed("lambda", (0.05, 0.1, 0.2))),
                 "UDW, low T: QFI dynamics without trapping; T=0.05, omega=0.02, u=0.1, family lambda",
                 family="lambda", notes="lambda in {0.05, 0.1, 0.2}; tau log over [1e1, 1e7]"),
    FigurePreset("fig4b", UDW, {"T": 0.05, "omega0": 0.3, "u": 0.1},
                 (_tau(1), Axis.listed("lambda", (0.05, 0.1, 0.2))),
                 "UDW, low T: QFI dynamics with trapping; T=0.05, omega=0.3, u=0.1, family lambda",
                 family="lambda", notes="lambda in {0.05, 0.1, 0.2}; tau log over [1e1, 1e7]"),
    FigurePreset("fig4c", UDW, {"T": 0.001, "omega0": 0.3, "lambda": 0.1},
                 (_tau(1), Axis.listed("u", (4.0, 5.0, 6.0))),
                 "UDW, low T: QFI dynamics with trapping; T=0.001, omega=0.3, lambda=0.1, family u",
                 family="u", notes="u in {4, 5, 6}; tau log over [1e1, 1e7]"),
    FigurePreset("fig5a", TD, {"T": 0.01, "lambda": 0.01},
                 (_u(), Axis.listed("omega0", (0.005, 0.01, 0.015, 0.02))),
                 "TD, low T: QFI vs u; T=0.01, lambda=0.01, family omega",
                 family="omega0", notes=f"omega in {{0.005, 0.01, 0.015, 0.02}}; {_STATIC_TAU}"),
    FigurePreset("fig5b", TD, {"omega0": 0.01, "lambda": 0.2},
                 (_t_low(), Axis.listed("u", (0.1, 1.0, 2.0))),
                 "TD, low T: QFI vs T; omega=0.01, lambda=0.2, family u",
                 family="u", notes=f"u in {{0.1, 1, 2}}; {_STATIC_TAU}"),
    FigurePreset("fig5c", TD, {"T": 0.05, "omega0": 0.2, "lambda": 0.06},
                 (_tau(3), Axis.listed("u", (0.1, 0.5, 1.0))),
                 "TD, low T: QFI dynamics with trapping; T=0.05, omega=0.2, lambda=0.06, family u",
                 family="u", notes="u in {0.1, 0.5, 1}; tau log over [1e3, 1e9]"),
    FigurePreset("fig6", UDW, {"T": 100.0, "lambda": 0.1, "omega0": 10.0},
                 (_theta(), Axis.listed("u", (1.0, 3.0, 5.0))),
                 "UDW, normal T: QFI vs theta; T=100, lambda=0.1, omega=10, family u",
                 family="u", notes=f"u in {{1, 3, 5}}; {_STATIC_TAU}"),
    FigurePreset("fig7a", UDW, {"T": 300.0, "u": 7.2, "omega0": 0.01},
                 (_tau(-2), Axis.listed("lambda", (0.3, 0.5, 0.7, 1.0))),
                 "UDW, normal T: QFI dynamics; T=300, u=7.2, omega=0.01, family lambda",
                 family="lambda", notes="lambda in {0.3, 0.5, 0.7, 1}; tau log over [1e-2, 1e4]"),
    FigurePreset("fig7b", UDW, {"T": 300.0, "lambda": 0.7, "omega0": 0.01},
                 (_tau(-2), Axis.listed("u", (5.0, 6.0, 7.2, 8.0))),
                 "UDW, normal T: QFI dynamics; T=300, lambda=0.7, omega=0.01, family u",
                 family="u", notes="u in {5, 6, 7.2, 8}; tau log over [1e-2, 1e4]"),
    FigurePreset("fig8a", UDW, {"T": 300.0, "lambda": 2.5},
                 (_u(), Axis.listed("omega0", (0.01, 0.05, 0.1))),
                 "UDW, normal T: QFI vs u; T=300, lambda=2.5, low-frequency family omega",
                 family="omega0", notes=f"omega in {{0.01, 0.05, 0.1}}; {_STATIC_TAU}"),
    FigurePreset("fig8b", UDW, {"T": 300.0, "lambda": 2.5},
                 (_u(), Axis.listed("omega0", (10.0, 50.0, 100.0))),
                 "UDW, normal T: QFI vs u; T=300, lambda=2.5, high-frequency family omega",
                 family="omega0", notes=f"omega in {{10, 50, 100}}; {_STATIC_TAU}"),
    FigurePreset("fig9", TD, {"T": 160.0, "lambda": 0.06},
                 (_u(), Axis.listed("omega0", (0.01, 0.05, 0.1))),
                 "TD, normal T: QFI vs u; T=160, lambda=0.06, family omega",
                 family="omega0", notes=f"omega in {{0.01, 0.05, 0.1}}; {_STATIC_TAU}"),
    FigurePreset("fig10a", UDW, {"T": 100.0, "omega0": 0.1, "u": 30.0, "theta": _PI},
                 (Axis.log("lambda", 0.001, 0.3, 41),),
                 "UDW: minimal total variance of joint (T, theta) estimation vs lambda; "
                 "T=100, omega=0.1, u=30, theta=pi",
                 quantity="delta_s", companions=("delta_i", "ratio_r"),
                 notes=f"lambda range [0.001, 0.3]; {_STATIC_TAU}"),
    FigurePreset("fig10b", UDW, {"T": 0.001, "omega0": 0.01, "lambda": 0.05, "u": 10.0},
                 (_theta(),),
                 "UDW: minimal total variance of joint (T, theta) estimation vs theta; "
                 "T=0.001, omega=0.01, lambda=0.05, u=10",
                 quantity="delta_s", companions=("delta_i", "ratio_r"), notes=_STATIC_TAU),
]

PRESETS: dict[str, FigurePreset] = {p.id: p for p in _PRESET_LIST}
assert len(PRESETS) == len(_PRESET_LIST), "duplicate preset id"


def get_preset(preset_id: str) -> FigurePreset:
    try:
        return PRESETS[preset_id]
    except KeyError:
        raise UnknownPresetError(preset_id) from None


def figure_preset(preset_id: str) -> SweepSpec:
    """The sweep for figure panel ``preset_id`` (e.g. "fig2a")."""
    return get_preset(preset_id).spec()


def run_preset(preset_id: str) -> SweepResult:
    preset = get_preset(preset_id)
    result = run_sweep(preset.spec())
    result.metadata.update(preset.metadata())
    return result


def family_curves(result: SweepResult) -> Iterator[tuple[float, np.ndarray, np.ndarray]]:
    """For a (sweep axis, family axis) result: yield (family value, xs, primary values)."""
    if len(result.axes) != 2:
        raise SweepError("family_curves needs a two-axis result")
    sweep_axis, fam_axis = result.axes
    for j, fv in enumerate(fam_axis.values):
        yield fv, np.array(sweep_axis.values), result.values[:, j]


__all__ = [
    "AXIS_NAMES", "QUANTITY_COLUMNS", "Axis", "SweepSpec", "SweepResult", "FigurePreset",
    "SweepError", "BracketError", "InsufficientSpanError", "UnknownPresetError", "PRESETS",
    "evaluate_point", "run_sweep", "golden_maximize", "grid_bracket", "refine_argmax",
    "trapping_detector", "peak_to_plateau", "relaxation_time", "steady_state_for",
    "figure_preset", "get_preset", "run_preset", "family_curves",
]
