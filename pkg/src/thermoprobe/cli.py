"""Command-line front end: ``thermoprobe <subcommand> [key=value ...]``.

Parameters are given as ``key=value`` words, optionally preceded by a
``--config`` file of ``key = value`` lines (``#`` starts a comment);
command-line words override the file. Numeric keys accept comma-separated
lists, and row-wise subcommands evaluate the cartesian product of all lists.

Output is CSV: ``#`` comment lines with the run metadata, then a header of
lowercase column names, then one row per point. Floats are written with 17
significant digits so that they parse back to the identical double.

Exit status: 0 on success, 1 when every row (or the whole command) failed,
2 on a usage or configuration error, 3 when only some rows failed. Failed
rows stay in the table with NaN values and the reason in ``status``.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import re
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__, scan
from .dynamics import EvolutionContext, bloch_vector, evolve, evolve_ode_oracle, trace_distance
from .estimation import estimation_report, ratio_r
from .numerics import NumericsError, OdeSpec
from .rates import BathParams, CouplingKind, ProbeParams, rate_bundle

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3

UNITS_BANNER = ("units: scaled, hbar = c = k_B = 1; temperature, gap and rates share "
                "one energy unit, proper time is its inverse; angles in radians")

# Exceptions that mark a single row as failed. Anything else is a bug.
ROW_ERRORS = (ValueError, ArithmeticError, NumericsError)

_COLUMN_RE = re.compile(r"^[a-z][a-z0-9_]*$")


class ConfigError(ValueError):
    """A configuration word or file line that cannot be accepted."""

    def __init__(self, key: str | None, message: str):
        self.key = key
        super().__init__(f"key {key!r}: {message}" if key else message)


# --------------------------------------------------------------------------
# parameter vocabulary


@dataclass(frozen=True)
class ParamKey:
    kind: str  # number | flag | coupling | quantity | axis | preset
    listable: bool = False
    doc: str = ""


VOCABULARY: dict[str, ParamKey] = {
    "T": ParamKey("number", True, "bath temperature"),
    "u": ParamKey("number", True, "rapidity of the probe (velocity = tanh u)"),
    "omega0": ParamKey("number", True, "bare energy gap"),
    "lambda": ParamKey("number", True, "coupling strength"),
    "theta": ParamKey("number", True, "initial polar angle, in [0, pi]"),
    "phi": ParamKey("number", True, "initial azimuthal phase, in [0, 2 pi)"),
    "tau": ParamKey("number", True, "proper interaction time"),
    "coupling": ParamKey("coupling", True, "udw or td"),
    "cutoff_eps": ParamKey("number", False, "Lamb-shift regulator"),
    "include_lamb": ParamKey("flag", False, "include the Lamb shift in the dynamics"),
    "oracle": ParamKey("flag", False, "evolve: also integrate the master equation"),
    "quantity": ParamKey("quantity", False, "scan: primary quantity"),
    "companions": ParamKey("quantity", True, "scan: extra quantities"),
    "axis": ParamKey("axis", False, "scan: NAME:min:max:count[:log|linear]"),
    "axis2": ParamKey("axis", False, "scan: second free axis"),
    "preset": ParamKey("preset", False, "figure: preset id"),
    "route_tol": ParamKey("number", False, "qfi: allowed relative spread of the routes"),
    "compat_tol": ParamKey("number", False, "qfi/multiparam: allowed compatibility residual"),
    "ode_tol": ParamKey("number", False, "evolve: local error target of the oracle"),
}

DEFAULTS: dict[str, tuple] = {
    "coupling": ("udw",),
    "u": (0.0,),
    "theta": (math.pi,),
    "phi": (0.0,),
    "cutoff_eps": (0.01,),
    "include_lamb": (True,),
    "oracle": (False,),
    "quantity": ("qfi",),
    "companions": (),
    "route_tol": (1e-8,),
    "compat_tol": (1e-10,),
    "ode_tol": (1e-10,),
}

# CSV column for each physical parameter
PARAM_COLUMNS = {"T": "temperature", "u": "u", "omega0": "omega0", "lambda": "lambda",
                 "theta": "theta", "phi": "phi", "tau": "tau"}

_FLAG_TOKENS = {"true": True, "yes": True, "on": True, "1": True,
                "false": False, "no": False, "off": False, "0": False}


def parse_number(key: str, text: str) -> float:
    token = text.strip().lower()
    if token == "pi":
        return math.pi
    if token.startswith("pi/"):
        divisor = parse_number(key, token[3:])
        if divisor == 0:
            raise ConfigError(key, f"{text!r} divides by zero")
        return math.pi / divisor
    try:
        value = float(token)
    except ValueError:
        raise ConfigError(key, f"{text!r} is not a decimal number") from None
    if not math.isfinite(value):
        raise ConfigError(key, f"{text!r} is not finite")
    return value


def _parse_axis(key: str, text: str) -> scan.Axis:
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise ConfigError(key, f"expected NAME:min:max:count[:log|linear], got {text!r}")
    name = parts[0]
    if name not in scan.AXIS_NAMES:
        raise ConfigError(key, f"unknown axis {name!r}; expected one of {scan.AXIS_NAMES}")
    lo = parse_number(key, parts[1])
    hi = parse_number(key, parts[2])
    try:
        count = int(parts[3])
    except ValueError:
        raise ConfigError(key, f"axis count {parts[3]!r} is not an integer") from None
    scale = parts[4] if len(parts) == 5 else "linear"
    try:
        if scale == "log":
            return scan.Axis.log(name, lo, hi, count)
        if scale == "linear":
            return scan.Axis.linear(name, lo, hi, count)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None
    raise ConfigError(key, f"axis scale must be 'log' or 'linear', got {scale!r}")


def parse_value(key: str, text: str) -> tuple:
    """Parse the text of ``key=text`` into a tuple of values."""
    if key not in VOCABULARY:
        raise ConfigError(key, f"unknown key; valid keys are {', '.join(VOCABULARY)}")
    spec = VOCABULARY[key]
    if not spec.listable and "," in text:
        raise ConfigError(key, f"takes a single value, got {text!r}")
    items = [t.strip() for t in text.split(",")] if spec.listable else [text.strip()]
    if any(not t for t in items):
        raise ConfigError(key, "empty value")
    out = []
    for item in items:
        if spec.kind == "number":
            out.append(parse_number(key, item))
        elif spec.kind == "flag":
            if item.lower() not in _FLAG_TOKENS:
                raise ConfigError(key, f"expected true or false, got {item!r}")
            out.append(_FLAG_TOKENS[item.lower()])
        elif spec.kind == "coupling":
            try:
                out.append(CouplingKind.parse(item).value)
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        elif spec.kind == "quantity":
            if item not in scan.QUANTITY_COLUMNS:
                raise ConfigError(key, f"unknown quantity {item!r}; expected one of "
                                       f"{', '.join(scan.QUANTITY_COLUMNS)}")
            out.append(item)
        elif spec.kind == "axis":
            out.append(_parse_axis(key, item))
        else:
            out.append(item)
    return tuple(out)


def parse_assignment(word: str) -> tuple[str, str]:
    key, sep, value = word.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(None, f"expected key=value, got {word!r}")
    return key, value


def read_config_file(path: str | Path) -> dict[str, tuple]:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    values: dict[str, tuple] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(None, f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = parse_assignment(line)
        try:
            values[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(key, f"{exc} (config line {lineno})") from None
    return values


# --------------------------------------------------------------------------
# run configuration and tables


@dataclass
class RunConfig:
    subcommand: str
    values: dict[str, tuple] = field(default_factory=dict)
    out: str | None = None

    def given(self, key: str) -> bool:
        return key in self.values

    def many(self, key: str) -> tuple:
        if key in self.values:
            return self.values[key]
        if key in DEFAULTS:
            return DEFAULTS[key]
        raise ConfigError(key, f"required by '{self.subcommand}' but not given")

    def one(self, key: str):
        values = self.many(key)
        if len(values) != 1:
            raise ConfigError(key, f"'{self.subcommand}' takes a single value")
        return values[0]

    @property
    def preset(self) -> str | None:
        return self.values.get("preset", (None,))[0]

    @property
    def tolerances(self) -> dict[str, float]:
        return {k: self.one(k) for k in ("route_tol", "compat_tol", "ode_tol")}

    def metadata(self) -> dict[str, str]:
        meta = {}
        for key in VOCABULARY:
            if key in self.values:
                meta[f"config_{key}"] = ",".join(_meta_text(v) for v in self.values[key])
        return meta


def _meta_text(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, scan.Axis):
        return value.describe()
    return str(value)


def format_float(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class CsvTable:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)
    failed_rows: int = 0

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for c in self.columns:
            if not _COLUMN_RE.match(c):
                raise ValueError(f"column name {c!r} is not lowercase snake-case")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")

    def append(self, row: Sequence, failed: bool = False) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))
        self.failed_rows += bool(failed)

    @property
    def exit_code(self) -> int:
        if self.failed_rows == 0:
            return EXIT_OK
        if self.failed_rows == len(self.rows):
            return EXIT_FAILED
        return EXIT_PARTIAL

    def render(self, command: str, timestamp: str | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# thermoprobe {__version__} {command}\n")
        buf.write(f"# {UNITS_BANNER}\n")
        if timestamp is not None:
            buf.write(f"# generated: {timestamp}\n")
        for key, value in self.metadata.items():
            text = " ".join(str(value).split())
            buf.write(f"# {key}: {text}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def _status(exc: BaseException) -> str:
    return f"error: {type(exc).__name__}: {' '.join(str(exc).split())}"


# --------------------------------------------------------------------------
# row-wise subcommands

_GRID_ORDER = ("coupling", "T", "u", "omega0", "lambda", "theta", "phi", "tau")


def _grid(cfg: RunConfig, keys: Sequence[str]):
    """Cartesian product over ``keys`` in a fixed order (row order of the output)."""
    ordered = [k for k in _GRID_ORDER if k in keys]
    for combo in itertools.product(*(cfg.many(k) for k in ordered)):
        yield dict(zip(ordered, combo))


def _probe(point: dict, cutoff_eps: float) -> tuple[ProbeParams, BathParams]:
    p = ProbeParams(omega0=point["omega0"], lam=point["lambda"], u=point["u"],
                    theta=point.get("theta", math.pi), phi=point.get("phi", 0.0),
                    coupling=point["coupling"])
    return p, BathParams(point["T"], cutoff_eps)


def _row_table(cfg: RunConfig, keys: Sequence[str], outputs: Sequence[str],
               compute: Callable[[dict], tuple[list[float], str]]) -> CsvTable:
    param_cols = ["coupling"] + [PARAM_COLUMNS[k] for k in _GRID_ORDER[1:] if k in keys]
    table = CsvTable(columns=(*param_cols, *outputs, "status"), metadata=cfg.metadata())
    for point in _grid(cfg, keys):
        params = [point["coupling"]] + [point[k] for k in _GRID_ORDER[1:] if k in keys]
        try:
            values, status = compute(point)
        except ROW_ERRORS as exc:
            table.append([*params, *([math.nan] * len(outputs)), _status(exc)], failed=True)
            continue
        table.append([*params, *values, status], failed=status != "ok")
    return table


_RATE_KEYS = ("coupling", "T", "u", "omega0", "lambda")
_STATE_KEYS = _RATE_KEYS + ("theta", "phi", "tau")


def cmd_rates(cfg: RunConfig) -> CsvTable:
    eps = cfg.one("cutoff_eps")
    include_lamb = cfg.one("include_lamb")

    def compute(point):
        p, b = _probe(point, eps)
        r = rate_bundle(p, b, include_lamb=include_lamb)
        return [r.gamma0, r.n_mean, r.dn_dT, r.delta, r.omega_shifted, r.m_factor], "ok"

    return _row_table(cfg, _RATE_KEYS,
                      ("gamma0", "n_mean", "dn_dt", "delta", "omega_shifted", "m_factor"), compute)


def cmd_evolve(cfg: RunConfig) -> CsvTable:
    eps = cfg.one("cutoff_eps")
    include_lamb = cfg.one("include_lamb")
    oracle = cfg.one("oracle")
    ode = OdeSpec(local_error_tol=cfg.tolerances["ode_tol"])
    outputs = ["rho_ee", "rho_gg", "rho_eg_re", "rho_eg_im", "purity",
               "bloch_x", "bloch_y", "bloch_z"]
    if oracle:
        outputs.append("ode_trace_distance")

    def compute(point):
        p, b = _probe(point, eps)
        ctx = EvolutionContext.build(p, b, point["tau"], include_lamb=include_lamb)
        state = evolve(p, ctx)
        rho = state.rho
        w = bloch_vector(state)
        values = [rho[0, 0].real, rho[1, 1].real, rho[0, 1].real, rho[0, 1].imag,
                  state.purity, w.wx, w.wy, w.wz]
        if oracle:
            values.append(trace_distance(state, evolve_ode_oracle(p, ctx, ode)))
        return [float(v) for v in values], "ok"

    return _row_table(cfg, _STATE_KEYS, outputs, compute)


def cmd_qfi(cfg: RunConfig) -> CsvTable:
    eps = cfg.one("cutoff_eps")
    include_lamb = cfg.one("include_lamb")
    tol = cfg.tolerances

    def compute(point):
        p, b = _probe(point, eps)
        r = estimation_report(p, b, point["tau"], include_lamb=include_lamb)
        routes = (r.qfi_closed, r.qfi_bloch, r.qfi_sld)
        top = max(abs(q) for q in routes)
        spread = (max(routes) - min(routes)) / top if top else 0.0
        problems = []
        if spread > tol["route_tol"]:
            problems.append(f"routes disagree (relative spread {spread:.3g})")
        if r.compat_residual > tol["compat_tol"]:
            problems.append(f"compatibility residual {r.compat_residual:.3g}")
        status = "; ".join(problems) if problems else "ok"
        return [*routes, r.fi_sigma_z, spread, r.compat_residual], status

    return _row_table(cfg, _STATE_KEYS,
                      ("qfi_closed", "qfi_bloch", "qfi_sld", "fi_sigma_z", "route_spread",
                       "compat_residual"), compute)


def cmd_multiparam(cfg: RunConfig) -> CsvTable:
    eps = cfg.one("cutoff_eps")
    include_lamb = cfg.one("include_lamb")
    tol = cfg.tolerances

    def compute(point):
        p, b = _probe(point, eps)
        r = estimation_report(p, b, point["tau"], include_lamb=include_lamb)
        h = r.qfi_matrix
        values = [h.h_tt, h.h_ttheta, h.h_thetatheta, r.delta_i, r.delta_s, r.ratio_r,
                  r.compat_residual]
        problems = []
        if math.isnan(r.ratio_r):
            try:
                ratio_r(h)
            except ArithmeticError as exc:
                problems.append(_status(exc))
        if r.compat_residual > tol["compat_tol"]:
            problems.append(f"compatibility residual {r.compat_residual:.3g}")
        return values, "; ".join(problems) if problems else "ok"

    return _row_table(cfg, _STATE_KEYS,
                      ("h_tt", "h_ttheta", "h_thetatheta", "delta_i", "delta_s", "ratio_r",
                       "compat_residual"), compute)


# --------------------------------------------------------------------------
# sweeps


def _sweep_table(result: scan.SweepResult, metadata: dict[str, str]) -> CsvTable:
    spec = result.spec
    axis_cols = [PARAM_COLUMNS[a.name] for a in spec.axes]
    missing = dict(result.missing)
    meta = {**result.metadata, **metadata}
    if result.missing:
        meta["missing_points"] = str(len(result.missing))
    table = CsvTable(columns=(*axis_cols, *spec.columns, "status"), metadata=meta)
    for index, row in zip(np.ndindex(*spec.shape), result.rows()):
        reason = missing.get(index)
        cells = [float(row[a.name]) for a in spec.axes] + [row[c] for c in spec.columns]
        table.append([*cells, f"error: {reason}" if reason else "ok"], failed=reason is not None)
    return table


_SWEEP_PARAMS = ("T", "u", "omega0", "lambda", "theta", "phi", "tau")


def cmd_scan(cfg: RunConfig) -> CsvTable:
    axes = [cfg.one("axis")]
    if cfg.given("axis2"):
        axes.append(cfg.one("axis2"))
    free = {a.name for a in axes}
    if len(free) != len(axes):
        raise ConfigError("axis2", "must differ from axis")
    fixed = {}
    for key in _SWEEP_PARAMS:
        if key in free:
            if cfg.given(key):
                raise ConfigError(key, "is swept by an axis and cannot also be fixed")
            continue
        fixed[key] = cfg.one(key)
    try:
        spec = scan.SweepSpec(axes=tuple(axes), fixed=fixed, quantity=cfg.one("quantity"),
                              coupling=cfg.one("coupling"), companions=cfg.many("companions"),
                              include_lamb=cfg.one("include_lamb"),
                              cutoff_eps=cfg.one("cutoff_eps"))
    except scan.SweepError as exc:
        raise ConfigError("axis", str(exc)) from None
    return _sweep_table(scan.run_sweep(spec), cfg.metadata())


_FIGURE_KEYS = {"preset"}


def cmd_figure(cfg: RunConfig) -> CsvTable:
    preset_id = cfg.preset
    if preset_id is None:
        raise ConfigError("preset", f"required; valid ids are {', '.join(scan.PRESETS)}")
    extra = set(cfg.values) - _FIGURE_KEYS
    if extra:
        raise ConfigError(sorted(extra)[0], "not accepted by 'figure' (presets are fixed)")
    try:
        result = scan.run_preset(preset_id)
    except scan.UnknownPresetError as exc:
        raise ConfigError("preset", str(exc.args[0]) if exc.args else str(exc)) from None
    return _sweep_table(result, {})


COMMANDS: dict[str, Callable[[RunConfig], CsvTable]] = {
    "rates": cmd_rates,
    "evolve": cmd_evolve,
    "qfi": cmd_qfi,
    "scan": cmd_scan,
    "figure": cmd_figure,
    "multiparam": cmd_multiparam,
}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--coupling", choices=[c.value for c in CouplingKind],
                        help="coupling of the probe to the field (default udw)")
    common.add_argument("--out", metavar="PATH", help="write the CSV here instead of stdout")
    common.add_argument("--config", metavar="PATH",
                        help="file of 'key = value' lines; command-line words override it")

    parser = argparse.ArgumentParser(
        prog="thermoprobe",
        description="Temperature estimation with a moving two-level probe in a thermal field.",
        epilog="Keys: " + ", ".join(f"{k} ({v.doc})" for k, v in VOCABULARY.items()))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    helps = {
        "rates": "decay rate, mean excitation, dN/dT and Lamb shift per parameter tuple",
        "evolve": "closed-form probe state at proper time tau",
        "qfi": "temperature QFI by three routes plus the sigma_z Fisher information",
        "scan": "sweep one quantity over one or two axes",
        "figure": "run a named figure preset",
        "multiparam": "QFI matrix over (T, theta) and the variance ratio R",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        p.add_argument("assignments", nargs="*", metavar="key=value")
        if name == "figure":
            p.add_argument("--list", action="store_true", help="list preset ids and exit")
    sub.add_parser("selftest", help="run the acceptance checks and report pass/fail",
                   description="Run the acceptance checks and report pass/fail per criterion.")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the config file (lowest precedence), then the command line."""
    values: dict[str, tuple] = {}
    if args.config:
        values.update(read_config_file(args.config))
    given: dict[str, tuple] = {}
    for word in args.assignments:
        if args.subcommand == "figure" and "=" not in word:
            word = f"preset={word}"
        key, text = parse_assignment(word)
        given[key] = parse_value(key, text)
    if args.coupling:
        if given.get("coupling", (args.coupling,)) != (args.coupling,):
            raise ConfigError("coupling", "conflicts with --coupling")
        given["coupling"] = (args.coupling,)
    values.update(given)
    return RunConfig(subcommand=args.subcommand, values=values, out=args.out)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    # key=value words may follow options; argparse leaves those over
    args, extra = parser.parse_known_args(argv)
    for word in extra:
        if word.startswith("-") or args.subcommand == "selftest":
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
    if extra:
        args.assignments = [*args.assignments, *extra]
    print(f"thermoprobe {__version__} - {UNITS_BANNER}", file=sys.stderr)

    if args.subcommand == "selftest":
        from .selftest import run_all
        results = run_all(sys.stdout)
        failed = sum(not r.passed for r in results)
        print(f"{len(results) - failed}/{len(results)} criteria passed", file=sys.stdout)
        return EXIT_OK if failed == 0 else EXIT_FAILED

    if args.subcommand == "figure" and args.list:
        for preset in scan.PRESETS.values():
            print(f"{preset.id}\t{preset.title}")
        return EXIT_OK

    try:
        cfg = build_config(args)
        table = COMMANDS[args.subcommand](cfg)
    except ConfigError as exc:
        print(f"thermoprobe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ROW_ERRORS as exc:
        print(f"thermoprobe: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED

    text = table.render(args.subcommand, _timestamp())
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if table.failed_rows:
        first = next(r[-1] for r in table.rows if r[-1] != "ok")
        print(f"thermoprobe: {table.failed_rows} of {len(table.rows)} rows failed; "
              f"first: {first}", file=sys.stderr)
    return table.exit_code


if __name__ == "__main__":
    sys.exit(main())
