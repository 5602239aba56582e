import csv
import io
import math
import subprocess
import sys

import pytest

from thermoprobe import __version__, scan
from thermoprobe.cli import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_PARTIAL,
    EXIT_USAGE,
    ConfigError,
    CsvTable,
    format_float,
    main,
    parse_number,
    parse_value,
)
from thermoprobe.rates import BathParams, ProbeParams, rate_bundle


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    """(metadata dict, list of row dicts) from a rendered CSV."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# ") and ": " in line:
            key, value = line[2:].split(": ", 1)
            meta[key] = value
        elif not line.startswith("#"):
            body.append(line)
    return meta, list(csv.DictReader(io.StringIO("\n".join(body))))


def without_timestamp(text):
    return "\n".join(l for l in text.splitlines() if not l.startswith("# generated:"))


class TestParsing:
    @pytest.mark.parametrize("text,value", [
        ("1.5", 1.5), ("1e-3", 1e-3), ("pi", math.pi), ("pi/2", math.pi / 2), ("-2", -2.0),
    ])
    def test_numbers(self, text, value):
        assert parse_number("theta", text) == value

    @pytest.mark.parametrize("text", ["nan", "inf", "abc", "pi/0", ""])
    def test_bad_numbers_name_the_key(self, text):
        with pytest.raises(ConfigError, match="key 'T'"):
            parse_number("T", text)

    def test_lists_and_flags(self):
        assert parse_value("T", "0.5,1,2") == (0.5, 1.0, 2.0)
        assert parse_value("include_lamb", "off") == (False,)
        with pytest.raises(ConfigError, match="single value"):
            parse_value("cutoff_eps", "0.1,0.2")

    def test_axis(self):
        (axis,) = parse_value("axis", "T:0.1:10:3:log")
        assert axis.name == "T" and axis.values == pytest.approx((0.1, 1.0, 10.0))
        with pytest.raises(ConfigError, match="key 'axis'"):
            parse_value("axis", "T:1:2")


class TestFormatting:
    @pytest.mark.parametrize("x", [0.1, 1 / 3, math.pi, 1e-300, 5e-324, 1.7976931348623157e308, -2.5])
    def test_round_trip(self, x):
        assert float(format_float(x)) == x

    def test_special_values(self):
        assert format_float(math.nan) == "nan"
        assert format_float(-math.inf) == "-inf"

    def test_column_names_are_snake_case(self):
        with pytest.raises(ValueError):
            CsvTable(columns=("T",))


class TestRates:
    def test_mean_excitation_at_unit_ratio(self, capsys):
        code, out, err = run(capsys, "rates", "T=1", "omega0=1", "lambda=0.1")
        assert code == EXIT_OK and err.startswith(f"thermoprobe {__version__}")
        meta, rows = table(out)
        assert "units" in meta and "generated" in meta
        assert float(rows[0]["n_mean"]) == pytest.approx(1 / (math.e - 1), rel=1e-8)

    def test_zero_coupling_gives_zero_rate(self, capsys):
        code, out, _ = run(capsys, "rates", "T=1", "omega0=1", "lambda=0")
        assert code == EXIT_OK
        assert float(table(out)[1][0]["gamma0"]) == 0.0

    def test_td_row_is_bitwise_library_value(self, capsys):
        code, out, _ = run(capsys, "rates", "--coupling", "td", "T=0.7", "u=2", "omega0=0.4",
                           "lambda=0.2")
        row = table(out)[1][0]
        b = rate_bundle(ProbeParams(0.4, 0.2, 2.0, coupling="td"), BathParams(0.7))
        assert row["coupling"] == "td"
        for col, attr in [("gamma0", "gamma0"), ("n_mean", "n_mean"), ("dn_dt", "dn_dT"),
                          ("delta", "delta"), ("m_factor", "m_factor")]:
            assert float(row[col]) == getattr(b, attr)

    def test_cartesian_product(self, capsys):
        _, out, _ = run(capsys, "rates", "T=0.5,1,2", "omega0=1", "lambda=0.1", "coupling=udw,td")
        rows = table(out)[1]
        assert len(rows) == 6
        assert [r["coupling"] for r in rows] == ["udw"] * 3 + ["td"] * 3


class TestQfi:
    def test_zero_time_carries_no_information(self, capsys):
        _, out, _ = run(capsys, "qfi", "T=1", "omega0=1", "lambda=0.3", "tau=0")
        row = table(out)[1][0]
        for col in ("qfi_closed", "qfi_bloch", "qfi_sld", "fi_sigma_z"):
            assert float(row[col]) == 0.0

    def test_sigma_z_is_optimal_for_ground_state(self, capsys):
        _, out, _ = run(capsys, "qfi", "T=0.3,3", "omega0=1", "lambda=0.3", "tau=5", "theta=pi")
        for row in table(out)[1]:
            assert row["status"] == "ok"
            assert float(row["fi_sigma_z"]) == pytest.approx(float(row["qfi_closed"]), rel=1e-12)
            assert float(row["route_spread"]) <= 1e-8

    def test_evolve_with_oracle(self, capsys):
        code, out, _ = run(capsys, "evolve", "T=0.5", "omega0=1", "lambda=0.3", "tau=3",
                           "theta=1", "oracle=true")
        row = table(out)[1][0]
        assert code == EXIT_OK
        assert float(row["rho_ee"]) + float(row["rho_gg"]) == pytest.approx(1.0, abs=1e-15)
        assert float(row["ode_trace_distance"]) <= 1e-8


class TestMultiparam:
    def test_ground_state_ratio_and_compatibility(self, capsys):
        _, out, _ = run(capsys, "multiparam", "T=100", "omega0=0.1", "lambda=0.1", "u=30",
                        "tau=1e3", "theta=pi")
        row = table(out)[1][0]
        assert float(row["ratio_r"]) == 2.0
        assert float(row["compat_residual"]) <= 1e-10

    def test_singular_row_is_flagged(self, capsys):
        code, out, _ = run(capsys, "multiparam", "T=1", "omega0=1", "lambda=0.3", "tau=0")
        assert code == EXIT_FAILED
        assert table(out)[1][0]["status"].startswith("error")


class TestScanAndFigure:
    def test_scan_grid(self, capsys):
        code, out, _ = run(capsys, "scan", "axis=T:0.1:10:5:log", "omega0=1", "lambda=0.3",
                           "tau=10", "companions=fi_sigma_z")
        meta, rows = table(out)
        assert code == EXIT_OK and len(rows) == 5
        assert list(rows[0]) == ["temperature", "qfi", "fi_sigma_z", "status"]
        assert meta["axis_T"].startswith("T log")

    def test_scan_rejects_fixing_swept_parameter(self, capsys):
        code, _, err = run(capsys, "scan", "axis=T:0.1:10:5", "T=1", "omega0=1", "lambda=0.3",
                           "tau=1")
        assert code == EXIT_USAGE and "key 'T'" in err

    def test_figure_grid_and_metadata(self, capsys):
        code, out, _ = run(capsys, "figure", "fig1a")
        meta, rows = table(out)
        assert code == EXIT_OK
        assert len(rows) == 41 * 33
        assert meta["preset"] == "fig1a" and "title" in meta

    def test_fig10a_columns(self, capsys):
        _, out, _ = run(capsys, "figure", "preset=fig10a")
        rows = table(out)[1]
        assert list(rows[0]) == ["lambda", "delta_s", "delta_i", "ratio_r", "status"]

    def test_figure_is_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, "figure", "fig10b", "--out", str(a))[0] == EXIT_OK
        assert run(capsys, "figure", "fig10b", "--out", str(b))[0] == EXIT_OK
        assert without_timestamp(a.read_text()) == without_timestamp(b.read_text())

    def test_unknown_preset_lists_ids(self, capsys):
        code, _, err = run(capsys, "figure", "fig99")
        assert code == EXIT_USAGE and "fig10b" in err

    def test_figure_rejects_overrides(self, capsys):
        code, _, err = run(capsys, "figure", "fig1a", "T=1")
        assert code == EXIT_USAGE and "key 'T'" in err

    def test_list(self, capsys):
        code, out, _ = run(capsys, "figure", "--list")
        assert code == EXIT_OK
        assert [line.split("\t")[0] for line in out.splitlines()] == list(scan.PRESETS)


class TestConfigAndErrors:
    def test_command_line_overrides_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# probe\nT = 2\nomega0 = 1\nlambda = 0.1\n")
        _, out, _ = run(capsys, "rates", "--config", str(cfg), "T=1")
        meta, rows = table(out)
        assert rows[0]["temperature"] == "1" and rows[0]["omega0"] == "1"
        assert meta["config_T"] == "1"

    def test_config_file_errors_cite_line(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("T = 1\nlamda = 0.1\n")
        code, _, err = run(capsys, "rates", "--config", str(cfg))
        assert code == EXIT_USAGE and "line 2" in err and "lamda" in err

    def test_unknown_key_names_it(self, capsys):
        code, out, err = run(capsys, "rates", "T=1", "omega0=1", "lamda=0.1")
        assert code == EXIT_USAGE and out == "" and "'lamda'" in err

    def test_missing_required_key(self, capsys):
        code, _, err = run(capsys, "rates", "T=1", "omega0=1")
        assert code == EXIT_USAGE and "'lambda'" in err

    def test_conflicting_coupling(self, capsys):
        code, _, err = run(capsys, "rates", "--coupling", "td", "coupling=udw", "T=1",
                           "omega0=1", "lambda=0.1")
        assert code == EXIT_USAGE and "coupling" in err

    def test_partial_failure(self, capsys):
        code, out, err = run(capsys, "rates", "T=-1,1", "omega0=1", "lambda=0.1")
        rows = table(out)[1]
        assert code == EXIT_PARTIAL
        assert rows[0]["status"].startswith("error") and rows[1]["status"] == "ok"
        assert "1 of 2 rows failed" in err

    def test_every_row_failed(self, capsys):
        code, _, _ = run(capsys, "rates", "T=-1", "omega0=1", "lambda=0.1")
        assert code == EXIT_FAILED

    def test_usage_error_from_argparse(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["rates", "--bogus"])
        assert exc.value.code == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "thermoprobe", "rates", "T=1", "omega0=1",
                           "lambda=0.1"], capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_OK
    assert proc.stdout.startswith(f"# thermoprobe {__version__} rates")
