"""Command-line surface: formats, exit codes, determinism."""

import csv
import io
import json
import math

import pytest

import parklab.solver
from parklab import SegmentedGrid, mean_closed
from parklab.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestTable:
    def test_closed_form_rows(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--lambda", "1", "--kind", "M",
                               "--n", "3", "--m", "4")
        assert code == 0
        rows = parse_csv(out)
        assert len(rows) == 3 * 5
        for row in rows:
            x, v, seg = float(row["x"]), float(row["value"]), int(row["segment"])
            if x == int(x) and seg == int(x) and x > 0:
                ref = mean_closed(x + 1e-12, 1.0)  # right-limit row at a shared abscissa
            else:
                ref = mean_closed(x, 1.0)
            assert v == pytest.approx(ref, abs=1e-9)

    def test_shared_abscissae_emitted_twice(self, capsys):
        _, out, _ = run_cli(capsys, "table", "--lambda", "1", "--kind", "Mprime",
                            "--n", "3", "--m", "4")
        rows = parse_csv(out)
        at_two = [(r["value"], r["segment"]) for r in rows if float(r["x"]) == 2.0]
        assert len(at_two) == 2
        assert at_two[0][1] != at_two[1][1]
        assert at_two[0][0] != at_two[1][0]  # genuine jump at x=2

    def test_second_moment_solves_dependencies_itself(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--lambda", "1", "--kind", "M2",
                               "--n", "3", "--m", "4")
        assert code == 0
        assert len(parse_csv(out)) == 15

    def test_uniform_kind_needs_no_rate(self, capsys):
        code, out, _ = run_cli(capsys, "table", "--kind", "uniformMprime",
                               "--n", "4", "--m", "4")
        assert code == 0
        rows = parse_csv(out)
        vals = [float(r["value"]) for r in rows if r["segment"] == "2"]
        assert vals[0] == pytest.approx(2.0)

    def test_rated_kind_requires_rate(self, capsys):
        code, _, err = run_cli(capsys, "table", "--kind", "M", "--n", "3", "--m", "4")
        assert code == 2
        assert "--lambda" in err

    def test_odd_resolution_rejected(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["table", "--lambda", "1", "--kind", "M", "--n", "3", "--m", "3"])
        assert exc.value.code == 2
        assert "even" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, capsys):
        _, out1, _ = run_cli(capsys, "table", "--lambda", "0.5", "--kind", "M2",
                             "--n", "4", "--m", "8")
        _, out2, _ = run_cli(capsys, "table", "--lambda", "0.5", "--kind", "M2",
                             "--n", "4", "--m", "8")
        assert out1 == out2


class TestConstants:
    def test_json_schema_and_pure_tail_values(self, capsys):
        code, out, _ = run_cli(capsys, "constants", "--lambda", "1",
                               "--tail", "crude", "--n", "0")
        assert code == 0
        payload = json.loads(out)
        assert set(payload) == {
            "lambda", "n", "m", "tail_method", "c_lo", "c_hi", "b_lo", "b_hi",
            "d_lo", "d_hi", "envelope_inf", "envelope_sup",
            "quadrature_halving_delta", "uniform_fallback",
        }
        q = math.exp(-1.0)
        assert payload["c_lo"] == pytest.approx(0.5 * (1 + q / (1 - q * q)), abs=1e-13)
        assert payload["c_hi"] == pytest.approx(0.5 * (1 + q / (1 - q)), abs=1e-13)

    def test_envelope_fields_present(self, capsys):
        code, out, _ = run_cli(capsys, "constants", "--lambda", "1", "--n", "5", "--m", "64")
        payload = json.loads(out)
        assert code == 0
        assert payload["tail_method"] == "envelope"
        assert payload["envelope_inf"] <= payload["envelope_sup"]
        assert payload["quadrature_halving_delta"] is not None

    def test_unknown_flag_rejected(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["constants", "--lambda", "1", "--bogus", "2"])
        assert exc.value.code == 2

    def test_bad_horizon_rejected(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["constants", "--lambda", "1", "--n", "2"])
        assert exc.value.code == 2


class TestSweep:
    def test_method_switches_at_rate_three(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "--lambda-min", "2", "--lambda-max", "4",
                               "--steps", "5", "--n", "5", "--m", "32")
        assert code == 0
        rows = parse_csv(out)
        methods = {float(r["lambda"]): r["method"] for r in rows}
        assert methods[2.0] == "envelope" and methods[2.5] == "envelope"
        assert methods[3.0] == "crude" and methods[4.0] == "crude"

    def test_single_step_matches_constants_command(self, capsys):
        _, sweep_out, _ = run_cli(capsys, "sweep", "--lambda-min", "1", "--lambda-max", "1",
                                  "--steps", "1", "--n", "5", "--m", "64")
        row = parse_csv(sweep_out)[0]
        _, const_out, _ = run_cli(capsys, "constants", "--lambda", "1", "--n", "5", "--m", "64")
        payload = json.loads(const_out)
        for key in ("c_lo", "c_hi", "b_lo", "b_hi", "d_lo", "d_hi"):
            assert float(row[key]) == payload[key]

    def test_header_layout(self, capsys):
        _, out, _ = run_cli(capsys, "sweep", "--lambda-min", "1", "--lambda-max", "1",
                            "--steps", "1", "--n", "5", "--m", "32")
        assert out.splitlines()[0] == "lambda,c_lo,c_hi,b_lo,b_hi,d_lo,d_hi,method"

    def test_inverted_range_rejected(self, capsys):
        code, _, err = run_cli(capsys, "sweep", "--lambda-min", "3", "--lambda-max", "1",
                               "--steps", "4")
        assert code == 2
        assert "lambda-min" in err


class TestSimulate:
    def test_deterministic_and_degenerate(self, capsys):
        args = ["simulate", "--lambda", "1", "--length", "1.7", "--trials", "100",
                "--seed", "1"]
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2
        payload = json.loads(out1)
        assert payload["mean"] == 1.0
        assert payload["variance"] == 0.0

    def test_two_car_histogram(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--lambda", "1", "--length", "3",
                               "--trials", "1000", "--seed", "5")
        assert code == 0
        assert json.loads(out)["histogram"] == {"2": 1000}

    def test_zref_adds_standardized_moments(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--lambda", "1", "--length", "12",
                               "--trials", "2000", "--seed", "3", "--zref")
        assert code == 0
        payload = json.loads(out)
        assert {"zref_mean", "zref_variance", "z_skewness", "z_excess_kurtosis"} <= set(payload)
        assert payload["zref_variance"] > 0

    def test_zero_trials_rejected(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--lambda", "1", "--length", "3", "--trials", "0"])
        assert exc.value.code == 2


class TestValidate:
    def test_filtered_run_passes_and_prints_lines(self, capsys):
        code, out, _ = run_cli(capsys, "validate", "--criteria", "10")
        assert code == 0
        assert "criterion 10" in out and "PASS" in out

    def test_corrupted_solver_fails_validation(self, capsys, monkeypatch):
        real = parklab.solver.solve_mean

        def corrupted(params, **kwargs):
            grid = real(params, **kwargs)
            vals = grid.values.copy()
            vals[3:] += 0.6  # push the solution over the counting bound
            return SegmentedGrid(grid.kind, vals, lam=grid.lam)

        monkeypatch.setattr(parklab.solver, "solve_mean", corrupted)
        code, out, _ = run_cli(capsys, "validate", "--criteria", "2")
        assert code == 1
        assert "FAIL" in out

    def test_unknown_criterion_rejected(self, capsys):
        code, _, err = run_cli(capsys, "validate", "--criteria", "99")
        assert code == 2
