"""Tests for configuration, serialization, and the command-line interface."""

import filecmp
import json
import os

import numpy as np
import pytest

from spincat.cli import cli_dispatch, _parse_range, _parse_word
from spincat.config import RunConfig
from spincat.io_utils import (emit_results, read_csv, read_matrix,
                              write_csv, write_matrix)


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------

class TestRunConfig:
    def test_defaults_resolved(self):
        cfg = RunConfig("demo")
        res = cfg.resolved()
        # every schema field is present and explicit
        assert res["n_comp"] == 6
        assert res["decoder_k"] == "auto"
        assert res["seed"] == 7
        assert res["units"] == "a"

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            RunConfig.from_dict({"experiment": "x", "bogus": 1})

    def test_eta_xor_explicit_rates(self):
        with pytest.raises(ValueError):
            RunConfig("x", eta=10.0, gamma_plus=0.1, gamma_minus=0.1,
                      gamma_z=0.8)
        with pytest.raises(ValueError):
            RunConfig("x", gamma_plus=0.1)  # incomplete rate triple
        RunConfig("x", eta=10.0)
        RunConfig("x", gamma_plus=0.1, gamma_minus=0.1, gamma_z=0.8)

    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig("")
        with pytest.raises(ValueError):
            RunConfig("x", n_comp=5)
        with pytest.raises(ValueError):
            RunConfig("x", decoder_k=-1)
        with pytest.raises(ValueError):
            RunConfig("x", units="seconds")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

class TestIO:
    def test_csv_roundtrip_full_precision(self, tmp_path):
        rows = [[1, 0.1 + 0.2, np.pi], [2, 1e-300, -1.2345678901234567]]
        p = write_csv(tmp_path / "t.csv", ["i", "x", "y"], rows)
        header, got = read_csv(p)
        assert header == ["i", "x", "y"]
        for exp, act in zip(rows, got):
            assert exp == act  # exact float64 round trip

    def test_csv_is_rfc4180(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", ["a", "b"],
                      [["x,y", 'he said "hi"']])
        raw = p.read_bytes()
        assert b"\r\n" in raw
        assert b'"x,y"' in raw
        assert b'"he said ""hi"""' in raw

    def test_empty_records_header_only(self, tmp_path):
        paths = emit_results([], tmp_path / "empty", columns=["a", "b"])
        header, rows = read_csv(paths[0])
        assert header == ["a", "b"] and rows == []

    def test_empty_records_require_columns(self, tmp_path):
        with pytest.raises(ValueError):
            emit_results([], tmp_path / "empty")

    def test_emit_json_mirror(self, tmp_path):
        paths = emit_results([{"a": 1, "b": 2.5}], tmp_path / "r")
        with open(paths[1]) as fh:
            mirror = json.load(fh)
        assert mirror == [{"a": 1, "b": 2.5}]

    def test_matrix_blob_layout(self, tmp_path):
        d = 5
        m = (np.random.default_rng(0).normal(size=(d, d))
             + 1j * np.random.default_rng(1).normal(size=(d, d)))
        header_path, blob_path = write_matrix(tmp_path / "m", m)
        assert blob_path.stat().st_size == 16 * d * d
        with open(header_path) as fh:
            header = json.load(fh)
        assert header["byte_order"] == "little"
        assert header["shape"] == [d, d]
        assert np.array_equal(read_matrix(header_path), m)

    def test_real_matrix_blob(self, tmp_path):
        m = np.arange(6.0).reshape(2, 3)
        _, blob_path = write_matrix(tmp_path / "m", m)
        assert blob_path.stat().st_size == 8 * 6
        assert np.array_equal(read_matrix(tmp_path / "m.json"), m)


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

class TestParsers:
    def test_range_spec(self):
        assert _parse_range("15:21:3") == [15.0, 18.0, 21.0]
        assert _parse_range("9,15,30") == [9.0, 15.0, 30.0]
        with pytest.raises(ValueError):
            _parse_range("30:15:3")

    def test_word_spec(self):
        assert _parse_word("Iz").dephase == 1
        assert _parse_word("Iz^3").dephase == 3
        assert _parse_word("Iz2").dephase == 2
        assert _parse_word("I+").ladder == 1
        assert _parse_word("I-").ladder == -1
        with pytest.raises(ValueError):
            _parse_word("Ix")


# ---------------------------------------------------------------------------
# CLI dispatch
# ---------------------------------------------------------------------------

@pytest.fixture()
def outroot(tmp_path, monkeypatch):
    monkeypatch.setenv("SPINCAT_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


class TestDispatch:
    def test_unknown_subcommand_exit_2(self, outroot, capsys):
        assert cli_dispatch(["frobnicate"]) == 2

    def test_validation_error_exit_2(self, outroot, capsys):
        # I > 60 without --large
        assert cli_dispatch(["taumax", "--N", "6", "--eta", "10",
                             "--I", "210"]) == 2

    def test_numerical_failure_exit_3(self, outroot, capsys):
        assert cli_dispatch(["cycle-time", "--N", "6", "--I", "21",
                             "--ftarget", "0.99999999"]) == 3

    def test_kl_scan_outputs(self, outroot, capsys):
        rc = cli_dispatch(["kl-scan", "--N", "6", "--I", "45:57:3",
                           "--tol", "1e-6", "--threads", "2"])
        assert rc == 0
        header, rows = read_csv(outroot / "kl-scan.csv")
        assert header == ["N", "I", "l_max", "alpha_fit", "beta_fit"]
        assert [r[1] for r in rows] == [45.0, 48.0, 51.0, 54.0, 57.0]
        l_max = [r[2] for r in rows]
        assert l_max == sorted(l_max)  # staircase is non-decreasing
        assert (outroot / "kl-scan_config.json").exists()

    def test_dicke_row_matches_closed_form(self, outroot, capsys):
        from spincat.benchmarks import dicke_infidelity

        rc = cli_dispatch(["dicke", "--I", "30", "--eta", "100",
                           "--t", "1e-3"])
        assert rc == 0
        _, rows = read_csv(outroot / "dicke.csv")
        assert rows[0][3] == pytest.approx(
            dicke_infidelity(1e-3, 100.0, 30.0), rel=1e-12)

    def test_pulses_coeffs_square_wave(self, outroot, capsys):
        rc = cli_dispatch(["pulses", "coeffs", "--tau", "1.0",
                           "--switchings", "1.0", "--lmax", "2"])
        assert rc == 0
        _, rows = read_csv(outroot / "pulses-coeffs.csv")
        by_l = {r[0]: r for r in rows}
        assert by_l[1][2] == pytest.approx(4 / np.pi, abs=1e-12)
        assert by_l[2][2] == pytest.approx(0.0, abs=1e-12)

    def test_pulses_optimize(self, outroot, capsys):
        rc = cli_dispatch(["pulses", "optimize", "--l", "2",
                           "--tau", "1.2566"])
        assert rc == 0
        _, rows = read_csv(outroot / "pulses-optimize.csv")
        assert abs(rows[0][3]) >= 0.6       # Q_l
        assert abs(rows[0][4]) <= 1e-3      # P_l

    def test_rerun_reproduces_csv(self, outroot, capsys):
        assert cli_dispatch(["dicke", "--I", "30", "--eta", "10",
                             "--t", "2e-3", "--outdir", "run1"]) == 0
        orig = outroot / "run1" / "dicke.csv"
        copy = outroot / "dicke_orig.csv"
        copy.write_bytes(orig.read_bytes())
        assert cli_dispatch(["rerun",
                             str(outroot / "run1"
                                 / "dicke_config.json")]) == 0
        assert filecmp.cmp(orig, copy, shallow=False)

    def test_rerun_missing_config_exit_2(self, outroot, capsys):
        assert cli_dispatch(["rerun", str(outroot / "nope.json")]) == 2

    def test_wigner_three_equatorial_lobes(self, outroot, capsys):
        rc = cli_dispatch(["wigner", "--code", "N=6,I=15", "--which", "0",
                           "--grid", "31x91"])
        assert rc == 0
        _, rows = read_csv(outroot / "wigner.csv")
        vals = {}
        for th, ph, v in rows:
            vals.setdefault(round(th, 9), {})[round(ph, 9)] = v
        thetas = sorted(vals)
        equator = vals[thetas[15]]  # theta = pi/2 on a 31-point grid
        phis = sorted(equator)
        line = np.array([equator[p] for p in phis])
        # three-fold symmetric: shifting phi by 2*pi/3 (30 grid steps)
        assert np.allclose(line[0:61], line[30:91], atol=1e-8)
        # and the global maximum sits on the equator
        peak_theta = max(((max(d.values()), th)
                          for th, d in vals.items()))[1]
        assert peak_theta == pytest.approx(np.pi / 2, abs=1e-9)

    def test_wigner_bad_grid_exit_2(self, outroot, capsys):
        assert cli_dispatch(["wigner", "--code", "N=6,I=15",
                             "--grid", "banana"]) == 2

    @pytest.mark.slow
    def test_encode_and_correct_commands(self, outroot, capsys):
        assert cli_dispatch(["encode", "--N", "6", "--I", "30"]) == 0
        _, rows = read_csv(outroot / "encode.csv")
        assert rows[0][2] >= 1 - 1e-6
        assert abs(rows[0][3]) <= 1e-9
        assert cli_dispatch(["correct", "--N", "6", "--I", "30"]) == 0
        _, rows = read_csv(outroot / "correct.csv")
        assert all(r[3] >= 0.999 for r in rows)

    @pytest.mark.slow
    def test_gates_test_command(self, outroot, capsys):
        rc = cli_dispatch(["gates", "test", "--N", "6", "--I", "30",
                           "--gates", "phase", "--words", "Iz",
                           "--k", "1", "--l", "2"])
        assert rc == 0
        _, rows = read_csv(outroot / "gates-test.csv")
        assert rows[0][2] == "phase" and rows[0][4] >= 0.99

    def test_cycle_time_command(self, outroot, capsys):
        assert cli_dispatch(["cycle-time", "--N", "6", "--I", "21"]) == 0
        header, rows = read_csv(outroot / "cycle-time.csv")
        assert "total[1/a]" in header  # unit-annotated columns
        assert rows[0][2] > 0
