import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcpp_ode import cli
from mcpp_ode.cli import (CSV_FIELDS, ConfigError, ResultRecord, RunConfig, emit, main,
                          parse_json_record, run)

K3 = "3 3\n1 2 1\n2 3 1\n1 3 1\n"


@pytest.fixture
def k3(tmp_path):
    f = tmp_path / "k3.txt"
    f.write_text(K3)
    return str(f)


@pytest.fixture
def single_point(tmp_path):
    f = tmp_path / "one.txt"
    f.write_text("1 2\n0.5 0.5\n")
    return str(f)


def invoke(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def strip_time(text):
    d = json.loads(text)
    d.pop("timestamp")
    return d


class TestRun:
    def test_maxcut_k3(self, capsys, k3):
        code, out, _ = invoke(capsys, "maxcut", k3, "--k", "2", "--trials", "10", "--seed", "7")
        d = json.loads(out)
        assert code == 0 and d["best_value"] == 2
        assert [t["seed"] for t in d["trials"]] == list(range(7, 17))
        assert d["best_value"] == max(t["value"] for t in d["trials"])
        assert d["parameters"]["t1"] == 3.0 and d["parameters"]["theta"] == 1e-5

    def test_stardisc_single_point(self, capsys, single_point):
        code, out, _ = invoke(capsys, "stardisc", single_point, "--trials", "5", "--seed", "1")
        d = json.loads(out)
        assert code == 0 and d["best_value"] == 0.75 and d["best_solution"] == [0.5, 0.5]
        assert d["parameters"]["t1"] == 1e-4 and d["parameters"]["theta"] == 2e-6

    def test_validate(self, capsys):
        code, out, _ = invoke(capsys, "validate", "--size", "2x2", "--temp", "1.0")
        m = json.loads(out)["metrics"]
        assert code == 0 and m["states"] == 4
        assert m["detailed_balance_residual"] <= 1e-12
        assert m["stationary_vs_boltzmann"] <= 1e-10
        if m["certificate_passed"]:
            assert m["rounding_locally_optimal"]

    def test_t1_auto(self, capsys, k3):
        code, out, _ = invoke(capsys, "maxcut", k3, "--t1", "auto", "--trials", "2")
        # K3 has critical temperature 1/2 for k = 2
        assert code == 0 and json.loads(out)["parameters"]["t1"] == pytest.approx(0.25)

    def test_deterministic_modulo_timestamp(self, capsys, k3):
        a = invoke(capsys, "maxcut", k3, "--trials", "4", "--seed", "3")[1]
        b = invoke(capsys, "maxcut", k3, "--trials", "4", "--seed", "3")[1]
        assert strip_time(a) == strip_time(b)

    def test_thread_count_does_not_change_results(self, capsys, k3, monkeypatch):
        monkeypatch.setenv("MCPP_ODE_THREADS", "1")
        a = invoke(capsys, "maxcut", k3, "--trials", "6", "--k", "3")[1]
        monkeypatch.setenv("MCPP_ODE_THREADS", "4")
        b = invoke(capsys, "maxcut", k3, "--trials", "6", "--k", "3")[1]
        assert strip_time(a) == strip_time(b)

    def test_output_file_and_csv(self, capsys, k3, tmp_path):
        target = tmp_path / "out.csv"
        code, out, _ = invoke(capsys, "maxcut", k3, "--trials", "3", "--format", "csv",
                              "-o", str(target))
        assert code == 0 and out == ""
        rows = list(csv.reader(io.StringIO(target.read_text())))
        assert tuple(rows[0]) == CSV_FIELDS
        assert [r[0] for r in rows[1:]] == ["trial"] * 3 + ["best"]
        assert float(rows[-1][2]) == max(float(r[2]) for r in rows[1:4])


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["maxcut", "/nonexistent/graph.txt"],
        ["frobnicate"],
        ["maxcut"],
        ["validate", "--size", "2xq"],
        ["validate", "--size", "1x2"],
    ])
    def test_config_errors(self, capsys, argv):
        code, out, err = invoke(capsys, *argv)
        assert code == 1 and out == "" and "error" in err

    @pytest.mark.parametrize("flags", [["--gamma", "1.5"], ["--trials", "0"], ["--rho", "1"],
                                       ["--t1", "-1"], ["--t1", "hot"], ["--k", "1"]])
    def test_bad_parameters(self, capsys, k3, flags):
        assert invoke(capsys, "maxcut", k3, *flags)[0] == 1

    def test_t1_auto_is_maxcut_only(self, capsys, single_point):
        assert invoke(capsys, "stardisc", single_point, "--t1", "auto")[0] == 1

    def test_malformed_instance(self, capsys, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("3 1\n1 9 1\n")
        code, _, err = invoke(capsys, "maxcut", str(f))
        assert code == 1 and "line 2" in err

    def test_internal_error(self, monkeypatch, k3):
        def boom(*a, **k):
            raise RuntimeError("boom")
        monkeypatch.setattr(cli, "solve_maxkcut", boom)
        out, err = io.StringIO(), io.StringIO()
        assert run(RunConfig("maxcut", k3), out, err) == 2
        assert "boom" in err.getvalue()

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            RunConfig("maxcut", "x", gamma=0.0).validate()
        RunConfig("maxcut", "x", t1="auto").validate()


def record(trials, **kw):
    return ResultRecord("mcpp-ode", "0.1.0", "maxcut", "g.txt", {"trials": len(trials)},
                        trials, **kw)


class TestEmit:
    def test_empty(self):
        rec = record([])
        assert json.loads(emit(rec))["best_value"] is None
        rows = list(csv.reader(io.StringIO(emit(rec, "csv"))))
        assert len(rows) == 2 and rows[1][0] == "best" and rows[1][2] == ""

    def test_singleton(self):
        t = {"seed": 5, "value": 0.1 + 0.2, "steps": 10, "temperatures": 3,
             "status": "converged", "flags": []}
        rec = record([t], best_value=t["value"], best_seed=5)
        d = json.loads(emit(rec))
        assert d["best_value"] == d["trials"][0]["value"] == 0.1 + 0.2
        assert "0.30000000000000004" in emit(rec)

    def test_seventeen_digits(self):
        assert cli._fmt_float(1 / 3) == "0.33333333333333331"
        assert cli._fmt_float(2.0) == "2.0"
        assert cli._fmt_float(float("nan")) == "null"

    def test_unknown_format(self):
        with pytest.raises(ConfigError):
            emit(record([]), "xml")

    @given(st.lists(st.tuples(st.integers(0, 10**6), st.floats(allow_nan=False,
                                                               allow_infinity=False),
                              st.integers(0, 10**6), st.sampled_from(["converged", "stalled"]),
                              st.lists(st.sampled_from(["max_steps", "max_temps"]),
                                       max_size=2)),
                    max_size=5))
    def test_json_round_trip(self, rows):
        trials = [{"seed": s, "value": v, "steps": n, "temperatures": 1, "status": st_,
                   "flags": fl} for s, v, n, st_, fl in rows]
        best = max((t["value"] for t in trials), default=None)
        rec = record(trials, best_value=best, best_seed=None, best_solution=[0, 1],
                     metrics={"ok": True, "x": np.float64(0.1)}, timestamp="t")
        back = parse_json_record(emit(rec))
        expect = record(trials, best_value=best, best_seed=None, best_solution=[0, 1],
                        metrics={"ok": True, "x": 0.1}, timestamp="t")
        assert back == expect
        for t in back.trials:
            assert isinstance(t["value"], float)
