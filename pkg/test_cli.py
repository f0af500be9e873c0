import json

import numpy as np
import pandas as pd
import pytest

import h1flow_cli
from h1_errors import DataError, NumericalError
from h1_process import PathPanel, SamplePath
from h1flow_cli import main
from panel_utils import ingest_panel, write_panel

STUDY1_PARAMS = {"eta": 0.5, "lambda": 0.8, "mu": 0.8, "sigma": 0.015, "t0": 0.0, "x0": 0.1}
QUICK_FA = {"n": 6, "generations": 4, "alpha": 0.2, "beta0": 1.0, "gamma": 1.0, "delta": 0.97}


def write_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def last_error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


@pytest.fixture
def params_file(tmp_path):
    return write_json(tmp_path / "params.json", STUDY1_PARAMS)


@pytest.fixture
def fa_file(tmp_path):
    return write_json(tmp_path / "fa.json", QUICK_FA)


@pytest.fixture
def panel_file(tmp_path, params_file):
    out = tmp_path / "panel.csv"
    assert main(["simulate", "--params", params_file, "--grid", "0:10:0.5", "--paths", "4",
                 "--seed", "3", "--out", str(out)]) == 0
    return str(out)


def test_ingest_minimal_wide(tmp_path):
    panel = ingest_panel(write_text(tmp_path / "p.csv", "t,path_1,path_2\n0,0.1,0.2\n1,0.2,0.3\n2,0.3,0.4\n"))
    assert panel.d == 2
    assert all(path.times.size == 3 for path in panel.paths)
    np.testing.assert_array_equal(panel.paths[1].values, [0.2, 0.3, 0.4])


def test_ingest_rejects_zero_value(tmp_path):
    path = write_text(tmp_path / "p.csv", "t,path_1,path_2\n0,0.1,0.2\n1,0,0.3\n")
    with pytest.raises(DataError, match="row 3"):
        ingest_panel(path)


def test_ingest_rejects_ragged_rows(tmp_path):
    with pytest.raises(DataError):
        ingest_panel(write_text(tmp_path / "long_row.csv", "t,path_1,path_2\n0,0.1,0.2\n1,0.2,0.3,0.5\n"))
    with pytest.raises(DataError, match="row 3"):
        ingest_panel(write_text(tmp_path / "short_row.csv", "t,path_1,path_2\n0,0.1,0.2\n1,0.2\n"))


def test_ingest_rejects_non_monotone_times(tmp_path):
    path = write_text(tmp_path / "p.csv", "t,path_1\n0,0.1\n2,0.2\n1,0.3\n")
    with pytest.raises(DataError, match="row 4"):
        ingest_panel(path)


def test_ingest_rejects_bad_header_and_numbers(tmp_path):
    with pytest.raises(DataError):
        ingest_panel(write_text(tmp_path / "h.csv", "time,path_1\n0,0.1\n1,0.2\n"))
    with pytest.raises(DataError, match="not a number"):
        ingest_panel(write_text(tmp_path / "n.csv", "t,path_1\n0,0.1\n1,abc\n"))


def test_ingest_long_with_own_grids(tmp_path):
    text = "path_id,t,value\na,0,0.1\na,1,0.2\nb,0,0.1\nb,0.5,0.15\nb,2,0.3\n"
    panel = ingest_panel(write_text(tmp_path / "p.csv", text), fmt="long")
    assert panel.d == 2
    assert panel.shared_grid() is None
    np.testing.assert_array_equal(panel.paths[1].times, [0.0, 0.5, 2.0])


def test_ingest_long_rejects_duplicates(tmp_path):
    text = "path_id,t,value\na,0,0.1\na,1,0.2\na,1,0.3\n"
    with pytest.raises(DataError, match="row 4: duplicate"):
        ingest_panel(write_text(tmp_path / "p.csv", text), fmt="long")


def test_missing_panel_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        ingest_panel(tmp_path / "nope.csv")


def test_wide_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    times = np.array([0.0, 0.1, 0.30000000000000004, 1.7])
    panel = PathPanel([SamplePath(times, rng.lognormal(-2.0, 0.5, size=4)) for _ in range(3)])
    first = write_panel(panel, tmp_path / "a.csv")
    back = ingest_panel(first)
    for original, loaded in zip(panel.paths, back.paths):
        assert np.array_equal(original.times, loaded.times)
        assert np.array_equal(original.values, loaded.values)
    second = write_panel(back, tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()


def test_long_round_trip(tmp_path):
    panel = PathPanel([
        SamplePath(np.array([0.0, 1.0]), np.array([0.1, 0.2])),
        SamplePath(np.array([0.0, 0.5, 3.0]), np.array([0.1, 0.125, 0.4])),
    ])
    back = ingest_panel(write_panel(panel, tmp_path / "p.csv", fmt="long"), fmt="long")
    for original, loaded in zip(panel.paths, back.paths):
        assert np.array_equal(original.times, loaded.times)
        assert np.array_equal(original.values, loaded.values)


def test_wide_write_needs_shared_grid(tmp_path):
    panel = PathPanel([
        SamplePath(np.array([0.0, 1.0]), np.array([0.1, 0.2])),
        SamplePath(np.array([0.0, 2.0]), np.array([0.1, 0.2])),
    ])
    with pytest.raises(DataError):
        write_panel(panel, tmp_path / "p.csv")


def test_simulate_writes_panel(panel_file):
    frame = pd.read_csv(panel_file)
    assert list(frame.columns) == ["t", "path_1", "path_2", "path_3", "path_4"]
    assert len(frame) == 21
    np.testing.assert_allclose(frame.iloc[0, 1:], 0.1, rtol=1e-15)


def test_simulate_is_byte_deterministic(tmp_path, params_file, monkeypatch):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(["simulate", "--params", params_file, "--grid", "0:5:0.5", "--paths", "3",
                     "--seed", "5", "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    monkeypatch.setenv("H1FLOW_SEED", "5")
    env_out = tmp_path / "env.csv"
    assert main(["simulate", "--params", params_file, "--grid", "0:5:0.5", "--paths", "3",
                 "--out", str(env_out)]) == 0
    assert outputs[0] == outputs[1] == env_out.read_bytes()


def test_simulate_threads_match_sequential(tmp_path, params_file):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["simulate", "--params", params_file, "--grid", "0:5:0.5", "--paths", "6", "--seed", "2"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_svg(tmp_path, params_file):
    svg = tmp_path / "paths.svg"
    assert main(["simulate", "--params", params_file, "--grid", "0:5:0.5", "--paths", "2",
                 "--out", str(tmp_path / "p.csv"), "--svg", str(svg)]) == 0
    assert svg.read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_fit_outputs_are_deterministic(tmp_path, panel_file, fa_file):
    runs = []
    for name in ("a", "b"):
        out, trace = tmp_path / f"{name}.json", tmp_path / f"{name}_trace.csv"
        assert main(["fit", "--panel", panel_file, "--fa", fa_file, "--seed", "9", "--out", str(out),
                     "--trace", str(trace)]) == 0
        runs.append((out.read_bytes(), trace.read_bytes()))
    assert runs[0] == runs[1]

    payload = json.loads(runs[0][0])
    assert set(payload["estimates"]) == {"lambda", "mu", "eta", "sigma", "sigma_sq"}
    assert "duration" not in payload
    assert payload["panel"] == {"paths": 4, "observations": 84, "t1": 0.0}
    assert payload["fitted_mean_error"] >= 0

    summary = json.loads((tmp_path / "a_summary.json").read_text(encoding="utf-8"))
    assert {"duration", "timestamp", "seed", "fit_duration"} <= set(summary)

    trace = pd.read_csv(tmp_path / "a_trace.csv")
    assert len(trace) == (QUICK_FA["generations"] + 1) * QUICK_FA["n"]
    assert list(trace.columns[:6]) == ["generation", "firefly", "lambda", "mu", "eta", "sigma"]


def test_fit_smallest_panel(tmp_path, fa_file, capsys):
    panel = write_text(tmp_path / "p.csv", "t,path_1\n0,0.1\n1,0.2\n")
    out = tmp_path / "fit.json"
    assert main(["fit", "--panel", panel, "--fa", fa_file, "--out", str(out)]) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["initial_law"]["sigma1_sq_hat"] == 0.0
    assert payload["initial_law"]["degenerate"] is True
    assert "degenerate initial law" in capsys.readouterr().out


def test_bad_params_exit_code(tmp_path, capsys):
    params = write_json(tmp_path / "bad.json", {**STUDY1_PARAMS, "lambda": 1.5})
    code = main(["simulate", "--params", params, "--grid", "0:5:0.5", "--paths", "2",
                 "--out", str(tmp_path / "p.csv")])
    assert code == 2
    error = last_error(capsys)
    assert error["error"] == "ConfigError"
    assert error["exit_code"] == 2


def test_non_increasing_params_exit_code(tmp_path, capsys):
    params = write_json(tmp_path / "flat.json", {**STUDY1_PARAMS, "mu": 1.3})
    assert main(["curve", "--params", params, "--grid", "0:5:0.5", "--out", str(tmp_path / "m.csv")]) == 2
    assert last_error(capsys)["exit_code"] == 2


def test_bad_grid_and_seed_exit_code(tmp_path, params_file, monkeypatch):
    out = str(tmp_path / "p.csv")
    assert main(["simulate", "--params", params_file, "--grid", "0:5", "--paths", "2", "--out", out]) == 2
    monkeypatch.setenv("H1FLOW_SEED", "abc")
    assert main(["simulate", "--params", params_file, "--grid", "0:5:1", "--paths", "2", "--out", out]) == 2


def test_missing_panel_exit_code(tmp_path, fa_file, capsys):
    code = main(["fit", "--panel", str(tmp_path / "missing.csv"), "--fa", fa_file,
                 "--out", str(tmp_path / "fit.json")])
    assert code == 3
    assert last_error(capsys)["error"] == "DataError"


def test_numerical_failure_exit_code(tmp_path, panel_file, fa_file, monkeypatch, capsys):
    def failing_fit(*args, **kwargs):
        raise NumericalError("f_o is not finite")

    monkeypatch.setattr(h1flow_cli, "fit", failing_fit)
    code = main(["fit", "--panel", panel_file, "--fa", fa_file, "--out", str(tmp_path / "fit.json")])
    assert code == 4
    assert last_error(capsys)["message"] == "f_o is not finite"
    assert not (tmp_path / "fit.json").exists()


def test_log_file_leaves_only_json_on_stderr(tmp_path, fa_file, capsys):
    log = tmp_path / "fit.log"
    code = main(["fit", "--panel", str(tmp_path / "missing.csv"), "--fa", fa_file,
                 "--out", str(tmp_path / "fit.json"), "--log-file", str(log)])
    assert code == 3
    lines = capsys.readouterr().err.splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["error"] == "DataError"
    text = log.read_text(encoding="utf-8")
    assert "ERROR - fit failed" in text


def test_quiet_failure_writes_only_json(tmp_path, capsys):
    params = write_json(tmp_path / "bad.json", {**STUDY1_PARAMS, "lambda": 1.5})
    code = main(["simulate", "--params", params, "--grid", "0:5:0.5", "--paths", "2",
                 "--out", str(tmp_path / "p.csv"), "-q"])
    assert code == 2
    err = capsys.readouterr().err
    assert len(err.splitlines()) == 1
    assert json.loads(err)["exit_code"] == 2


def test_default_logging_ends_with_json(tmp_path, fa_file, capsys):
    code = main(["fit", "--panel", str(tmp_path / "missing.csv"), "--fa", fa_file,
                 "--out", str(tmp_path / "fit.json")])
    assert code == 3
    lines = capsys.readouterr().err.splitlines()
    assert any("fit failed" in line for line in lines[:-1])
    assert json.loads(lines[-1])["exit_code"] == 3


def test_unwritable_log_file(tmp_path, params_file, capsys):
    code = main(["simulate", "--params", params_file, "--grid", "0:5:0.5", "--paths", "2",
                 "--out", str(tmp_path / "p.csv"), "--log-file", str(tmp_path / "no" / "run.log")])
    assert code == 2
    assert last_error(capsys)["error"] == "ConfigError"
    assert not (tmp_path / "p.csv").exists()


def test_verbose_and_quiet_conflict(tmp_path, params_file):
    with pytest.raises(SystemExit):
        main(["simulate", "--params", params_file, "--grid", "0:5:0.5", "--paths", "2",
              "--out", str(tmp_path / "p.csv"), "-v", "-q"])


def test_replicate_tables(tmp_path):
    study = write_json(tmp_path / "study.json", {
        "params": STUDY1_PARAMS,
        "grid": {"start": 0.0, "end": 5.0, "step": 0.5},
        "n_paths": 3,
        "replications": 2,
        "ns": [4],
        "generations": 2,
    })
    out = tmp_path / "tables"
    assert main(["replicate", "--study", study, "--out", str(out), "--seed", "1"]) == 0
    table = pd.read_csv(out / "table_parameters.csv")
    assert len(table) == 1
    assert len(pd.read_csv(out / "records.csv")) == 2
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["fits"] == 2
    assert summary["tables"] == ["parameters"]


def test_replicate_rejects_grid_off_origin(tmp_path):
    study = write_json(tmp_path / "study.json", {
        "params": STUDY1_PARAMS,
        "grid": {"start": 1.0, "end": 5.0, "step": 0.5},
        "replications": 1,
    })
    assert main(["replicate", "--study", study, "--out", str(tmp_path / "t")]) == 2


def test_curve_with_panel(tmp_path, params_file, panel_file, capsys):
    out, svg = tmp_path / "mean.csv", tmp_path / "mean.svg"
    assert main(["curve", "--params", params_file, "--panel", panel_file, "--out", str(out),
                 "--svg", str(svg)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["t", "mean", "variance", "observed_mean"]
    assert len(frame) == 21
    assert frame["mean"].iloc[0] == pytest.approx(0.1)
    assert frame["variance"].iloc[0] == pytest.approx(0.0, abs=1e-15)
    assert svg.exists()
    assert "Asymptote: 0.3" in capsys.readouterr().out


def test_curve_grid_must_match_panel(tmp_path, params_file, panel_file):
    code = main(["curve", "--params", params_file, "--panel", panel_file, "--grid", "0:10:1",
                 "--out", str(tmp_path / "mean.csv")])
    assert code == 2


def test_curve_needs_a_grid(tmp_path, params_file):
    assert main(["curve", "--params", params_file, "--out", str(tmp_path / "mean.csv")]) == 2


def test_realdata_outputs(tmp_path, panel_file):
    grid = write_json(tmp_path / "grid.json", {"alphas": [0.2], "gammas": [1.0, 5.0], "deltas": [0.97],
                                               "n": 4, "generations": 2, "refit_n": 5})
    out = tmp_path / "realdata"
    assert main(["realdata", "--panel", panel_file, "--grid", grid, "--out", str(out), "--seed", "1"]) == 0
    for name in ("grid.csv", "fit.json", "trace.csv", "mean.csv", "mean.svg", "summary.json"):
        assert (out / name).exists(), name
    assert len(pd.read_csv(out / "grid.csv")) == 2
    payload = json.loads((out / "fit.json").read_text(encoding="utf-8"))
    assert payload["firefly"]["n"] == 5
    assert payload["initial_law"]["used_for_mean"]["kind"] == "degenerate"
    assert payload["best_grid_cell"]["gamma"] in (1.0, 5.0)
    mean = pd.read_csv(out / "mean.csv")
    assert list(mean.columns) == ["t", "observed_mean", "fitted_mean", "simulated_mean"]


@pytest.mark.slow
def test_simulate_then_fit_study1(tmp_path, params_file):
    panel = tmp_path / "panel.csv"
    assert main(["simulate", "--params", params_file, "--grid", "0:50:0.1", "--paths", "30",
                 "--seed", "7", "--out", str(panel)]) == 0
    out = tmp_path / "fit.json"
    assert main(["fit", "--panel", str(panel), "--seed", "7", "--out", str(out)]) == 0
    estimates = json.loads(out.read_text(encoding="utf-8"))["estimates"]
    truth = {"lambda": 0.8, "mu": 0.8, "eta": 0.5, "sigma": 0.015}
    for name, value in truth.items():
        assert abs(estimates[name] - value) / value <= 0.1, name
