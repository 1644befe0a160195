import os

import numpy as np
import pytest

from robustcomp import RunTrace, TraceRow
from robustcomp.cli import main
from robustcomp.harness import (AGGREGATE_HEADER, TRACE_HEADER, DataError,
                                ExperimentConfig, aggregate_trials,
                                checkpoints, evaluate_mse, load_config,
                                read_aggregate_csv, run_experiment,
                                write_aggregate_csv, write_trace_csv)

BASE_CONFIG = """\
[experiment]
trials = 3
seed = 11
sample_budget = 3000
checkpoints = 12
output_dir = {out}

[problem]
type = synthetic
p = 3
d = 4
mu = 1.0
sigma0 = 0.2
sigma1 = 0.2
noise = pareto:3.0
radius = 2.0

[solver]
kind = mscg
m = 4
"""


def _trace(pairs):
    tr = RunTrace()
    for i, (s, v) in enumerate(pairs):
        tr.append(TraceRow(iteration=i, samples=s, gap=v, metric=v, objective=v))
    return tr


def test_checkpoints_span_budget():
    grid = checkpoints(10000, 30)
    assert grid[0] == 1 and grid[-1] == 10000
    assert np.all(np.diff(grid) > 0)
    assert len(grid) <= 30


def test_checkpoints_small_budget_dedupes():
    grid = checkpoints(5, 30)
    assert list(grid) == [1, 2, 3, 4, 5]


def test_evaluate_mse_exact():
    from scipy import sparse as sp
    from robustcomp import Dataset
    X = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 2.0]]))
    data = Dataset(X, np.array([2.0, 1.0]), 2)
    # w = (1, 1): predictions (1, 2), residuals (-1, 1), mse 1
    assert evaluate_mse(np.ones(2), data) == pytest.approx(1.0)


def test_aggregate_carries_last_value_forward():
    tr = _trace([(10, 5.0), (100, 3.0)])
    table = aggregate_trials([tr], [10, 50, 100, 200], value=lambda r: r.gap)
    assert [row[1] for row in table] == [5.0, 5.0, 3.0, 3.0]
    assert all(row[2] == 0.0 for row in table)


def test_aggregate_mean_and_std():
    t1 = _trace([(10, 1.0)])
    t2 = _trace([(10, 3.0)])
    table = aggregate_trials([t1, t2], [10], value=lambda r: r.gap)
    s, mean, std = table[0]
    assert mean == 2.0
    assert std == pytest.approx(np.std([1.0, 3.0], ddof=1))


def test_aggregate_requires_traces():
    with pytest.raises(ValueError):
        aggregate_trials([], [10])


def test_trace_csv_round_trip(tmp_path):
    tr = _trace([(4, 0.125), (8, 0.0625)])
    path = tmp_path / "t.csv"
    write_trace_csv(tr, path)
    lines = path.read_text().splitlines()
    assert lines[0] == TRACE_HEADER
    assert lines[1] == "0,4,0.125,0.125,0.125,0,0"


def test_aggregate_csv_round_trip(tmp_path):
    table = [(10, 0.5, 0.1), (100, 0.25, 0.05)]
    path = tmp_path / "a.csv"
    write_aggregate_csv(table, path)
    assert path.read_text().splitlines()[0] == AGGREGATE_HEADER
    assert read_aggregate_csv(path) == table


def test_read_aggregate_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y,z\n1,2,3\n")
    with pytest.raises(DataError):
        read_aggregate_csv(path)


def test_load_config_round_trip(tmp_path):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(BASE_CONFIG.format(out=tmp_path / "out"))
    cfg = load_config(cfg_path)
    assert cfg.trials == 3 and cfg.seed == 11 and cfg.sample_budget == 3000
    assert cfg.problem["type"] == "synthetic"
    assert cfg.solver["kind"] == "mscg"
    assert cfg.model_selection is False


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(problem={}, solver={}, trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(problem={}, solver={}, sample_budget=0)


def _run(tmp_path, name, text):
    cfg_path = tmp_path / (name + ".ini")
    out = tmp_path / name
    cfg_path.write_text(text.format(out=out))
    code = main(["run", "--config", str(cfg_path)])
    return code, out


def test_run_experiment_artifacts(tmp_path):
    code, out = _run(tmp_path, "base", BASE_CONFIG)
    assert code == 0
    names = sorted(os.listdir(out))
    assert "aggregate.csv" in names and "manifest.txt" in names
    assert sum(n.startswith("trace_trial") for n in names) == 3
    table = read_aggregate_csv(out / "aggregate.csv")
    assert table[-1][0] == 3000
    assert all(np.isfinite(row[1]) for row in table)


def test_run_respects_sample_budget(tmp_path):
    code, out = _run(tmp_path, "budget", BASE_CONFIG)
    assert code == 0
    for t in range(3):
        lines = (out / ("trace_trial%d.csv" % t)).read_text().splitlines()[1:]
        samples = [int(line.split(",")[1]) for line in lines]
        assert samples == sorted(samples)
        assert samples[-1] <= 3000


def test_run_byte_determinism(tmp_path):
    _, out1 = _run(tmp_path, "det1", BASE_CONFIG)
    _, out2 = _run(tmp_path, "det2", BASE_CONFIG)
    for name in sorted(os.listdir(out1)):
        if name == "manifest.txt":
            continue  # records output_dir, which differs
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_run_trial_seeds_differ(tmp_path):
    _, out = _run(tmp_path, "seeds", BASE_CONFIG)
    t0 = (out / "trace_trial0.csv").read_bytes()
    t1 = (out / "trace_trial1.csv").read_bytes()
    assert t0 != t1


def test_rrosc_solver_via_config(tmp_path):
    text = BASE_CONFIG.replace("kind = mscg", "kind = rrosc\neps0 = 8.0\nk = 4")
    code, out = _run(tmp_path, "rrosc", text)
    assert code == 0
    table = read_aggregate_csv(out / "aggregate.csv")
    assert table[-1][1] < table[0][1]


def test_cli_usage_errors():
    assert main(["run"]) == 1
    assert main(["bogus"]) == 1
    assert main(["run", "--config", "/nonexistent/exp.ini"]) == 1


def test_cli_missing_dataset_is_data_error(tmp_path):
    text = BASE_CONFIG.replace("type = synthetic",
                               "type = dro\ndataset = /nonexistent/data.txt")
    code, _ = _run(tmp_path, "nodata", text)
    assert code == 2


def test_cli_malformed_dataset_is_data_error(tmp_path):
    bad = tmp_path / "bad.libsvm"
    bad.write_text("1.0 0:1.0\n")
    text = BASE_CONFIG.replace(
        "type = synthetic", "type = dro\ndataset = %s" % bad)
    code, _ = _run(tmp_path, "baddata", text)
    assert code == 2


def test_cli_solver_failure_exit_code(tmp_path):
    text = BASE_CONFIG.replace("kind = mscg", "kind = mscg\neta = 1e9")
    # eta is capped at 1/(2L), so force failure differently: an eps schedule
    # that cannot be built
    text = BASE_CONFIG.replace("kind = mscg",
                               "kind = rrosc\neps0 = 1.0\neps_target = 2.0")
    code, _ = _run(tmp_path, "solverfail", text)
    assert code == 3


def test_cli_aggregate_command(tmp_path):
    _, out = _run(tmp_path, "agg", BASE_CONFIG)
    dest = tmp_path / "re_agg.csv"
    code = main(["aggregate", "--glob", str(out / "trace_trial*.csv"),
                 "--out", str(dest), "--column", "gap"])
    assert code == 0
    table = read_aggregate_csv(dest)
    assert table and all(np.isfinite(r[1]) for r in table)


def test_cli_aggregate_no_match(tmp_path):
    assert main(["aggregate", "--glob", str(tmp_path / "none*.csv")]) == 2


def test_cli_aggregate_bad_trace(tmp_path):
    bad = tmp_path / "trace_bad.csv"
    bad.write_text("wrong,header\n")
    assert main(["aggregate", "--glob", str(bad)]) == 2


def test_cli_selftest():
    assert main(["selftest"]) == 0
