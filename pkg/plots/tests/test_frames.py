import json
from pathlib import Path

import numpy as np
import pytest

from poslab_plots import (METRIC_COLUMNS, load_ablation, load_grid,
                          mean_stderr, read_metrics_frame, run_label)
from poslab_plots.frames import ablation_series, grid_matrix

FIXTURES = Path(__file__).parent / "fixtures"


def _write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


# -- metrics CSV -------------------------------------------------------------


def test_read_metrics_frame_fixture():
    frame = read_metrics_frame(FIXTURES / "curves" / "pcp" / "metrics.csv")
    assert set(frame.columns) == set(METRIC_COLUMNS)
    assert len(frame) >= 2
    assert np.all(np.diff(frame.steps) > 0)
    assert np.isfinite(frame["eval_score_mean"]).all()


def test_unknown_column_rejected(tmp_path):
    header = list(METRIC_COLUMNS) + ["extra"]
    path = tmp_path / "m.csv"
    _write_csv(path, header, [[0.0] * len(header)])
    with pytest.raises(ValueError, match="schema"):
        read_metrics_frame(path)


def test_missing_column_rejected(tmp_path):
    header = list(METRIC_COLUMNS)[:-1]
    path = tmp_path / "m.csv"
    _write_csv(path, header, [[0.0] * len(header)])
    with pytest.raises(ValueError, match="schema"):
        read_metrics_frame(path)


def test_empty_and_ragged_files_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError):
        read_metrics_frame(empty)
    headers_only = tmp_path / "h.csv"
    _write_csv(headers_only, list(METRIC_COLUMNS), [])
    with pytest.raises(ValueError, match="no data rows"):
        read_metrics_frame(headers_only)
    ragged = tmp_path / "r.csv"
    _write_csv(ragged, list(METRIC_COLUMNS), [[0.0] * 5])
    with pytest.raises(ValueError, match="fields"):
        read_metrics_frame(ragged)


def test_run_label_from_config_toml():
    label = run_label(FIXTURES / "curves" / "baseline" / "metrics.csv")
    assert label == "Reacher2D baseline seed 1"
    label = run_label(FIXTURES / "curves" / "pcp" / "metrics.csv")
    assert label == "Reacher2D pcp seed 1"


def test_run_label_fallback_is_directory_name(tmp_path):
    run_dir = tmp_path / "my_run"
    run_dir.mkdir()
    csv = run_dir / "metrics.csv"
    csv.write_text("x\n")
    assert run_label(csv) == "my_run"


# -- grid json ---------------------------------------------------------------


def test_load_grid_fixture():
    grid = load_grid(FIXTURES / "grid_100.json")
    assert grid["n_goals"] == 100
    assert len(grid["rows"]) == 100


def test_load_grid_row_count_mismatch(tmp_path):
    grid = load_grid(FIXTURES / "grid_16.json")
    grid["rows"] = grid["rows"][:-1]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(grid))
    with pytest.raises(ValueError, match="rows"):
        load_grid(path)


def test_grid_matrix_shapes():
    for name, k in (("grid_100.json", 10), ("grid_16.json", 4)):
        xs, ys, scores = grid_matrix(load_grid(FIXTURES / name))
        assert scores.shape == (k, k)
        assert len(xs) == k and len(ys) == k
        assert np.isfinite(scores).all()


def test_grid_matrix_rejects_non_square():
    grid = load_grid(FIXTURES / "grid_16.json")
    grid["rows"] = grid["rows"][:12]
    with pytest.raises(ValueError, match="square"):
        grid_matrix(grid)


def test_grid_matrix_rejects_missing_cell():
    grid = load_grid(FIXTURES / "grid_16.json")
    # drop one lattice point, keep the count square by duplicating another
    grid["rows"] = grid["rows"][:-1] + [grid["rows"][0]]
    with pytest.raises(ValueError):
        grid_matrix(grid)


# -- ablation summaries ------------------------------------------------------


def test_mean_stderr_matches_numpy():
    v = [0.2, 0.5, 0.9]
    mean, err = mean_stderr(v)
    assert mean == pytest.approx(np.mean(v))
    assert err == pytest.approx(np.std(v, ddof=1) / np.sqrt(3))
    assert mean_stderr([0.7]) == (0.7, 0.0)


@pytest.mark.parametrize("name", ["ablation_goal_scale", "ablation_target_size"])
def test_load_ablation_fixture(name):
    summary = load_ablation(FIXTURES / name / "summary.json")
    assert summary["kind"] in ("goal_scale", "target_size")


@pytest.mark.parametrize("name", ["ablation_goal_scale", "ablation_target_size"])
def test_recomputed_error_bars_match_summary(name):
    """Recomputed mean/stderr agree with the stored aggregates to 1e-9."""
    summary = load_ablation(FIXTURES / name / "summary.json")
    series = ablation_series(summary)
    key = "scales" if summary["kind"] == "goal_scale" else "sizes"
    for i, value in enumerate(summary[key]):
        cell_name = f"{value:g}" if key == "scales" else str(value)
        cell = summary["cells"][cell_name]
        assert abs(series["err_mean"][i] - cell["recon_target_err"]["mean"]) < 1e-9
        assert abs(series["err_stderr"][i] - cell["recon_target_err"]["stderr"]) < 1e-9
        assert abs(series["score_mean"][i] - cell["mean_score"]["mean"]) < 1e-9
        assert abs(series["score_stderr"][i] - cell["mean_score"]["stderr"]) < 1e-9


def test_load_ablation_rejects_bad_structure(tmp_path):
    good = json.loads((FIXTURES / "ablation_goal_scale" / "summary.json").read_text())

    unknown = dict(good, kind="banana")
    p = tmp_path / "a.json"
    p.write_text(json.dumps(unknown))
    with pytest.raises(ValueError, match="kind"):
        load_ablation(p)

    single = dict(good, scales=[1.0])
    p.write_text(json.dumps(single))
    with pytest.raises(ValueError, match="at least 2"):
        load_ablation(p)

    missing = dict(good, cells={k: v for k, v in good["cells"].items() if k != "10"})
    p.write_text(json.dumps(missing))
    with pytest.raises(ValueError, match="missing cell"):
        load_ablation(p)


def test_load_ablation_rejects_inconsistent_seed_counts(tmp_path):
    good = json.loads((FIXTURES / "ablation_goal_scale" / "summary.json").read_text())
    good["cells"]["10"]["mean_score"]["per_seed"].append(0.5)
    p = tmp_path / "a.json"
    p.write_text(json.dumps(good))
    with pytest.raises(ValueError, match="inconsistent"):
        load_ablation(p)
