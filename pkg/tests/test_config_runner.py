import csv
import io
import json
import statistics
from pathlib import Path

import numpy as np
import pytest

from byzsvrg import runner
from byzsvrg.config import RunConfig, build_config, parse_config
from byzsvrg.errors import ConfigError
from byzsvrg.problems import BoundedNoiseQuadratic, sphere
from byzsvrg.tuning import suggest_schedule

MINIMAL = """
[problem]
kind = quadratic
d = 10

[workers]
K = 8
alpha = 0

[algorithm]
B = 16
T = 10
delta = 1e-4

[run]
seed = 1
"""

FEASIBLE = """
[problem]
kind = quadratic
d = 4
[workers]
K = 8
[algorithm]
B = 64
T = 12
delta = 7.8125e-5
[run]
seed = 5
epsilon = 0.05
"""

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

GOLDEN_HEADER = "t,grad_norm_sq,f_value,N_t,rule,accepted_count,accept_bitmap,server_samples_cum,worker_samples_cum,wall_ms"


def test_minimal_config_fills_step_size():
    cfg = parse_config(MINIMAL)
    assert cfg.eta == pytest.approx(0.0524967104122863818653, rel=1e-14)
    assert not cfg.eta_overridden
    assert (cfg.K, cfg.B, cfg.T, cfg.seed) == (8, 16, 10, 1)


def test_explicit_step_size_recorded():
    cfg = parse_config(MINIMAL.replace("T = 10", "T = 10\neta = 0.01"))
    assert cfg.eta == 0.01 and cfg.eta_overridden


def test_alpha_half_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("alpha = 0", "alpha = 0.5"))
    assert "alpha must be < 1/2" in exc.value.errors


def test_duplicate_key_reports_both_lines():
    text = MINIMAL.replace("K = 8", "K = 8\nK = 9")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    lines = text.splitlines()
    first = lines.index("K = 8") + 1
    assert f"lines {first} and {first + 1}" in str(exc.value)


def test_unknown_keys_and_sections_all_reported():
    text = MINIMAL.replace("d = 10", "d = 10\ndimension = 3") + "\n[extras]\nfoo = 1\n"
    text = text.replace("B = 16", "B = sixteen")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    errs = exc.value.errors
    assert any("problem.dimension" in e for e in errs)
    assert any("[extras]" in e for e in errs)
    assert any("algorithm.B" in e for e in errs)


def test_range_errors_collected():
    with pytest.raises(ConfigError) as exc:
        build_config(K=0, B=0, T=0, delta=1.5)
    assert len(exc.value.errors) >= 4


def test_ini_round_trip():
    cfg = build_config(kind="logistic", d=3, K=5, alpha=0.2, x0=[1.0, 2.0, 3.0], epsilon=0.1)
    assert parse_config(cfg.to_ini()) == cfg


def test_trace_csv_byte_identical(tmp_path):
    cfg = parse_config(FEASIBLE)
    runner.execute(cfg, tmp_path / "a")
    runner.execute(cfg, tmp_path / "b")
    for name in ("run_trace.csv", "run_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trace_header_and_provenance(tmp_path):
    cfg = parse_config(FEASIBLE)
    summary, _, code = runner.execute(cfg, tmp_path)
    text = (tmp_path / "run_trace.csv").read_text()
    lines = text.splitlines()
    assert lines[0].startswith("# byzsvrg ")
    assert json.loads(lines[1][len("# config "):]) == json.loads(json.dumps(cfg.to_dict()))
    assert lines[2] == GOLDEN_HEADER
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[2:]))))
    assert len(rows) == cfg.T
    assert code == 0 and summary["status"] == "completed"
    assert summary["total_worker_samples"] == cfg.T * cfg.B
    assert summary["total_server_samples"] == sum(int(r["N_t"]) for r in rows)
    saved = json.loads((tmp_path / "run_summary.json").read_text())
    assert saved["version"] and saved["config"]["B"] == 64


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BYZSVRG_OUTPUT_DIR", str(tmp_path / "env"))
    runner.execute(parse_config(FEASIBLE), name="x")
    assert (tmp_path / "env" / "x_trace.csv").exists()


def test_infeasible_exit_code(tmp_path):
    summary, _, code = runner.execute(parse_config(MINIMAL), tmp_path)
    assert code == runner.EXIT_INFEASIBLE == 2
    assert summary["status"] == "infeasible"
    assert "upper_window" in summary["violations"]
    _, _, code = runner.execute(parse_config(MINIMAL + "allow_infeasible = true\n"), tmp_path)
    assert code == 0


class UnderstatedNoise(BoundedNoiseQuadratic):
    """Advertises a deviation bound far below the noise it actually draws."""

    def _sample_noise(self, x, n, rng):
        return sphere(rng, n, self.dimension, 50.0)


def test_honest_majority_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(RunConfig, "problem", lambda self: UnderstatedNoise(self.d, noise_radius=0.01))
    cfg = parse_config(FEASIBLE)
    summary, _, code = runner.execute(cfg, tmp_path)
    assert code == runner.EXIT_HONEST_MAJORITY == 3
    assert summary["status"] == "honest_majority_violated"
    assert summary["failed_epoch"] == 1


def test_naive_baseline_reports_divergence(tmp_path):
    text = (CONFIGS / "blast_naive.ini").read_text()
    summary, _, code = runner.execute(parse_config(text), tmp_path)
    assert code == 0
    assert summary["status"] == "diverged" and summary["diverged"]


def test_grid_of_one_matches_execute(tmp_path):
    rows = runner.sweep(FEASIBLE + "\n[sweep]\nseed = 5\n")
    summary, result, _ = runner.execute(parse_config(FEASIBLE), tmp_path)
    (row,) = rows
    assert row["config_hash"] == summary["config_hash"]
    assert row["min_grad_norm_sq"] == repr(result.min_grad_norm_sq)
    assert row["samples_to_eps"] == (summary["samples_to_eps"] or "not reached")


def test_sweep_rows_sorted_and_errors_isolated():
    grid = FEASIBLE + "\n[sweep]\nalpha = 0, 0.2, 0.6\nseed = 1..2\n"
    rows = runner.sweep(grid, jobs=3)
    assert len(rows) == 6
    bad = [r for r in rows if r["status"] == "config_error"]
    assert len(bad) == 2 and all("alpha" in r["error"] for r in bad)
    assert [r["config_hash"] for r in rows] == sorted(r["config_hash"] for r in rows)
    assert runner.sweep_csv(rows) == runner.sweep_csv(runner.sweep(grid, jobs=1))


def test_sweep_unknown_axis_rejected():
    with pytest.raises(ConfigError):
        runner.sweep(FEASIBLE + "\n[sweep]\nbogus = 1, 2\n")


@pytest.mark.parametrize("K, B", [(4, 2400), (8, 1200), (16, 600)])
def test_suggested_batch_halves_with_workers(K, B):
    assert suggest_schedule(0.01, K, 0.0, 1.0, 1.0, 1.0).B == B


def test_samples_to_epsilon_monotone_in_alpha():
    rows = runner.sweep((CONFIGS / "sweep_alpha.ini").read_text(), jobs=4)
    by_alpha = {}
    for r in rows:
        a = json.loads(r["params"])["alpha"]
        v = r["samples_to_eps"]
        by_alpha.setdefault(a, []).append(float("inf") if v == "not reached" else int(v))
    assert all(len(v) == 20 for v in by_alpha.values())
    medians = [statistics.median(by_alpha[a]) for a in sorted(by_alpha)]
    assert medians == sorted(medians)
