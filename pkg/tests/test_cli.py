import json
from pathlib import Path

import numpy as np
import pytest

from samo.cli import RunConfig, main
from samo.core import ConfigurationError

CHEAP_CONFIG = {
    "problem": {"name": "two-paraboloids", "n_dim": 4},
    "samo": {
        "budget": 10,
        "batch_size": 5,
        "h_min": 1e-6,
        "surrogate": "rbf",
        "optimizer": "nsga2",
        "population_size": 12,
        "moea": {"generations": 8},
        "seed": 3,
    },
    "study": {"sizes": [4, 6], "surrogates": ["rbf"], "repetitions": 1},
}


def write_config(tmp_path: Path, payload: dict, name: str = "config.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


class TestRunConfig:
    def test_parses_defaults(self, tmp_path):
        path = write_config(tmp_path, {"problem": {"name": "zdt1"}})
        config = RunConfig.from_file(path)
        assert config.problem.name == "zdt1"
        assert config.samo.budget == 120
        assert config.samo.h_min == 2.0

    def test_shipped_default_config_is_paper_parameter_set(self):
        config = RunConfig.from_file(Path(__file__).parent.parent / "configs" / "default.json")
        assert config.problem.name == "mbs"
        assert config.problem.n_dim == 24
        assert np.allclose(config.problem.bounds.lower, -0.003)
        assert np.allclose(config.problem.bounds.upper, 0.003)
        assert config.samo.batch_size == 20
        assert config.samo.budget == 120
        assert config.samo.h_min == 2.0
        assert config.samo.population_size == 100
        assert config.samo.surrogate == "mlp"
        assert config.samo.optimizer == "nsga2"
        assert config.samo.moea.generations == 200
        assert config.samo.moea.crossover_prob == 0.5
        assert config.samo.moea.eta_mutation == 20.0

    def test_unknown_top_level_key_rejected(self, tmp_path):
        path = write_config(tmp_path, {"problems": {}})
        with pytest.raises(ConfigurationError, match="unknown keys"):
            RunConfig.from_file(path)

    def test_unknown_nested_key_rejected(self, tmp_path):
        payload = {"samo": {"batchsize": 10}}
        path = write_config(tmp_path, payload)
        with pytest.raises(ConfigurationError, match="batchsize"):
            RunConfig.from_file(path)

    def test_batch_above_budget_rejected_before_any_evaluation(self, tmp_path):
        payload = {"problem": {"name": "two-paraboloids"}, "samo": {"budget": 10, "batch_size": 20}}
        path = write_config(tmp_path, payload)
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(path)

    def test_invalid_json_reported(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError, match="JSON"):
            RunConfig.from_file(path)

    def test_mbs_overrides(self, tmp_path):
        payload = {
            "problem": {
                "name": "mbs",
                "n_dim": 6,
                "half_width": 0.01,
                "params": {"sprung_mass": 250.0},
                "horizon": {"te": 1.0, "dt": 0.001},
            }
        }
        config = RunConfig.from_file(write_config(tmp_path, payload))
        assert config.problem.n_dim == 6
        evaluator = config.problem.evaluate
        assert evaluator.nominal.sprung_mass == 250.0
        assert evaluator.te == 1.0


class TestCmdRun:
    def test_end_to_end_run(self, tmp_path, capsys):
        config_path = write_config(tmp_path, CHEAP_CONFIG)
        out = tmp_path / "run"
        code = main(["run", "--config", str(config_path), "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "round 0" in printed and "h=" in printed
        assert (out / "metrics.json").exists()
        assert (out / "config_snapshot.json").exists()
        # snapshot re-parses to an equivalent configuration
        snapshot = RunConfig.from_file(out / "config_snapshot.json")
        assert snapshot.samo == RunConfig.from_file(config_path).samo

    def test_rejected_config_exits_2_and_writes_nothing(self, tmp_path):
        payload = {"problem": {"name": "two-paraboloids"}, "samo": {"budget": 5, "batch_size": 20}}
        config_path = write_config(tmp_path, payload)
        out = tmp_path / "run"
        code = main(["run", "--config", str(config_path), "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_same_seed_byte_identical_front_csvs(self, tmp_path):
        config_path = write_config(tmp_path, CHEAP_CONFIG)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["run", "--config", str(config_path), "--out", str(out_a)]) == 0
        assert main(["run", "--config", str(config_path), "--out", str(out_b)]) == 0
        fronts = sorted(p.name for p in out_a.glob("front_round_*.csv"))
        assert fronts
        for name in fronts + ["final_front.csv"]:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_seed_override_changes_results(self, tmp_path):
        config_path = write_config(tmp_path, CHEAP_CONFIG)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["run", "--config", str(config_path), "--out", str(out_a)]) == 0
        assert (
            main(["run", "--config", str(config_path), "--out", str(out_b), "--seed", "99"]) == 0
        )
        assert (out_a / "samples_round_0.csv").read_bytes() != (
            out_b / "samples_round_0.csv"
        ).read_bytes()


class TestDefaultConfig:
    def test_default_shipped_config_full_run(self, tmp_path):
        config = Path(__file__).parent.parent / "configs" / "default.json"
        out = tmp_path / "default_run"
        assert main(["run", "--config", str(config), "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["total_evaluations"] <= 120 + 20
        for j in range(len(metrics["rounds"])):
            assert (out / f"samples_round_{j}.csv").exists()
            assert (out / f"front_round_{j}.csv").exists()
            assert (out / f"surrogate_round_{j}.json").exists()
        assert (out / "projection_matrix.csv").exists()
        assert (out / "final_front.csv").exists()


class TestCmdFront:
    def test_combined_row_count_identity(self, tmp_path, capsys):
        config_path = write_config(tmp_path, CHEAP_CONFIG)
        out = tmp_path / "run"
        assert main(["run", "--config", str(config_path), "--out", str(out)]) == 0
        assert main(["front", str(out)]) == 0
        combined = (out / "combined.csv").read_text().strip().splitlines()
        metrics = json.loads((out / "metrics.json").read_text())
        expected_round_rows = sum(
            r["new_samples"] + r["front_size"] for r in metrics["rounds"]
        )
        data_rows = combined[1:]
        round_rows = [r for r in data_rows if not r.startswith("-1,")]
        final_rows = [r for r in data_rows if r.startswith("-1,")]
        assert len(round_rows) == expected_round_rows
        assert len(final_rows) == metrics["final_front_size"]
        # every round index appears
        rounds_seen = {int(r.split(",")[0]) for r in round_rows}
        assert rounds_seen == set(range(len(metrics["rounds"])))

    def test_missing_artifacts_error(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["front", str(empty)]) == 1
        assert "missing artifact" in capsys.readouterr().err


class TestCmdStudy:
    def test_study_table(self, tmp_path):
        config_path = write_config(tmp_path, CHEAP_CONFIG)
        out = tmp_path / "study"
        assert main(["study", "--config", str(config_path), "--out", str(out)]) == 0
        lines = (out / "study.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header[:4] == ["batch_size", "surrogate", "repetition", "rounds"]
        assert len(lines) == 1 + 2  # sizes 4 and 6, one surrogate, one repetition

    def test_study_requires_sizes(self, tmp_path):
        payload = {"problem": {"name": "two-paraboloids"}}
        config_path = write_config(tmp_path, payload)
        assert main(["study", "--config", str(config_path), "--out", str(tmp_path / "s")]) == 2

    def test_full_cross_product_eight_rows(self, tmp_path):
        payload = {
            "problem": {"name": "two-paraboloids", "n_dim": 4},
            "samo": {
                "budget": 30,
                "batch_size": 5,
                "h_min": 0.05,
                "population_size": 12,
                "moea": {"generations": 8},
                "train": {"epochs": 60, "patience": 60},
                "seed": 5,
            },
            "study": {"sizes": [5, 10, 20, 30], "surrogates": ["mlp", "rbf"], "repetitions": 1},
        }
        config_path = write_config(tmp_path, payload)
        out = tmp_path / "study"
        assert main(["study", "--config", str(config_path), "--out", str(out)]) == 0
        lines = (out / "study.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 8
        cells = {(row.split(",")[0], row.split(",")[1]) for row in lines[1:]}
        assert cells == {(str(s), kind) for s in (5, 10, 20, 30) for kind in ("mlp", "rbf")}

    def test_study_rounds_match_single_run_metrics(self, tmp_path):
        # the study derives each cell's seed deterministically, so re-running
        # one cell as a standalone run must agree with the table
        from samo.cli import RunConfig
        from samo.driver import derive_seed, samo_run
        from dataclasses import replace

        payload = {
            "problem": {"name": "two-paraboloids", "n_dim": 4},
            "samo": {
                "budget": 20,
                "batch_size": 5,
                "h_min": 0.05,
                "surrogate": "rbf",
                "population_size": 12,
                "moea": {"generations": 8},
                "seed": 9,
            },
            "study": {"sizes": [10], "surrogates": ["rbf"], "repetitions": 1},
        }
        config_path = write_config(tmp_path, payload)
        out = tmp_path / "study"
        assert main(["study", "--config", str(config_path), "--out", str(out)]) == 0
        row = (out / "study.csv").read_text().strip().splitlines()[1].split(",")
        table_rounds = int(row[3])

        config = RunConfig.from_file(config_path)
        cell_cfg = replace(
            config.samo, batch_size=10, seed=derive_seed(config.samo.seed, 3, 10, 0)
        )
        run_dir = tmp_path / "cell"
        samo_run(config.problem, cell_cfg, run_dir=run_dir)
        metrics = json.loads((run_dir / "metrics.json").read_text())
        assert len(metrics["rounds"]) == table_rounds


class TestCmdEvaluate:
    def test_default_point_is_origin(self, tmp_path, capsys):
        config_path = write_config(tmp_path, {"problem": {"name": "two-paraboloids", "n_dim": 2}})
        assert main(["evaluate", "--config", str(config_path)]) == 0
        values = [float(v) for v in capsys.readouterr().out.strip().split(",")]
        assert values == pytest.approx([0.5, 0.5])  # ||0 - a||^2 with a = (.5, .5)

    def test_explicit_point(self, tmp_path, capsys):
        config_path = write_config(tmp_path, {"problem": {"name": "two-paraboloids", "n_dim": 2}})
        assert main(["evaluate", "--config", str(config_path), "--x", "0.5,0.5"]) == 0
        values = [float(v) for v in capsys.readouterr().out.strip().split(",")]
        assert values == pytest.approx([0.0, 2.0])

    def test_bad_point_rejected(self, tmp_path, capsys):
        config_path = write_config(tmp_path, {"problem": {"name": "two-paraboloids", "n_dim": 2}})
        assert main(["evaluate", "--config", str(config_path), "--x", "a,b"]) == 2
