"""Command-line workflows: exit codes, output files, determinism."""

from __future__ import annotations

import json

import numpy as np
import pytest

from potselect.cli import main
from potselect.providers import save_fixtures
from potselect.selection import load_weights

from conftest import (
    augmentation_fixtures,
    CONCEPT_FIXTURE,
    ROUGH_FIXTURE,
    thirteen_seeds,
)


def _write_seed_pool(path, pool):
    with open(path, "w", encoding="utf-8") as fh:
        for example in pool:
            fh.write(json.dumps(example.to_json()) + "\n")


@pytest.fixture
def augment_files(tmp_path):
    pool_path = tmp_path / "seeds.jsonl"
    _write_seed_pool(pool_path, thirteen_seeds())
    fixtures_path = tmp_path / "fixtures.json"
    save_fixtures(augmentation_fixtures(), fixtures_path)
    return {"pool": str(pool_path), "fixtures": str(fixtures_path), "tmp": tmp_path}


class TestAugmentCommand:
    def test_thirteen_seeds_two_stages_exit_zero_pool_39(self, augment_files, capsys):
        out = augment_files["tmp"] / "augmented.jsonl"
        code = main(
            [
                "augment",
                "--pool", augment_files["pool"],
                "--fixtures", augment_files["fixtures"],
                "--stages", "1,2",
                "--out", str(out),
            ]
        )
        assert code == 0
        records = [json.loads(l) for l in out.read_text().splitlines()]
        examples = [r for r in records if "meta" not in r]
        assert len(examples) == 39
        assert "stage1=13 stage2=13" in capsys.readouterr().out
        assert (augment_files["tmp"] / "augmented.jsonl.attempts.jsonl").exists()

    def test_missing_seed_file_is_data_error(self, tmp_path, capsys):
        code = main(
            [
                "augment",
                "--pool", str(tmp_path / "nope.jsonl"),
                "--out", str(tmp_path / "out.jsonl"),
            ]
        )
        assert code == 3
        assert "data error" in capsys.readouterr().err

    def test_scripted_provider_without_fixtures_is_provider_error(self, augment_files, capsys):
        code = main(
            [
                "augment",
                "--pool", augment_files["pool"],
                "--out", str(augment_files["tmp"] / "out.jsonl"),
            ]
        )
        assert code == 2
        assert "provider error" in capsys.readouterr().err

    def test_repeat_runs_are_byte_identical(self, augment_files):
        outs = []
        for run in range(2):
            out = augment_files["tmp"] / f"augmented{run}.jsonl"
            code = main(
                [
                    "augment",
                    "--pool", augment_files["pool"],
                    "--fixtures", augment_files["fixtures"],
                    "--stages", "1,2",
                    "--seed", "9",
                    "--out", str(out),
                ]
            )
            assert code == 0
            outs.append(out.read_bytes())
        # the meta record echoes the per-run output path, so compare records
        a = [l for l in outs[0].split(b"\n") if b'"meta"' not in l]
        b = [l for l in outs[1].split(b"\n") if b'"meta"' not in l]
        assert a == b


class TestUsageErrors:
    def test_no_command(self, capsys):
        assert main([]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert main(["augment", "--frobnicate"]) == 1

    def test_unknown_command(self):
        assert main(["transmogrify"]) == 1

    def test_missing_required_out(self, augment_files):
        assert main(["augment", "--pool", augment_files["pool"]]) == 1


class TestSelectCommand:
    def test_relevance_fixture_picks_identical_question_first(self, tmp_path):
        q_t = "eggs sold at the market today"
        pool_path = tmp_path / "pool.jsonl"
        records = [
            {
                "id": "ex0",
                "question": "completely unrelated astronomy words",
                "answer_text": "ans = 1",
                "provenance": {"stage": "seed"},
                "parent_id": None,
            },
            {
                "id": "ex1",
                "question": q_t,
                "answer_text": "ans = 2",
                "provenance": {"stage": "seed"},
                "parent_id": None,
            },
        ]
        with open(pool_path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
        dataset_path = tmp_path / "dataset.jsonl"
        dataset_path.write_text(json.dumps({"question": q_t, "answer": "#### 2"}) + "\n")
        fixtures_path = tmp_path / "fixtures.json"
        save_fixtures([CONCEPT_FIXTURE, ROUGH_FIXTURE], fixtures_path)
        out = tmp_path / "chosen.jsonl"
        code = main(
            [
                "select",
                "--pool", str(pool_path),
                "--dataset", str(dataset_path),
                "--fixtures", str(fixtures_path),
                "--weights", "1,0,0,0",
                "--epsilon", "0",
                "--out", str(out),
            ]
        )
        assert code == 0
        rows = [json.loads(l) for l in out.read_text().splitlines() if "meta" not in l]
        assert rows[0]["chosen"][0] == "ex1"
        assert (tmp_path / "chosen.jsonl.trace.jsonl").exists()


class TestTuneCommand:
    def test_synthetic_objective_recovers_target(self, tmp_path, capsys):
        out = tmp_path / "weights.json"
        code = main(
            [
                "tune",
                "--synthetic-objective",
                "--budget", "60",
                "--seed", "2",
                "--out", str(out),
            ]
        )
        assert code == 0
        weights = load_weights(out)
        assert np.all(np.abs(weights.as_array() - 0.3) <= 0.1)
        assert (tmp_path / "weights.json.trials.jsonl").exists()
        assert "best objective" in capsys.readouterr().out


class TestEvalCommand:
    def test_five_item_fixture_scores_point_six(self, eval_environment, capsys):
        out = eval_environment["tmp"] / "report.jsonl"
        code = main(
            [
                "eval",
                "--pool", eval_environment["pool"],
                "--dataset", eval_environment["dataset"],
                "--fixtures", eval_environment["fixtures"],
                "--out", str(out),
            ]
        )
        assert code == 0
        assert "accuracy=0.6000" in capsys.readouterr().out
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert lines[-1]["summary"]["accuracy"] == pytest.approx(0.6)

    def test_cold_then_warm_cache_byte_identical_and_no_provider_calls(
        self, eval_environment, capsys
    ):
        cache_dir = eval_environment["tmp"] / "cache"
        reports = []
        calls = []
        for run in range(2):
            out = eval_environment["tmp"] / f"report{run}.jsonl"
            code = main(
                [
                    "eval",
                    "--pool", eval_environment["pool"],
                    "--dataset", eval_environment["dataset"],
                    "--fixtures", eval_environment["fixtures"],
                    "--cache-dir", str(cache_dir),
                    "--out", str(out),
                ]
            )
            assert code == 0
            stdout = capsys.readouterr().out
            calls.append(int(stdout.rsplit("provider_calls=", 1)[1].split()[0]))
            body = [
                l for l in out.read_text(encoding="utf-8").splitlines() if '"meta"' not in l
            ]
            reports.append("\n".join(body))
        assert reports[0] == reports[1]
        assert calls[0] > 0
        assert calls[1] == 0


class TestCacheStats:
    def test_reports_counts(self, eval_environment, capsys):
        cache_dir = eval_environment["tmp"] / "cache"
        main(
            [
                "eval",
                "--pool", eval_environment["pool"],
                "--dataset", eval_environment["dataset"],
                "--fixtures", eval_environment["fixtures"],
                "--cache-dir", str(cache_dir),
                "--out", str(eval_environment["tmp"] / "r.jsonl"),
            ]
        )
        capsys.readouterr()
        code = main(["cache-stats", "--cache-dir", str(cache_dir)])
        assert code == 0
        out = capsys.readouterr().out
        assert "entries=" in out and "quarantined=0" in out

    def test_requires_cache_dir(self):
        assert main(["cache-stats"]) == 1


class TestConfigPrecedence:
    def test_flag_overrides_config_file(self, eval_environment, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"max_chosen": 1, "epsilon": 0.0}))
        out = eval_environment["tmp"] / "report.jsonl"
        code = main(
            [
                "eval",
                "--config", str(config_path),
                "--max-chosen", "2",
                "--pool", eval_environment["pool"],
                "--dataset", eval_environment["dataset"],
                "--fixtures", eval_environment["fixtures"],
                "--out", str(out),
            ]
        )
        assert code == 0
        meta = json.loads(out.read_text().splitlines()[0])["meta"]
        assert meta["config"]["max_chosen"] == 2  # flag wins
        assert meta["config"]["epsilon"] == 0.0  # config file wins over default

    def test_unknown_config_keys_are_usage_errors(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"no_such_key": 1}))
        assert main(["cache-stats", "--config", str(config_path)]) == 1

    def test_effective_config_echoed_into_meta(self, eval_environment):
        out = eval_environment["tmp"] / "report.jsonl"
        main(
            [
                "eval",
                "--pool", eval_environment["pool"],
                "--dataset", eval_environment["dataset"],
                "--fixtures", eval_environment["fixtures"],
                "--seed", "42",
                "--out", str(out),
            ]
        )
        meta = json.loads(out.read_text().splitlines()[0])["meta"]
        assert meta["command"] == "eval"
        assert meta["config"]["seed"] == 42
        assert meta["config"]["provider"] == "scripted"
