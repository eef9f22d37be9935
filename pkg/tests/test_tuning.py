"""TPE suggestion behavior, the optimize loop and the accuracy objective."""

from __future__ import annotations

import numpy as np
import pytest

from potselect.selection import SelectionConfig, Weights
from potselect.tuning import (
    SearchSpace,
    TpeParams,
    Trial,
    TrialHistory,
    accuracy_objective,
    best_trial,
    load_history,
    optimize,
    tpe_suggest,
    tune_weights,
)

from conftest import (
    CONCEPT_FIXTURE,
    ROUGH_FIXTURE,
    completion_fixture,
    eval_dataset_records,
    eval_fixtures,
    eval_pool,
    make_services,
)
from potselect.evalharness import load_gsm8k
from potselect.providers import Fixture


def _quadratic(point) -> float:
    return -float(np.sum((np.asarray(point) - 0.3) ** 2))


def _history(points_objectives, seed=0) -> TrialHistory:
    history = TrialHistory(rng_seed=seed)
    for i, (point, objective) in enumerate(points_objectives):
        history.append(Trial(seq=i, point=tuple(point), objective=objective))
    return history


class TestSearchSpace:
    def test_default_is_unit_box_4d(self):
        space = SearchSpace()
        assert space.ndim == 4
        assert space.bounds == ((0.0, 1.0),) * 4

    def test_bounds_validated(self):
        with pytest.raises(ValueError):
            SearchSpace(bounds=((1.0, 1.0),))

    def test_contains(self):
        space = SearchSpace(bounds=((0.0, 1.0), (-2.0, 2.0)))
        assert space.contains((0.5, -1.0))
        assert not space.contains((0.5, 3.0))


class TestTrialHistory:
    def test_seq_strictly_increasing(self):
        history = _history([((0.1,) * 4, 1.0)])
        with pytest.raises(ValueError):
            history.append(Trial(seq=0, point=(0.2,) * 4, objective=0.5))

    def test_objective_must_be_finite(self):
        with pytest.raises(ValueError):
            Trial(seq=0, point=(0.1,) * 4, objective=float("nan"))


class TestTpeSuggest:
    def test_empty_history_gives_uniform_point_in_bounds(self):
        space = SearchSpace()
        point = tpe_suggest(TrialHistory(rng_seed=1), space)
        assert space.contains(point)

    def test_degenerate_history_falls_back_to_uniform(self):
        space = SearchSpace()
        trials = [((i / 20.0,) * 4, 0.5) for i in range(20)]
        point = tpe_suggest(_history(trials, seed=2), space)
        assert space.contains(point)

    def test_deterministic_given_seed_and_history(self):
        trials = [
            (tuple(np.random.default_rng(i).uniform(0, 1, 4)), float(i)) for i in range(15)
        ]
        a = tpe_suggest(_history(trials, seed=9), SearchSpace())
        b = tpe_suggest(_history(trials, seed=9), SearchSpace())
        assert np.array_equal(a, b)

    def test_different_history_lengths_give_different_draws(self):
        trials = [
            (tuple(np.random.default_rng(i).uniform(0, 1, 4)), float(i)) for i in range(15)
        ]
        a = tpe_suggest(_history(trials, seed=9), SearchSpace())
        b = tpe_suggest(_history(trials[:-1], seed=9), SearchSpace())
        assert not np.array_equal(a, b)

    def test_suggestions_always_inside_arbitrary_bounds(self):
        space = SearchSpace(bounds=((-2.0, 3.0), (0.0, 0.5)))
        rng = np.random.default_rng(5)
        for i in range(200):
            n = int(rng.integers(0, 40))
            trials = [
                (
                    (float(rng.uniform(-2, 3)), float(rng.uniform(0, 0.5))),
                    float(rng.normal()) if i % 3 else 0.25,  # sometimes all-equal
                )
                for _ in range(n)
            ]
            point = tpe_suggest(_history(trials, seed=i), space)
            assert space.contains(point)

    def test_one_dimensional_cluster_attracts_suggestions(self):
        # high-objective points clustered near 0.3; the suggestion should
        # land inside the cluster's convex hull almost always
        rng = np.random.default_rng(0)
        cluster = rng.uniform(0.27, 0.33, size=10)
        spread = rng.uniform(0.5, 0.95, size=30)
        space = SearchSpace(bounds=((0.0, 1.0),))
        inside = 0
        for seed in range(100):
            history = TrialHistory(rng_seed=seed)
            seq = 0
            for x in cluster:
                history.append(Trial(seq, (float(x),), objective=1.0 + 0.01 * float(x)))
                seq += 1
            for x in spread:
                history.append(Trial(seq, (float(x),), objective=0.001 * float(x)))
                seq += 1
            suggestion = tpe_suggest(history, space)
            if cluster.min() <= suggestion[0] <= cluster.max():
                inside += 1
        assert inside > 90

    def test_startup_phase_is_uniform_random(self):
        trials = [((0.5,) * 4, float(i)) for i in range(5)]
        params = TpeParams(n_startup=10)
        point = tpe_suggest(_history(trials, seed=3), SearchSpace(), params)
        assert SearchSpace().contains(point)

    def test_params_validated(self):
        with pytest.raises(ValueError):
            TpeParams(gamma=0.0)
        with pytest.raises(ValueError):
            TpeParams(n_candidates=0)


class TestOptimize:
    def test_quadratic_converges_near_target(self):
        history = optimize(_quadratic, SearchSpace(), budget=60, seed=0)
        best = best_trial(history)
        assert np.all(np.abs(np.asarray(best.point) - 0.3) <= 0.1)

    def test_resume_adds_exactly_budget_trials_with_continuing_seq(self):
        history = optimize(_quadratic, SearchSpace(), budget=5, seed=3)
        resumed = optimize(_quadratic, SearchSpace(), budget=3, history=history)
        assert len(resumed) == 8
        assert [t.seq for t in resumed.trials] == list(range(8))

    def test_deterministic_across_runs(self):
        a = optimize(_quadratic, SearchSpace(), budget=15, seed=4)
        b = optimize(_quadratic, SearchSpace(), budget=15, seed=4)
        assert [t.point for t in a.trials] == [t.point for t in b.trials]

    def test_trial_log_reconstructs_history_exactly(self, tmp_path):
        log_path = tmp_path / "trials.jsonl"
        history = optimize(_quadratic, SearchSpace(), budget=12, seed=7, log_path=log_path)
        loaded = load_history(log_path)
        assert loaded.rng_seed == history.rng_seed
        assert loaded.trials == history.trials

    def test_objective_failure_persists_partial_history(self, tmp_path):
        log_path = tmp_path / "trials.jsonl"
        calls = {"n": 0}

        def flaky(point):
            calls["n"] += 1
            if calls["n"] > 4:
                raise RuntimeError("provider down")
            return _quadratic(point)

        with pytest.raises(RuntimeError):
            optimize(flaky, SearchSpace(), budget=10, seed=1, log_path=log_path)
        partial = load_history(log_path)
        assert len(partial) == 4
        resumed = optimize(_quadratic, SearchSpace(), budget=6, history=partial, log_path=log_path)
        assert len(resumed) == 10
        assert len(load_history(log_path)) == 10

    def test_best_trial_prefers_earliest_on_ties(self):
        history = _history([((0.1,) * 4, 1.0), ((0.2,) * 4, 1.0)])
        assert best_trial(history).seq == 0


class TestAccuracyObjective:
    def _gold_services(self):
        fixtures = [CONCEPT_FIXTURE, ROUGH_FIXTURE]
        for i in range(1, 6):
            fixtures.append(
                completion_fixture(f"Evaluation question number {i}?", f"ans = {10 * i}")
            )
        return make_services(fixtures)

    def _dataset(self, tmp_path):
        import json

        path = tmp_path / "train.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for record in eval_dataset_records():
                fh.write(json.dumps(record) + "\n")
        return load_gsm8k(path)

    def test_gold_programs_score_one(self, tmp_path):
        dataset = self._dataset(tmp_path)
        assert accuracy_objective(Weights(), eval_pool(), dataset, self._gold_services()) == 1.0

    def test_constant_zero_answers_score_zero(self, tmp_path):
        dataset = self._dataset(tmp_path)
        fixtures = [
            CONCEPT_FIXTURE,
            ROUGH_FIXTURE,
            Fixture("pattern", r"(?s)\n\nQuestion: [^\n]*\n# Python code, return ans\n\Z", "ans = 0"),
        ]
        assert accuracy_objective(Weights(), eval_pool(), dataset, make_services(fixtures)) == 0.0

    def test_mixed_fixture_scores_three_fifths(self, tmp_path):
        dataset = self._dataset(tmp_path)
        value = accuracy_objective(Weights(), eval_pool(), dataset, make_services(eval_fixtures()))
        assert value == pytest.approx(0.6)


class TestTuneWeights:
    def test_budget_one_returns_the_single_point(self, tmp_path):
        log_path = tmp_path / "t.jsonl"
        weights = tune_weights(
            None, None, budget=1, seed=11, services=None,
            objective=_quadratic, log_path=log_path,
        )
        history = load_history(log_path)
        assert len(history) == 1
        assert weights.as_array() == pytest.approx(np.asarray(history.trials[0].point))

    def test_synthetic_objective_recovers_target_box(self):
        weights = tune_weights(None, None, budget=60, seed=2, services=None, objective=_quadratic)
        assert np.all(np.abs(weights.as_array() - 0.3) <= 0.1)

    def test_accuracy_pipeline_objective(self, tmp_path):
        import json

        path = tmp_path / "train.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for record in eval_dataset_records():
                fh.write(json.dumps(record) + "\n")
        dataset = load_gsm8k(path)
        weights = tune_weights(
            eval_pool(), dataset, budget=2, seed=0, services=make_services(eval_fixtures()),
            selection_config_template=SelectionConfig(),
        )
        assert isinstance(weights, Weights)
