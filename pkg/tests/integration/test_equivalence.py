"""End-to-end checks: full rule sets vote like their forests, and subset curves behave."""

import numpy as np
import pytest
from common_test_utils import BREAST_CANCER_CSV

from forest_rules.dataset import generate_synthetic, load_csv, stratified_kfold
from forest_rules.evaluation import (
    CurveKey,
    ExperimentConfig,
    VotePredictor,
    accuracy_curve,
    baseline_accuracy,
    first_n_reaching,
    grid_coverage_fraction,
    predict_votes,
    run_experiment,
)
from forest_rules.forest import predict_forest, predict_forest_many, train_forest
from forest_rules.heuristics import Heuristic
from forest_rules.rules import extract_rules
from forest_rules.selection import (
    SelectionConfig,
    Strategy,
    select_best_n,
    select_weighted_covering,
)

pytestmark = pytest.mark.integration

SEEDS = range(5)


def corpus(toy_corpus):
    return [*toy_corpus, generate_synthetic(200, 50, 0.05, seed=3)]


class TestForestEquivalence:
    """The full extracted rule set predicts exactly like the forest."""

    def test_on_held_out_folds(self, toy_corpus):
        for data in corpus(toy_corpus):
            for split in stratified_kfold(data, 3, seed=0):
                forest = train_forest(split.train, 25, seed=split.fold_index)
                ruleset = extract_rules(forest)
                predictor = VotePredictor.from_subset(ruleset, range(ruleset.d))

                predicted, covered = predict_votes(predictor, split.test.values)

                assert covered.all()
                np.testing.assert_array_equal(predicted, predict_forest_many(forest, split.test.values))

    def test_single_instance_prediction(self, mixed_dataset):
        forest = train_forest(mixed_dataset, 15, seed=8)
        ruleset = extract_rules(forest)
        predictor = VotePredictor.from_subset(ruleset, range(ruleset.d))
        predicted, _ = predict_votes(predictor, mixed_dataset.values)
        assert predicted.tolist() == [predict_forest(forest, row) for row in mixed_dataset.values]

    def test_curves_end_at_forest_accuracy(self, toy_corpus):
        h = Heuristic.parse("m-estimate")
        for data in corpus(toy_corpus):
            split = stratified_kfold(data, 3, seed=1)[0]
            forest = train_forest(split.train, 5, seed=2)
            ruleset = extract_rules(forest)
            baseline = baseline_accuracy(forest, split.test)
            for strategy in Strategy:
                config = SelectionConfig(strategy, h, 1, seed=4)
                curve = accuracy_curve(ruleset, config, forest, split.train, split.test, ruleset.d)
                assert curve[-1].accuracy == baseline
                assert np.all(np.diff([p.uncovered_fraction for p in curve]) <= 0.0)


def pointwise_mean(curves) -> np.ndarray:
    """Mean accuracy per n over curves, cut to the shortest."""
    length = min(len(curve) for curve in curves)
    return np.mean([[p.accuracy for p in curve[:length]] for curve in curves], axis=0)


@pytest.mark.slow
@pytest.mark.timeout(1200)
class TestSyntheticCoverage:
    def test_weighted_covering_spreads_over_the_plane(self):
        h = Heuristic.parse("m-estimate")
        wins = 0
        for seed in SEEDS:
            data = generate_synthetic(800, 200, 0.05, seed=seed)
            forest = train_forest(data, 100, seed=seed)
            ruleset = extract_rules(forest)

            covering = select_weighted_covering(ruleset, data, h, 30)
            best = select_best_n(ruleset, data, h, 30)

            if grid_coverage_fraction(ruleset, covering) > grid_coverage_fraction(ruleset, best):
                wins += 1

        assert wins >= 4


@pytest.mark.slow
@pytest.mark.timeout(3600)
@pytest.mark.skipif(not BREAST_CANCER_CSV.is_file(), reason=f"{BREAST_CANCER_CSV} is missing")
class TestBreastCancer:
    """Curves on the UCI breast-cancer data in tests/data."""

    HEURISTICS = ("recall", "m-estimate")

    @pytest.fixture(scope="class")
    def results(self):
        data = load_csv(BREAST_CANCER_CSV)
        heuristics = tuple(Heuristic.parse(name) for name in self.HEURISTICS)
        return [
            run_experiment(
                data,
                ExperimentConfig(
                    n_folds=10,
                    n_trees=100,
                    strategies=(Strategy.WEIGHTED_COVERING,),
                    heuristics=heuristics,
                    seed=seed,
                ),
                n_jobs=-1,
            )
            for seed in SEEDS
        ]

    def test_weighted_covering_reaches_baseline(self, results):
        target = np.mean([r.baseline_accuracy for r in results]) - 0.01
        for name, limit in zip(self.HEURISTICS, (40, 100), strict=True):
            key = CurveKey(Strategy.WEIGHTED_COVERING, name)
            mean = pointwise_mean([r.mean_curves[key] for r in results])
            reached = np.flatnonzero(mean >= target)
            assert reached.size > 0, name
            assert reached[0] + 1 <= limit, name

    def test_beats_baseline_with_a_fraction_of_the_rules(self, results):
        seeds_passing = 0
        for result in results:
            cutoff = 0.3 * min(fold.d for fold in result.folds)
            for name in self.HEURISTICS:
                curve = result.mean_curves[CurveKey(Strategy.WEIGHTED_COVERING, name)]
                first = first_n_reaching(curve, result.baseline_accuracy)
                if first is not None and first <= cutoff:
                    seeds_passing += 1
                    break

        assert seeds_passing >= 3
