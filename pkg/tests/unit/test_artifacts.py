"""Unit tests for JSON artifacts and the curves CSV."""

import json

import numpy as np
import pandas as pd
import pytest

from forest_rules.artifacts import (
    CURVES_COLUMNS,
    FORMAT_VERSION,
    KIND_RULES,
    curves_frame,
    load_forest,
    load_rules,
    load_subset,
    read_json,
    save_evaluation,
    save_forest,
    save_rules,
    save_subset,
    save_subset_text,
    write_curves_csv,
    write_json,
)
from forest_rules.errors import ArtifactFormatError, ConfigurationError
from forest_rules.evaluation import (
    CurveKey,
    CurvePoint,
    ExperimentConfig,
    ExperimentResult,
    FoldResult,
    UncoveredMode,
    evaluate_subset,
)
from forest_rules.forest import predict_forest_many, train_forest
from forest_rules.heuristics import Heuristic, HeuristicKind
from forest_rules.rules import extract_rules
from forest_rules.selection import Strategy, select_random_trees, select_weighted_covering

pytestmark = pytest.mark.unit

M_ESTIMATE = Heuristic(HeuristicKind.M_ESTIMATE, m=5.0)


def small_result(n_max: int = 5) -> ExperimentResult:
    key = CurveKey(Strategy.BEST_N, "precision")
    curves = [
        [CurvePoint(n, 0.5 + 0.05 * n + 0.01 * f, 0.5 / n) for n in range(1, n_max + 1)]
        for f in range(2)
    ]
    folds = [FoldResult(f, 10, 5, 40, 0.8, {key: curves[f]}) for f in range(2)]
    mean = [
        CurvePoint(n, (a.accuracy + b.accuracy) / 2, (a.uncovered_fraction + b.uncovered_fraction) / 2)
        for n, a, b in zip(range(1, n_max + 1), *curves, strict=True)
    ]
    config = ExperimentConfig(n_folds=2, n_trees=3, strategies=(Strategy.BEST_N,), heuristics=(M_ESTIMATE,))
    return ExperimentResult(config, n_max, folds, {key: mean}, 0.8)


class TestJsonEnvelope:
    def test_envelope_fields(self, temp_dir):
        path = temp_dir / "nested" / "a.json"
        write_json(path, KIND_RULES, {"x": 1})

        document = json.loads(path.read_text(encoding="utf-8"))

        assert document == {"format_version": FORMAT_VERSION, "kind": KIND_RULES, "x": 1}
        assert read_json(path, KIND_RULES)["x"] == 1

    def test_wrong_kind(self, temp_dir):
        path = temp_dir / "a.json"
        write_json(path, "forest", {})
        with pytest.raises(ArtifactFormatError, match="expected 'rules'"):
            read_json(path, KIND_RULES)

    def test_unsupported_version(self, temp_dir):
        path = temp_dir / "a.json"
        path.write_text(json.dumps({"format_version": 99, "kind": KIND_RULES}))
        with pytest.raises(ArtifactFormatError, match="format_version"):
            read_json(path, KIND_RULES)

    def test_malformed_json(self, temp_dir):
        path = temp_dir / "a.json"
        path.write_text("{not json")
        with pytest.raises(ArtifactFormatError, match="not valid JSON"):
            read_json(path, KIND_RULES)

    def test_missing_field(self, temp_dir):
        path = temp_dir / "rules.json"
        write_json(path, KIND_RULES, {"rules": []})
        with pytest.raises(ArtifactFormatError, match="well-formed"):
            load_rules(path)


class TestModelArtifacts:
    """Test saving and reloading forests, rule sets and subsets."""

    def test_reloaded_forest_predicts_the_same(self, mixed_dataset, temp_dir):
        forest = train_forest(mixed_dataset, 4, seed=2)
        path = temp_dir / "forest.json"

        save_forest(forest, path)
        loaded = load_forest(path)

        assert loaded.schema == forest.schema
        assert (loaded.n_trees, loaded.seed, loaded.majority_class) == (4, 2, forest.majority_class)
        for a, b in zip(loaded.trees, forest.trees, strict=True):
            assert a.nodes == b.nodes
        np.testing.assert_array_equal(
            predict_forest_many(loaded, mixed_dataset.values),
            predict_forest_many(forest, mixed_dataset.values),
        )

    def test_reloaded_rules_extracted_from_reloaded_forest(self, mixed_dataset, temp_dir):
        forest = train_forest(mixed_dataset, 3, seed=1)
        save_forest(forest, temp_dir / "forest.json")
        ruleset = extract_rules(load_forest(temp_dir / "forest.json"))
        path = temp_dir / "rules.json"

        save_rules(ruleset, path)
        loaded = load_rules(path)

        assert loaded.rules == extract_rules(forest).rules
        np.testing.assert_array_equal(loaded.class_priors, forest.class_priors)

    def test_subset_with_and_without_scores(self, mixed_dataset, temp_dir):
        forest = train_forest(mixed_dataset, 3, seed=1)
        ruleset = extract_rules(forest)
        covering = select_weighted_covering(ruleset, mixed_dataset, M_ESTIMATE, 4, min_weight=0.125)
        random_trees = select_random_trees(forest, ruleset, ruleset.d, seed=3)

        for subset in (covering, random_trees):
            save_subset(subset, temp_dir / "subset.json", ruleset.d)
            assert load_subset(temp_dir / "subset.json") == subset

    def test_subset_text(self, mixed_dataset, temp_dir):
        ruleset = extract_rules(train_forest(mixed_dataset, 2, seed=0))
        subset = select_weighted_covering(ruleset, mixed_dataset, M_ESTIMATE, 3)
        path = temp_dir / "subset.txt"

        save_subset_text(ruleset, subset, path)

        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3
        assert all(line.startswith("IF ") and " THEN class=" in line for line in lines)

    def test_reruns_write_identical_bytes(self, mixed_dataset, temp_dir):
        for name in ("a", "b"):
            forest = train_forest(mixed_dataset, 3, seed=7)
            save_forest(forest, temp_dir / f"{name}.forest.json")
            save_rules(extract_rules(forest), temp_dir / f"{name}.rules.json")
        for suffix in ("forest.json", "rules.json"):
            first = (temp_dir / f"a.{suffix}").read_bytes()
            assert first == (temp_dir / f"b.{suffix}").read_bytes()

    def test_evaluation(self, mixed_dataset, temp_dir):
        ruleset = extract_rules(train_forest(mixed_dataset, 2, seed=0))
        subset = select_weighted_covering(ruleset, mixed_dataset, M_ESTIMATE, 3)
        evaluation = evaluate_subset(ruleset, subset, mixed_dataset, UncoveredMode.ERROR)
        path = temp_dir / "evaluation.json"

        save_evaluation(evaluation, path)

        document = read_json(path, "evaluation")
        assert document["n_rules"] == 3
        assert document["uncovered_mode"] == "error"
        assert document["accuracy"] == evaluation.accuracy


class TestCurvesCsv:
    def test_all_points_with_stride_one(self):
        frame = curves_frame(small_result(5))

        assert list(frame.columns) == list(CURVES_COLUMNS)
        # two folds plus the mean, five points each
        assert len(frame) == 15
        assert sorted(frame["fold"].unique()) == ["0", "1", "mean"]

    def test_stride_keeps_last_point(self):
        frame = curves_frame(small_result(7), stride=3)
        assert sorted(frame[frame["fold"] == "mean"]["n"]) == [1, 4, 7]
        frame = curves_frame(small_result(8), stride=3)
        assert sorted(frame[frame["fold"] == "mean"]["n"]) == [1, 4, 7, 8]

    def test_invalid_stride(self):
        with pytest.raises(ConfigurationError):
            curves_frame(small_result(), stride=0)

    def test_written_csv(self, temp_dir):
        path = temp_dir / "out" / "curves.csv"

        write_curves_csv(small_result(3), path)

        text = path.read_text(encoding="utf-8")
        assert text.splitlines()[0] == ",".join(CURVES_COLUMNS)
        frame = pd.read_csv(path, dtype={"fold": str})
        mean = frame[frame["fold"] == "mean"]
        assert mean["accuracy"].tolist() == pytest.approx([0.555, 0.605, 0.655])
        assert set(frame["strategy"]) == {"best"}
