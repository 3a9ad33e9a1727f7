"""Rule-vote prediction, accuracy curves and the cross-validated experiment."""

import dataclasses as dc
from collections.abc import Sequence
from enum import StrEnum
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed

from .dataset import Dataset, check_arity, stratified_kfold
from .errors import DatasetError, RuleError, SelectionError
from .forest import Forest, predict_forest_many, resolve_vote, resolve_votes, train_forest
from .heuristics import Heuristic
from .logger import get_logger
from .rules import Relation, RuleSet, coverage_matrix, extract_rules
from .seeding import STREAM_FOLD_FOREST, STREAM_FOLD_RANDOM_TREES, derive_seed
from .selection import (
    RuleSubset,
    SelectionConfig,
    Strategy,
    random_trees_order,
    select_best_n,
    select_weighted_covering,
)

logger = get_logger(__name__)

# Heuristic column of random-trees curves, which consult no heuristic.
NO_HEURISTIC = "none"
# Milestones reported per curve: name -> offset from the baseline accuracy.
MILESTONES = {"baseline": 0.0, "baseline-0.01": -0.01}


class UncoveredMode(StrEnum):
    """How instances covered by no selected rule are scored."""

    DEFAULT_CLASS = "default-class"
    ERROR = "error"


@dc.dataclass(frozen=True, eq=False)
class VotePredictor:
    ruleset: RuleSet
    selected: tuple[int, ...]
    default_class: int
    class_priors: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "selected", tuple(int(r) for r in self.selected))
        if not 0 <= self.default_class < self.ruleset.n_classes:
            raise RuleError(f"Default class {self.default_class} is not a valid class")
        if any(not 0 <= r < self.ruleset.d for r in self.selected):
            raise RuleError("Selected rule index outside the rule set")

    @classmethod
    def from_subset(cls, ruleset: RuleSet, subset: RuleSubset | Sequence[int]) -> "VotePredictor":
        """Predictor over ``subset`` falling back to the training majority class."""
        selected = subset.selected if isinstance(subset, RuleSubset) else tuple(subset)
        return cls(ruleset, selected, ruleset.majority_class, ruleset.class_priors)


def predict_vote(p: VotePredictor, instance: np.ndarray | Sequence[float]) -> tuple[int, bool]:
    """Majority vote of the selected rules covering ``instance``.

    Returns:
        (class, covered); uncovered instances get the default class
    """
    instance = check_arity(instance, p.ruleset.n_columns)
    votes = np.zeros(p.ruleset.n_classes, dtype=np.int64)
    for r in p.selected:
        rule = p.ruleset.rules[r]
        if all(condition.holds(instance) for condition in rule.body):
            votes[rule.head] += 1
    if votes.sum() == 0:
        return p.default_class, False
    return resolve_vote(votes, p.class_priors), True


def predict_votes(p: VotePredictor, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``predict_vote`` for every row of ``values``."""
    if values.ndim != 2 or values.shape[1] != p.ruleset.n_columns:  # noqa: PLR2004
        raise DatasetError(f"Expected a matrix with {p.ruleset.n_columns} columns")
    votes = np.zeros((values.shape[0], p.ruleset.n_classes), dtype=np.int64)
    for r in p.selected:
        rule = p.ruleset.rules[r]
        votes[rule.mask(values), rule.head] += 1
    return _decide(votes, p.default_class, p.class_priors)


def _decide(
    votes: np.ndarray, default_class: int, class_priors: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    covered = votes.sum(axis=1) > 0
    predicted = np.where(covered, resolve_votes(votes, class_priors), default_class)
    return predicted, covered


def _score(
    predicted: np.ndarray, covered: np.ndarray, labels: np.ndarray, mode: UncoveredMode
) -> tuple[float, float]:
    correct = predicted == labels
    if mode is UncoveredMode.ERROR:
        correct &= covered
    return float(correct.mean()), float(1.0 - covered.mean())


def accuracy(
    p: VotePredictor, test: Dataset, mode: UncoveredMode = UncoveredMode.DEFAULT_CLASS
) -> float:
    """Fraction of ``test`` predicted correctly.

    In ``error`` mode uncovered instances count as misclassified.
    """
    predicted, covered = predict_votes(p, test.values)
    return _score(predicted, covered, test.labels, mode)[0]


def uncovered_fraction(p: VotePredictor, test: Dataset) -> float:
    """Fraction of ``test`` covered by none of the selected rules."""
    _, covered = predict_votes(p, test.values)
    return float(1.0 - covered.mean())


def baseline_accuracy(forest: Forest, test: Dataset) -> float:
    """Accuracy of the full forest's majority vote on ``test``."""
    return float(np.mean(predict_forest_many(forest, test.values) == test.labels))


@dc.dataclass(frozen=True)
class SubsetEvaluation:
    n_rules: int
    n_instances: int
    accuracy: float
    uncovered_fraction: float
    mode: UncoveredMode


def evaluate_subset(
    ruleset: RuleSet,
    subset: RuleSubset,
    test: Dataset,
    mode: UncoveredMode = UncoveredMode.DEFAULT_CLASS,
) -> SubsetEvaluation:
    predictor = VotePredictor.from_subset(ruleset, subset)
    predicted, covered = predict_votes(predictor, test.values)
    acc, uncovered = _score(predicted, covered, test.labels, mode)
    return SubsetEvaluation(len(subset), test.n_rows, acc, uncovered, mode)


@dc.dataclass(frozen=True)
class CurvePoint:
    n_rules: int
    accuracy: float
    uncovered_fraction: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.accuracy <= 1.0 and 0.0 <= self.uncovered_fraction <= 1.0):
            raise SelectionError(f"Curve metrics must lie in [0, 1]: {self}")


def _prefix_metrics(
    ruleset: RuleSet,
    sequence: np.ndarray,
    test: Dataset,
    lengths: Sequence[int],
    mode: UncoveredMode,
) -> dict[int, tuple[float, float]]:
    """Metrics of the prefixes ``sequence[:length]`` for every requested length.

    Vote tallies are updated with the newly added rule only.
    """
    wanted = set(lengths)
    coverage = coverage_matrix(ruleset, test, rule_indices=sequence)
    votes = np.zeros((test.n_rows, ruleset.n_classes), dtype=np.int64)
    heads = ruleset.heads[sequence]
    metrics: dict[int, tuple[float, float]] = {}

    def record(length: int) -> None:
        predicted, covered = _decide(votes, ruleset.majority_class, ruleset.class_priors)
        metrics[length] = _score(predicted, covered, test.labels, mode)

    if 0 in wanted:
        record(0)
    for position in range(sequence.size):
        votes[coverage.covered(position), heads[position]] += 1
        if position + 1 in wanted:
            record(position + 1)
    return metrics


def accuracy_curve(
    ruleset: RuleSet,
    config: SelectionConfig,
    forest: Forest,
    train: Dataset,
    test: Dataset,
    n_max: int,
    mode: UncoveredMode = UncoveredMode.DEFAULT_CLASS,
) -> list[CurvePoint]:
    """Accuracy and uncovered fraction for every rule budget 1..n_max.

    Best-n and weighted covering run once to length ``n_max`` and are read
    off at every prefix. Random-trees curves are step functions: at ``n`` the
    subset is the longest whole-tree prefix of the seeded tree order holding at
    most ``n`` rules.

    Raises:
        SelectionError: n_max < 1 or n_max > d
    """
    if not 1 <= n_max <= ruleset.d:
        raise SelectionError(f"Curve length must be in [1, {ruleset.d}], got {n_max}")

    budgets = np.arange(1, n_max + 1)
    match config.strategy:
        case Strategy.RANDOM_TREES:
            blocks = random_trees_order(forest, ruleset, config.seed)
            sequence = np.concatenate(blocks)
            ends = np.concatenate([[0], np.cumsum([b.size for b in blocks])])
            # longest whole-tree prefix with at most n rules
            lengths = ends[np.searchsorted(ends, budgets, side="right") - 1]
        case Strategy.BEST_N:
            sequence = np.asarray(select_best_n(ruleset, train, config.heuristic, n_max).selected)
            lengths = budgets
        case Strategy.WEIGHTED_COVERING:
            subset = select_weighted_covering(
                ruleset, train, config.heuristic, n_max, config.min_weight
            )
            sequence = np.asarray(subset.selected)
            lengths = budgets

    sequence = sequence[: int(lengths.max())]
    metrics = _prefix_metrics(ruleset, sequence, test, lengths.tolist(), mode)
    return [
        CurvePoint(int(n), *metrics[int(length)]) for n, length in zip(budgets, lengths, strict=True)
    ]


def first_n_reaching(curve: Sequence[CurvePoint], target: float) -> int | None:
    """Smallest rule count whose accuracy is at least ``target``."""
    for point in curve:
        if point.accuracy >= target:
            return point.n_rules
    return None


class CurveKey(NamedTuple):
    strategy: Strategy
    heuristic: str

    def __str__(self) -> str:
        return f"{self.strategy.value}/{self.heuristic}"


@dc.dataclass(frozen=True)
class ExperimentConfig:
    n_folds: int = 10
    n_trees: int = 100
    strategies: tuple[Strategy, ...] = (Strategy.BEST_N, Strategy.WEIGHTED_COVERING)
    heuristics: tuple[Heuristic, ...] = ()
    n_max: int | None = None
    seed: int = 0
    min_weight: float = 0.0
    mode: UncoveredMode = UncoveredMode.DEFAULT_CLASS
    n_candidate_features: int | None = None

    def cells(self) -> list[tuple[CurveKey, SelectionConfig]]:
        """One curve per (strategy, heuristic); random trees ignore the heuristic."""
        cells = []
        for strategy in self.strategies:
            if strategy is Strategy.RANDOM_TREES:
                h = self.heuristics[0] if self.heuristics else Heuristic.parse("precision")
                cells.append((CurveKey(strategy, NO_HEURISTIC), SelectionConfig(strategy, h, 1)))
                continue
            for h in self.heuristics:
                config = SelectionConfig(strategy, h, 1, min_weight=self.min_weight)
                cells.append((CurveKey(strategy, h.kind.value), config))
        return cells


@dc.dataclass(frozen=True)
class FoldResult:
    fold_index: int
    n_train: int
    n_test: int
    d: int
    baseline_accuracy: float
    curves: dict[CurveKey, list[CurvePoint]]


@dc.dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    n_max: int
    folds: list[FoldResult]
    mean_curves: dict[CurveKey, list[CurvePoint]]
    baseline_accuracy: float

    def milestones(self) -> dict[CurveKey, dict[str, int | None]]:
        """First rule count at which each mean curve reaches the baseline (and baseline - 0.01)."""
        return {
            key: {
                name: first_n_reaching(curve, self.baseline_accuracy + offset)
                for name, offset in MILESTONES.items()
            }
            for key, curve in self.mean_curves.items()
        }


def _train_fold(
    train: Dataset, config: ExperimentConfig, fold: int
) -> tuple[Forest, RuleSet]:
    forest_seed = derive_seed(config.seed, STREAM_FOLD_FOREST, fold)
    forest = train_forest(train, config.n_trees, forest_seed, config.n_candidate_features)
    return forest, extract_rules(forest)


def _evaluate_fold(
    fold: int,
    train: Dataset,
    test: Dataset,
    forest: Forest,
    ruleset: RuleSet,
    config: ExperimentConfig,
    n_max: int,
) -> FoldResult:
    curves = {}
    for key, selection in config.cells():
        if selection.strategy is Strategy.RANDOM_TREES:
            seed = derive_seed(config.seed, STREAM_FOLD_RANDOM_TREES, fold)
            selection = dc.replace(selection, seed=seed)
        curves[key] = accuracy_curve(ruleset, selection, forest, train, test, n_max, config.mode)
    baseline = baseline_accuracy(forest, test)
    logger.info(f"Fold {fold + 1}: d={ruleset.d}, baseline accuracy {baseline:.4f}")
    return FoldResult(fold, train.n_rows, test.n_rows, ruleset.d, baseline, curves)


def mean_curve(curves: Sequence[Sequence[CurvePoint]]) -> list[CurvePoint]:
    """Pointwise arithmetic mean of equally long curves."""
    accuracies = np.array([[p.accuracy for p in curve] for curve in curves])
    uncovered = np.array([[p.uncovered_fraction for p in curve] for curve in curves])
    return [
        CurvePoint(point.n_rules, float(a), float(u))
        for point, a, u in zip(curves[0], accuracies.mean(axis=0), uncovered.mean(axis=0), strict=True)
    ]


def run_experiment(data: Dataset, config: ExperimentConfig, n_jobs: int = 1) -> ExperimentResult:
    """Cross-validated accuracy curves for every configured strategy and heuristic.

    Each fold trains its own forest on the training split, extracts its rules
    and computes all curves on the test split. Results are keyed by fold
    index, so they do not depend on ``n_jobs``.
    """
    if not config.heuristics and any(s is not Strategy.RANDOM_TREES for s in config.strategies):
        raise SelectionError("At least one heuristic is needed for best-n and weighted covering")
    if not config.strategies:
        raise SelectionError("At least one strategy is needed")

    splits = stratified_kfold(data, config.n_folds, config.seed)
    trained = Parallel(n_jobs=n_jobs)(
        delayed(_train_fold)(split.train, config, split.fold_index) for split in splits
    )

    smallest_d = min(ruleset.d for _, ruleset in trained)
    n_max = config.n_max if config.n_max is not None else smallest_d
    if n_max < 1:
        raise SelectionError(f"Curve length must be at least 1, got {n_max}")
    if n_max > smallest_d:
        logger.warning(f"Curve length {n_max} exceeds the smallest fold rule set; using {smallest_d}")
        n_max = smallest_d

    folds = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_fold)(
            split.fold_index, split.train, split.test, forest, ruleset, config, n_max
        )
        for split, (forest, ruleset) in zip(splits, trained, strict=True)
    )
    folds = sorted(folds, key=lambda f: f.fold_index)

    mean_curves = {
        key: mean_curve([fold.curves[key] for fold in folds]) for key, _ in config.cells()
    }
    baseline = float(np.mean([fold.baseline_accuracy for fold in folds]))
    return ExperimentResult(config, n_max, folds, mean_curves, baseline)


@dc.dataclass(frozen=True)
class RuleRectangle:
    """Axis-aligned region of a rule over two numeric columns."""

    rule: int
    head: int
    x: tuple[float, float]
    y: tuple[float, float]
    vote: int


def rule_rectangles(
    ruleset: RuleSet,
    subset: RuleSubset,
    bounds: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 1.0), (0.0, 1.0)),
    positive_class: int = 1,
) -> list[RuleRectangle]:
    """Bounding box of every selected rule, clipped to ``bounds``.

    ``vote`` is +1 for rules predicting ``positive_class`` and -1 otherwise.

    Raises:
        RuleError: the rule set is not over exactly two numeric columns
    """
    if ruleset.n_columns != 2 or not all(c.is_numeric for c in ruleset.schema.columns):  # noqa: PLR2004
        raise RuleError("Rectangles need a rule set over two numeric columns")

    rectangles = []
    for r in subset.selected:
        rule = ruleset.rules[r]
        box = [list(bounds[0]), list(bounds[1])]
        for condition in rule.body:
            low, high = box[condition.column]
            if condition.relation is Relation.LE:
                box[condition.column][1] = min(high, condition.value)
            else:
                box[condition.column][0] = max(low, condition.value)
        rectangles.append(
            RuleRectangle(
                rule=r,
                head=rule.head,
                x=(box[0][0], box[0][1]),
                y=(box[1][0], box[1][1]),
                vote=1 if rule.head == positive_class else -1,
            )
        )
    return rectangles


def grid_points(resolution: int) -> np.ndarray:
    """Cell centres of a resolution x resolution grid over the unit square, row-major in y."""
    if resolution < 1:
        raise DatasetError(f"Grid resolution must be at least 1, got {resolution}")
    centres = (np.arange(resolution) + 0.5) / resolution
    xs, ys = np.meshgrid(centres, centres)
    return np.column_stack([xs.ravel(), ys.ravel()])


def grid_votes(
    ruleset: RuleSet, subset: RuleSubset, resolution: int = 100, positive_class: int = 1
) -> np.ndarray:
    """Positive-minus-negative covering votes per grid cell, indexed [y, x]."""
    points = grid_points(resolution)
    net = np.zeros(points.shape[0], dtype=np.int64)
    for r in subset.selected:
        rule = ruleset.rules[r]
        net[rule.mask(points)] += 1 if rule.head == positive_class else -1
    return net.reshape(resolution, resolution)


def grid_coverage_fraction(ruleset: RuleSet, subset: RuleSubset, resolution: int = 100) -> float:
    """Fraction of grid cells covered by at least one selected rule."""
    points = grid_points(resolution)
    covered = np.zeros(points.shape[0], dtype=bool)
    for r in subset.selected:
        covered |= ruleset.rules[r].mask(points)
    return float(covered.mean())
