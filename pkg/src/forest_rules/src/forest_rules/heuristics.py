"""Rule quality heuristics computed from weighted confusion counts."""

import dataclasses as dc
import math
from collections.abc import Sequence
from enum import StrEnum

import numpy as np

from .dataset import Dataset
from .errors import ArityMismatchError, DatasetError, SelectionError
from .rules import CoverageMatrix, Rule, RuleSet

# Tuned m from the comparative study of rule learning heuristics.
DEFAULT_M = 22.466


class HeuristicKind(StrEnum):
    PRECISION = "precision"
    RECALL = "recall"
    M_ESTIMATE = "m-estimate"


@dc.dataclass(frozen=True)
class Heuristic:
    kind: HeuristicKind
    m: float = DEFAULT_M

    def __post_init__(self) -> None:
        if not math.isfinite(self.m) or self.m < 0:
            raise SelectionError(f"m must be a non-negative real, got {self.m}")

    @classmethod
    def parse(cls, name: str, m: float = DEFAULT_M) -> "Heuristic":
        """Heuristic from its CLI name: precision, recall or m-estimate."""
        try:
            kind = HeuristicKind(name.strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in HeuristicKind)
            raise SelectionError(f"Unknown heuristic '{name}' (choose from {choices})")
        return cls(kind, m)

    def __str__(self) -> str:
        if self.kind is HeuristicKind.M_ESTIMATE:
            return f"{self.kind.value}(m={self.m:g})"
        return self.kind.value


@dc.dataclass(frozen=True)
class ConfusionCounts:
    """Weighted one-vs-rest confusion counts of a rule for its head class."""

    tp: float
    fp: float
    tn: float
    fn: float

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DatasetError(f"Confusion counts must be non-negative: {self}")

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.tn + self.fn


def confusion_counts(
    rule: Rule, data: Dataset, weights: Sequence[float] | np.ndarray
) -> ConfusionCounts:
    """Tally the weights of covered/uncovered x head/other instances."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (data.n_rows,):
        raise DatasetError(f"Expected {data.n_rows} weights, got {weights.size}")
    if np.any(weights < 0):
        raise DatasetError("Instance weights must be non-negative")
    needed = max((c.column for c in rule.body), default=-1) + 1
    if needed > data.n_columns:
        raise ArityMismatchError(needed, data.n_columns)

    covered = rule.mask(data.values)
    positive = data.labels == rule.head
    return ConfusionCounts(
        tp=float(weights[covered & positive].sum()),
        fp=float(weights[covered & ~positive].sum()),
        tn=float(weights[~covered & ~positive].sum()),
        fn=float(weights[~covered & positive].sum()),
    )


def evaluate_many(
    h: Heuristic,
    tp: np.ndarray,
    fp: np.ndarray,
    fn: np.ndarray,
    head_prior: np.ndarray | float,
) -> np.ndarray:
    """Heuristic values for arrays of counts; 0/0 follows the conventions of ``evaluate``."""
    tp, fp, fn = (np.asarray(a, dtype=np.float64) for a in (tp, fp, fn))
    prior = np.broadcast_to(np.asarray(head_prior, dtype=np.float64), tp.shape)
    match h.kind:
        case HeuristicKind.PRECISION:
            numerator, denominator, fallback = tp, tp + fp, np.zeros_like(tp)
        case HeuristicKind.RECALL:
            numerator, denominator, fallback = tp, tp + fn, np.zeros_like(tp)
        case HeuristicKind.M_ESTIMATE:
            numerator, denominator, fallback = tp + h.m * prior, tp + fp + h.m, prior.copy()
    return np.divide(numerator, denominator, out=fallback, where=denominator > 0)


def evaluate(h: Heuristic, c: ConfusionCounts, head_prior: float) -> float:
    """Map confusion counts to a value in [0, 1].

    precision = tp / (tp + fp), recall = tp / (tp + fn), both 0 when undefined;
    m-estimate = (tp + m * prior) / (tp + fp + m), the prior when undefined.
    """
    return float(
        evaluate_many(h, np.array([c.tp]), np.array([c.fp]), np.array([c.fn]), head_prior)[0]
    )


def rule_counts(
    ruleset: RuleSet, coverage: CoverageMatrix, labels: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(tp, fp, tn, fn) arrays for every rule of ``coverage``'s rows."""
    if coverage.n_rules != ruleset.d:
        raise SelectionError("Coverage matrix must span the whole rule set")
    sums = coverage.class_weight_sums(labels, weights, ruleset.n_classes)
    class_totals = np.bincount(labels, weights=weights, minlength=ruleset.n_classes)
    return counts_from_class_sums(ruleset.heads, sums, class_totals)


def counts_from_class_sums(
    heads: np.ndarray, sums: np.ndarray, class_totals: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(tp, fp, tn, fn) from per-rule covered weight per class.

    Args:
        heads: Head class of every rule
        sums: (rules x classes) covered weight per class
        class_totals: Total weight per class over all instances
    """
    rows = np.arange(heads.size)
    tp = sums[rows, heads]
    other = sums.copy()
    other[rows, heads] = 0.0
    fp = other.sum(axis=1)
    fn = np.maximum(class_totals[heads] - tp, 0.0)
    tn = np.maximum(class_totals.sum() - class_totals[heads] - fp, 0.0)
    return tp, fp, tn, fn


def score_rules(
    h: Heuristic,
    ruleset: RuleSet,
    coverage: CoverageMatrix,
    labels: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Heuristic value of every rule under the given instance weights.

    The m-estimate prior of each rule is the training prior of its head class.
    """
    tp, fp, _, fn = rule_counts(ruleset, coverage, labels, weights)
    return evaluate_many(h, tp, fp, fn, ruleset.class_priors[ruleset.heads])
