"""Conversion of forest trees into propositional rules and coverage queries."""

import dataclasses as dc
import functools
import math
from collections.abc import Sequence
from enum import StrEnum

import numpy as np
from scipy import sparse

from .dataset import Dataset, DatasetSchema, Instance, check_arity
from .errors import ArityMismatchError, RuleError
from .forest import Forest, InternalNode, SplitCondition, SplitKind
from .logger import get_logger

logger = get_logger(__name__)


class Relation(StrEnum):
    LE = "le"
    GT = "gt"
    EQ = "eq"
    NE = "ne"

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    @property
    def is_numeric(self) -> bool:
        return self in (Relation.LE, Relation.GT)


_SYMBOLS = {Relation.LE: "≤", Relation.GT: ">", Relation.EQ: "=", Relation.NE: "≠"}
_NEGATION = {
    Relation.LE: Relation.GT,
    Relation.GT: Relation.LE,
    Relation.EQ: Relation.NE,
    Relation.NE: Relation.EQ,
}


@dc.dataclass(frozen=True)
class Condition:
    """``column <relation> value``; value is a threshold or a category index."""

    column: int
    relation: Relation
    value: float

    def __post_init__(self) -> None:
        if self.column < 0 or not math.isfinite(self.value):
            raise RuleError(f"Invalid condition on column {self.column} with value {self.value}")

    def holds(self, instance: Instance) -> bool:
        return bool(self.mask(np.asarray(instance)[np.newaxis, :])[0])

    def mask(self, values: np.ndarray) -> np.ndarray:
        cells = values[:, self.column]
        match self.relation:
            case Relation.LE:
                return cells <= self.value
            case Relation.GT:
                return cells > self.value
            case Relation.EQ:
                return cells == self.value
            case Relation.NE:
                return cells != self.value

    def negated(self) -> "Condition":
        return Condition(self.column, _NEGATION[self.relation], self.value)

    @classmethod
    def from_split(cls, split: SplitCondition, took_left: bool) -> "Condition":
        relation = Relation.LE if split.kind is SplitKind.NUMERIC_LE else Relation.EQ
        condition = cls(split.column, relation, split.value)
        return condition if took_left else condition.negated()


@dc.dataclass(frozen=True)
class Rule:
    """``head <- body``: predicts ``head`` for every instance satisfying all of ``body``."""

    body: tuple[Condition, ...]
    head: int
    origin: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "origin", tuple(self.origin))
        if not self.is_satisfiable():
            raise RuleError(f"Rule from tree {self.origin[0]} has a contradictory body")

    @property
    def length(self) -> int:
        return len(self.body)

    def is_satisfiable(self) -> bool:
        lower: dict[int, float] = {}
        upper: dict[int, float] = {}
        equal: dict[int, float] = {}
        excluded: dict[int, set[float]] = {}
        for condition in self.body:
            column, value = condition.column, condition.value
            match condition.relation:
                case Relation.LE:
                    upper[column] = min(upper.get(column, math.inf), value)
                case Relation.GT:
                    lower[column] = max(lower.get(column, -math.inf), value)
                case Relation.EQ:
                    if equal.setdefault(column, value) != value:
                        return False
                case Relation.NE:
                    excluded.setdefault(column, set()).add(value)
        if any(lower[c] >= upper[c] for c in lower.keys() & upper.keys()):
            return False
        return all(value not in excluded.get(c, ()) for c, value in equal.items())

    def mask(self, values: np.ndarray) -> np.ndarray:
        covered = np.ones(values.shape[0], dtype=bool)
        for condition in self.body:
            covered &= condition.mask(values)
        return covered


def merge_conditions(path: Sequence[Condition]) -> tuple[Condition, ...]:
    """Collapse repeated numeric bounds on one column into the tightest one.

    ``x ≤ 5`` followed by ``x ≤ 3`` becomes ``x ≤ 3``; ``x > 1`` followed by
    ``x > 2`` becomes ``x > 2``. Each merged bound keeps the position of its
    first occurrence; categorical conditions are kept as they are.
    """
    merged: list[Condition] = []
    position: dict[tuple[int, Relation], int] = {}
    for condition in path:
        if condition.relation.is_numeric:
            key = (condition.column, condition.relation)
            if key in position:
                previous = merged[position[key]]
                tighten = min if condition.relation is Relation.LE else max
                merged[position[key]] = dc.replace(
                    previous, value=tighten(previous.value, condition.value)
                )
                continue
            position[key] = len(merged)
        merged.append(condition)
    return tuple(merged)


@dc.dataclass(frozen=True, eq=False)
class RuleSet:
    rules: tuple[Rule, ...]
    source_n_trees: int
    class_priors: np.ndarray
    majority_class: int
    schema: DatasetSchema

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        priors = np.array(self.class_priors, dtype=np.float64)
        priors.setflags(write=False)
        object.__setattr__(self, "class_priors", priors)
        n_classes = len(self.schema.class_names)
        for rule in self.rules:
            if not 0 <= rule.head < n_classes:
                raise RuleError(f"Rule head {rule.head} is not a valid class")
            if not 0 <= rule.origin[0] < self.source_n_trees:
                raise RuleError(f"Rule origin tree {rule.origin[0]} outside the forest")
            if any(c.column >= len(self.schema.columns) for c in rule.body):
                raise RuleError("Rule condition refers to an unknown column")

    @property
    def d(self) -> int:
        return len(self.rules)

    @property
    def n_columns(self) -> int:
        return len(self.schema.columns)

    @property
    def n_classes(self) -> int:
        return len(self.schema.class_names)

    @functools.cached_property
    def heads(self) -> np.ndarray:
        return np.array([rule.head for rule in self.rules], dtype=np.int64)

    @functools.cached_property
    def body_lengths(self) -> np.ndarray:
        return np.array([rule.length for rule in self.rules], dtype=np.int64)

    def tree_blocks(self) -> list[np.ndarray]:
        """Rule indices of each source tree, in tree order."""
        trees = np.array([rule.origin[0] for rule in self.rules], dtype=np.int64)
        return [np.flatnonzero(trees == t) for t in range(self.source_n_trees)]


def extract_rules(forest: Forest) -> RuleSet:
    """One rule per leaf: the conditions along the root-to-leaf path.

    Rules are ordered by tree, then by depth-first (left-first) leaf order.
    """
    rules = []
    for tree_index, tree in enumerate(forest.trees):
        stack: list[tuple[int, tuple[Condition, ...]]] = [(tree.root, ())]
        while stack:
            node_id, path = stack.pop()
            node = tree.nodes[node_id]
            if isinstance(node, InternalNode):
                stack.append((node.right, (*path, Condition.from_split(node.condition, False))))
                stack.append((node.left, (*path, Condition.from_split(node.condition, True))))
                continue
            rules.append(Rule(merge_conditions(path), node.label, (tree_index, node_id)))

    expected = sum(tree.n_leaves for tree in forest.trees)
    if len(rules) != expected:
        raise RuleError(f"Extracted {len(rules)} rules from {expected} leaves")
    logger.info(f"Extracted {len(rules)} rules from {forest.n_trees} trees")
    return RuleSet(
        rules=tuple(rules),
        source_n_trees=forest.n_trees,
        class_priors=forest.class_priors,
        majority_class=forest.majority_class,
        schema=forest.schema,
    )


def covers(rule: Rule, instance: Instance, n_columns: int) -> bool:
    """True iff every body condition holds; an empty body covers everything.

    Raises:
        ArityMismatchError: ``instance`` is not ``n_columns`` wide
    """
    instance = check_arity(instance, n_columns)
    return all(condition.holds(instance) for condition in rule.body)


@dc.dataclass(frozen=True, eq=False)
class CoverageMatrix:
    """Sparse (rules x instances) indicator of which rule covers which instance."""

    matrix: sparse.csr_matrix

    @property
    def n_rules(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_instances(self) -> int:
        return int(self.matrix.shape[1])

    def covered(self, rule: int) -> np.ndarray:
        """Sorted indices of the instances covered by rule ``rule``."""
        start, stop = self.matrix.indptr[rule], self.matrix.indptr[rule + 1]
        return self.matrix.indices[start:stop]

    def instance_counts(self, rules: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
        """Number of (selected) rules covering each instance."""
        matrix = self.matrix if rules is None else self.matrix[np.asarray(rules, dtype=np.int64)]
        return np.asarray(matrix.sum(axis=0)).ravel().astype(np.int64)

    def class_weight_sums(
        self, labels: np.ndarray, weights: np.ndarray, n_classes: int
    ) -> np.ndarray:
        """(rules x classes) total weight of covered instances per class."""
        per_class = np.zeros((self.n_instances, n_classes))
        per_class[np.arange(self.n_instances), labels] = weights
        return np.asarray(self.matrix @ per_class)


def coverage_matrix(
    ruleset: RuleSet,
    data: Dataset,
    rule_indices: Sequence[int] | np.ndarray | None = None,
) -> CoverageMatrix:
    """Coverage of ``data`` by every rule (or by ``rule_indices`` only, in that order).

    Raises:
        ArityMismatchError: ``data`` has a different number of columns
    """
    if data.n_columns != ruleset.n_columns:
        raise ArityMismatchError(ruleset.n_columns, data.n_columns)
    indices = range(ruleset.d) if rule_indices is None else rule_indices

    # Sibling rules share most of their path, so condition masks are memoised.
    masks: dict[Condition, np.ndarray] = {}
    indptr = [0]
    covered_parts = []
    for r in indices:
        covered = np.ones(data.n_rows, dtype=bool)
        for condition in ruleset.rules[r].body:
            if condition not in masks:
                masks[condition] = condition.mask(data.values)
            covered &= masks[condition]
        hits = np.flatnonzero(covered)
        covered_parts.append(hits)
        indptr.append(indptr[-1] + hits.size)

    column_indices = np.concatenate(covered_parts) if covered_parts else np.empty(0, np.int64)
    matrix = sparse.csr_matrix(
        (np.ones(column_indices.size), column_indices, np.array(indptr)),
        shape=(len(indptr) - 1, data.n_rows),
    )
    return CoverageMatrix(matrix)


def rule_votes(
    ruleset: RuleSet, rule_indices: Sequence[int] | np.ndarray, values: np.ndarray
) -> np.ndarray:
    """(rows x classes) number of selected covering rules voting for each class."""
    votes = np.zeros((values.shape[0], ruleset.n_classes), dtype=np.int64)
    for r in rule_indices:
        rule = ruleset.rules[r]
        votes[rule.mask(values), rule.head] += 1
    return votes


def _format_value(condition: Condition, schema: DatasetSchema) -> str:
    column = schema.columns[condition.column]
    if column.is_numeric:
        return format(condition.value, ".10g")
    return column.categories[int(condition.value)]


def rule_to_text(rule: Rule, schema: DatasetSchema) -> str:
    """E.g. ``IF x3 ≤ 0.25 AND x7 = blue THEN class=recurrence``."""
    body = " AND ".join(
        f"{schema.columns[c.column].name} {c.relation.symbol} {_format_value(c, schema)}"
        for c in rule.body
    )
    return f"IF {body or 'TRUE'} THEN class={schema.class_names[rule.head]}"


def ruleset_to_text(ruleset: RuleSet, rule_indices: Sequence[int] | None = None) -> str:
    indices = range(ruleset.d) if rule_indices is None else rule_indices
    return "".join(rule_to_text(ruleset.rules[r], ruleset.schema) + "\n" for r in indices)
