"""Random forest induction: bagged, feature-subsampled, unpruned CART trees."""

import dataclasses as dc
import functools
import math
from collections.abc import Sequence
from enum import StrEnum

import numpy as np
from joblib import Parallel, delayed

from .dataset import Dataset, DatasetSchema, Instance, bootstrap_sample, check_arity
from .errors import TrainingError
from .logger import get_logger
from .seeding import STREAM_TREE, derive_rng

logger = get_logger(__name__)

# Gains at or below this are treated as "no useful split".
MIN_IMPURITY_DECREASE = 1e-12


class SplitKind(StrEnum):
    NUMERIC_LE = "numeric_le"
    CATEGORICAL_EQ = "categorical_eq"


@dc.dataclass(frozen=True)
class SplitCondition:
    """Node test; instances satisfying it go to the left child."""

    column: int
    kind: SplitKind
    value: float

    def __post_init__(self) -> None:
        if self.column < 0:
            raise TrainingError(f"Invalid split column {self.column}")
        if not math.isfinite(self.value):
            raise TrainingError(f"Split value must be finite, got {self.value}")

    def holds(self, instance: Instance) -> bool:
        if self.kind is SplitKind.NUMERIC_LE:
            return bool(instance[self.column] <= self.value)
        return bool(instance[self.column] == self.value)

    def mask(self, values: np.ndarray) -> np.ndarray:
        cells = values[:, self.column]
        if self.kind is SplitKind.NUMERIC_LE:
            return cells <= self.value
        return cells == self.value


@dc.dataclass(frozen=True)
class InternalNode:
    condition: SplitCondition
    left: int
    right: int


@dc.dataclass(frozen=True)
class LeafNode:
    label: int


TreeNode = InternalNode | LeafNode


@dc.dataclass(frozen=True, eq=False)
class DecisionTree:
    """Binary tree stored as an arena of nodes addressed by id."""

    nodes: tuple[TreeNode, ...]
    root: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        seen: set[int] = set()
        stack = [self.root]
        while stack:
            node_id = stack.pop()
            if not 0 <= node_id < len(self.nodes):
                raise TrainingError(f"Node id {node_id} outside the tree arena")
            if node_id in seen:
                raise TrainingError(f"Node {node_id} is reachable more than once")
            seen.add(node_id)
            node = self.nodes[node_id]
            if isinstance(node, InternalNode):
                stack.extend((node.right, node.left))
        if len(seen) != len(self.nodes):
            raise TrainingError("Tree arena contains unreachable nodes")

    @functools.cached_property
    def leaf_labels(self) -> np.ndarray:
        """Class per node id; -1 for internal nodes."""
        return np.array(
            [node.label if isinstance(node, LeafNode) else -1 for node in self.nodes],
            dtype=np.int64,
        )

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.leaf_labels >= 0))

    def leaf_ids(self) -> list[int]:
        """Leaf node ids in depth-first, left-before-right order."""
        leaves = []
        stack = [self.root]
        while stack:
            node = self.nodes[stack[-1]]
            node_id = stack.pop()
            if isinstance(node, InternalNode):
                stack.extend((node.right, node.left))
            else:
                leaves.append(node_id)
        return leaves

    def route(self, instance: Instance) -> int:
        node_id = self.root
        node = self.nodes[node_id]
        while isinstance(node, InternalNode):
            node_id = node.left if node.condition.holds(instance) else node.right
            node = self.nodes[node_id]
        return node_id

    def predict(self, instance: Instance) -> int:
        return int(self.leaf_labels[self.route(instance)])

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Leaf node id for every row of ``values``."""
        leaves = np.empty(values.shape[0], dtype=np.int64)
        stack = [(self.root, np.arange(values.shape[0]))]
        while stack:
            node_id, rows = stack.pop()
            if rows.size == 0:
                continue
            node = self.nodes[node_id]
            if isinstance(node, LeafNode):
                leaves[rows] = node_id
                continue
            goes_left = node.condition.mask(values[rows])
            stack.append((node.left, rows[goes_left]))
            stack.append((node.right, rows[~goes_left]))
        return leaves


@dc.dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[DecisionTree, ...]
    n_trees: int
    class_priors: np.ndarray
    majority_class: int
    seed: int
    n_candidate_features: int
    schema: DatasetSchema

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees", tuple(self.trees))
        priors = np.array(self.class_priors, dtype=np.float64)
        priors.setflags(write=False)
        object.__setattr__(self, "class_priors", priors)
        if self.n_trees < 1 or len(self.trees) != self.n_trees:
            raise TrainingError(f"Forest lists {len(self.trees)} trees, expected {self.n_trees}")
        if priors.shape != (len(self.schema.class_names),) or abs(priors.sum() - 1.0) > 1e-9:
            raise TrainingError("Class priors must hold one frequency per class and sum to 1")
        if self.majority_class != int(np.argmax(priors)):
            raise TrainingError("Majority class must be the class with the highest prior")

    @property
    def n_columns(self) -> int:
        return len(self.schema.columns)

    @property
    def n_classes(self) -> int:
        return len(self.schema.class_names)


def resolve_vote(scores: np.ndarray, class_priors: np.ndarray) -> int:
    """Index of the highest score; ties go to the higher prior, then the lower id."""
    best = np.flatnonzero(scores == scores.max())
    if best.size == 1:
        return int(best[0])
    return int(best[np.argmax(class_priors[best])])


def resolve_votes(scores: np.ndarray, class_priors: np.ndarray) -> np.ndarray:
    """Row-wise ``resolve_vote`` for a (rows x classes) score matrix."""
    preference = np.lexsort((np.arange(len(class_priors)), -np.asarray(class_priors)))
    return preference[np.argmax(scores[:, preference], axis=1)]


def _gini(class_weights: np.ndarray) -> np.ndarray:
    """Gini impurity of each row of class weights (0 for empty rows)."""
    totals = class_weights.sum(axis=-1, keepdims=True)
    shares = np.divide(
        class_weights, totals, out=np.zeros_like(class_weights), where=totals > 0
    )
    return 1.0 - np.square(shares).sum(axis=-1)


def _children_impurity(left: np.ndarray, parent: np.ndarray) -> np.ndarray:
    right = parent - left
    total = parent.sum()
    return (left.sum(axis=-1) * _gini(left) + right.sum(axis=-1) * _gini(right)) / total


def _best_numeric_split(
    cells: np.ndarray, labels: np.ndarray, weights: np.ndarray, parent: np.ndarray
) -> tuple[float, float] | None:
    order = np.argsort(cells, kind="stable")
    sorted_cells = cells[order]
    boundaries = np.flatnonzero(sorted_cells[1:] > sorted_cells[:-1])
    if boundaries.size == 0:
        return None
    one_hot = np.zeros((cells.size, parent.size))
    one_hot[np.arange(cells.size), labels[order]] = weights[order]
    left = np.cumsum(one_hot, axis=0)[boundaries]
    decrease = _gini(parent) - _children_impurity(left, parent)
    best = int(np.argmax(decrease))
    lower, upper = sorted_cells[boundaries[best]], sorted_cells[boundaries[best] + 1]
    threshold = (lower + upper) / 2.0
    if threshold >= upper:
        # adjacent floats: the midpoint rounds up onto the upper value
        threshold = lower
    return float(threshold), float(decrease[best])


def _best_categorical_split(
    cells: np.ndarray, labels: np.ndarray, weights: np.ndarray, parent: np.ndarray
) -> tuple[float, float] | None:
    codes = cells.astype(np.int64)
    present = np.unique(codes)
    if present.size < 2:  # noqa: PLR2004
        return None
    n_classes = parent.size
    per_category = np.bincount(
        codes * n_classes + labels, weights=weights, minlength=(codes.max() + 1) * n_classes
    ).reshape(-1, n_classes)[present]
    decrease = _gini(parent) - _children_impurity(per_category, parent)
    best = int(np.argmax(decrease))
    return float(present[best]), float(decrease[best])


def _find_best_split(
    values: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    n_classes: int,
    numeric_columns: np.ndarray,
    candidate_columns: Sequence[int],
) -> tuple[SplitCondition, float] | None:
    parent = np.bincount(labels, weights=weights, minlength=n_classes)
    if parent.sum() <= 0:
        return None
    best: tuple[SplitCondition, float] | None = None
    for column in candidate_columns:
        if numeric_columns[column]:
            found = _best_numeric_split(values[:, column], labels, weights, parent)
            kind = SplitKind.NUMERIC_LE
        else:
            found = _best_categorical_split(values[:, column], labels, weights, parent)
            kind = SplitKind.CATEGORICAL_EQ
        if found is None:
            continue
        value, decrease = found
        if decrease > MIN_IMPURITY_DECREASE and (best is None or decrease > best[1]):
            best = (SplitCondition(int(column), kind, value), decrease)
    return best


def _numeric_mask(data: Dataset) -> np.ndarray:
    return np.array([column.is_numeric for column in data.columns])


def best_split(
    data: Dataset, candidate_columns: Sequence[int]
) -> tuple[SplitCondition, float] | None:
    """Condition with the largest weighted Gini impurity decrease.

    Numeric columns are tested at midpoints between consecutive distinct
    values, categorical columns by one-vs-rest equality. Ties keep the earliest
    candidate column and the lowest threshold.

    Returns:
        The condition and its impurity decrease, or None when no candidate
        split decreases impurity
    """
    if data.n_rows < 2:  # noqa: PLR2004
        return None
    return _find_best_split(
        data.values,
        data.labels,
        data.weights,
        data.n_classes,
        _numeric_mask(data),
        candidate_columns,
    )


def train_tree(
    data: Dataset,
    n_candidate_features: int,
    rng: np.random.Generator,
    class_priors: np.ndarray | None = None,
) -> DecisionTree:
    """Grow an unpruned tree, drawing fresh candidate columns at every node.

    A node becomes a leaf when it is pure, holds fewer than two rows, or has no
    split that decreases impurity. Leaves predict their (weighted) majority
    class, ties going to the higher prior and then the lower class id.

    Args:
        data: Training rows
        n_candidate_features: Columns drawn per node
        rng: Stream used for the per-node column draws
        class_priors: Tie-break priors; the class frequencies of ``data`` by default
    """
    if not 1 <= n_candidate_features <= data.n_columns:
        raise TrainingError(
            f"Candidate features must be in [1, {data.n_columns}], got {n_candidate_features}"
        )
    priors = data.class_priors() if class_priors is None else np.asarray(class_priors)
    numeric_columns = _numeric_mask(data)

    nodes: list[TreeNode | None] = [None]
    stack = [(0, np.arange(data.n_rows))]
    while stack:
        node_id, rows = stack.pop()
        labels = data.labels[rows]
        weights = data.weights[rows]
        split = None
        if rows.size >= 2 and np.unique(labels).size > 1:  # noqa: PLR2004
            candidates = np.sort(
                rng.choice(data.n_columns, size=n_candidate_features, replace=False)
            )
            split = _find_best_split(
                data.values[rows], labels, weights, data.n_classes, numeric_columns, candidates
            )
        if split is None:
            class_weights = np.bincount(labels, weights=weights, minlength=data.n_classes)
            nodes[node_id] = LeafNode(resolve_vote(class_weights, priors))
            continue

        condition = split[0]
        goes_left = condition.mask(data.values[rows])
        left_id, right_id = len(nodes), len(nodes) + 1
        nodes.extend([None, None])
        nodes[node_id] = InternalNode(condition, left_id, right_id)
        stack.append((right_id, rows[~goes_left]))
        stack.append((left_id, rows[goes_left]))

    arena = [node for node in nodes if node is not None]
    if len(arena) != len(nodes):
        raise TrainingError("Tree growth left unfilled nodes")
    return DecisionTree(tuple(arena))


def default_candidate_features(n_columns: int) -> int:
    return math.ceil(math.sqrt(n_columns))


def _fit_tree(
    data: Dataset, n_candidate_features: int, seed: int, index: int, priors: np.ndarray
) -> DecisionTree:
    rng = derive_rng(seed, STREAM_TREE, index)
    sample = bootstrap_sample(data, rng)
    return train_tree(sample, n_candidate_features, rng, priors)


def train_forest(
    data: Dataset,
    n_trees: int,
    seed: int,
    n_candidate_features: int | None = None,
    n_jobs: int = 1,
) -> Forest:
    """Train ``n_trees`` trees, each on its own bootstrap sample.

    Tree ``t`` draws its sample and its per-node columns from the stream
    ``(seed, "tree", t)``, so the forest does not depend on ``n_jobs``.
    """
    if n_trees < 1:
        raise TrainingError(f"Forest needs at least one tree, got {n_trees}")
    if n_candidate_features is None:
        n_candidate_features = default_candidate_features(data.n_columns)

    priors = data.class_priors()
    trees = Parallel(n_jobs=n_jobs)(
        delayed(_fit_tree)(data, n_candidate_features, seed, t, priors) for t in range(n_trees)
    )
    forest = Forest(
        trees=tuple(trees),
        n_trees=n_trees,
        class_priors=priors,
        majority_class=int(np.argmax(priors)),
        seed=seed,
        n_candidate_features=n_candidate_features,
        schema=data.schema,
    )
    logger.info(
        f"Trained {n_trees} trees with {sum(t.n_leaves for t in forest.trees)} leaves "
        f"({n_candidate_features} candidate features per node)"
    )
    return forest


def forest_votes(forest: Forest, values: np.ndarray) -> np.ndarray:
    """Per-class tree votes for every row of ``values``."""
    votes = np.zeros((values.shape[0], forest.n_classes), dtype=np.int64)
    rows = np.arange(values.shape[0])
    for tree in forest.trees:
        np.add.at(votes, (rows, tree.leaf_labels[tree.apply(values)]), 1)
    return votes


def predict_forest(forest: Forest, instance: Instance) -> int:
    """Majority vote of the trees for one instance."""
    instance = check_arity(instance, forest.n_columns)
    votes = np.bincount(
        [tree.predict(instance) for tree in forest.trees], minlength=forest.n_classes
    )
    return resolve_vote(votes, forest.class_priors)


def predict_forest_many(forest: Forest, values: np.ndarray) -> np.ndarray:
    return resolve_votes(forest_votes(forest, values), forest.class_priors)
