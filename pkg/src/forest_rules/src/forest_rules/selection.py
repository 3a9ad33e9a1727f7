"""Selection of small rule subsets: best-n, weighted covering and random trees."""

import dataclasses as dc
from enum import StrEnum

import numpy as np

from .dataset import Dataset
from .errors import SelectionError
from .forest import Forest
from .heuristics import Heuristic, counts_from_class_sums, evaluate_many, score_rules
from .logger import get_logger
from .rules import CoverageMatrix, RuleSet, coverage_matrix
from .seeding import STREAM_RANDOM_TREES, derive_rng

logger = get_logger(__name__)


class Strategy(StrEnum):
    BEST_N = "best"
    WEIGHTED_COVERING = "weighted-covering"
    RANDOM_TREES = "random-trees"


@dc.dataclass(frozen=True)
class SelectionConfig:
    strategy: Strategy
    heuristic: Heuristic
    n: int
    seed: int = 0
    min_weight: float = 0.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise SelectionError(f"Number of rules must be at least 1, got {self.n}")
        if not 0.0 <= self.min_weight <= 1.0:
            raise SelectionError(f"Minimum weight must be in [0, 1], got {self.min_weight}")


@dc.dataclass(frozen=True)
class RuleSubset:
    """Ordered rule indices into a RuleSet with their scores at selection time.

    Random-trees subsets consult no heuristic and carry no scores.
    """

    selected: tuple[int, ...]
    scores: tuple[float, ...]
    config: SelectionConfig

    def __post_init__(self) -> None:
        object.__setattr__(self, "selected", tuple(int(i) for i in self.selected))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if len(set(self.selected)) != len(self.selected):
            raise SelectionError("Selected rule indices must be distinct")
        if self.scores and len(self.scores) != len(self.selected):
            raise SelectionError("Need one score per selected rule")

    def __len__(self) -> int:
        return len(self.selected)

    def prefix(self, n: int) -> "RuleSubset":
        return dc.replace(self, selected=self.selected[:n], scores=self.scores[:n])


def _clamp(n: int, d: int) -> int:
    if n < 1:
        raise SelectionError(f"Number of rules must be at least 1, got {n}")
    if n > d:
        logger.warning(f"Requested {n} rules but only {d} exist; selecting all {d}")
        return d
    return n


def _rank(candidates: np.ndarray, scores: np.ndarray, body_lengths: np.ndarray) -> np.ndarray:
    """Candidates by score (desc), then body length (asc), then index (asc)."""
    return candidates[
        np.lexsort((candidates, body_lengths[candidates], -scores[candidates]))
    ]


def select_best_n(
    ruleset: RuleSet,
    data: Dataset,
    h: Heuristic,
    n: int,
    coverage: CoverageMatrix | None = None,
) -> RuleSubset:
    """The ``n`` best rules by ``h`` on unit-weighted ``data``.

    Ties are broken by shorter body, then lower rule index.
    """
    config = SelectionConfig(Strategy.BEST_N, h, n)
    n = _clamp(n, ruleset.d)
    if coverage is None:
        coverage = coverage_matrix(ruleset, data)
    scores = score_rules(h, ruleset, coverage, data.labels, np.ones(data.n_rows))
    order = _rank(np.arange(ruleset.d), scores, ruleset.body_lengths)[:n]
    return RuleSubset(tuple(order), tuple(scores[order]), config)


def select_weighted_covering(
    ruleset: RuleSet,
    data: Dataset,
    h: Heuristic,
    n: int,
    min_weight: float = 0.0,
    coverage: CoverageMatrix | None = None,
) -> RuleSubset:
    """Greedy selection that halves the weights of covered instances.

    All instance weights start at 1. Each round rescores every unselected
    rule under the current weights, takes the best (ties as in
    ``select_best_n``) and halves the weight of every instance it covers, never
    below ``min_weight``. The m-estimate prior stays the training prior.
    """
    config = SelectionConfig(Strategy.WEIGHTED_COVERING, h, n, min_weight=min_weight)
    n = _clamp(n, ruleset.d)
    if coverage is None:
        coverage = coverage_matrix(ruleset, data)

    weights = np.ones(data.n_rows)
    per_class = np.zeros((data.n_rows, ruleset.n_classes))
    per_class[np.arange(data.n_rows), data.labels] = weights
    # Covered weight per (rule, class). Rows of rules sharing an instance with
    # the last pick are recomputed, so they match a rescan from scratch.
    # TODO: evaluate the heuristic only for those rows too.
    sums = np.asarray(coverage.matrix @ per_class)
    by_instance = coverage.matrix.tocsc()
    head_priors = ruleset.class_priors[ruleset.heads]

    available = np.ones(ruleset.d, dtype=bool)
    selected: list[int] = []
    scores: list[float] = []
    for round_index in range(n):
        class_totals = np.bincount(data.labels, weights=weights, minlength=ruleset.n_classes)
        tp, fp, _, fn = counts_from_class_sums(ruleset.heads, sums, class_totals)
        values = evaluate_many(h, tp, fp, fn, head_priors)

        best_value = values[available].max()
        tied = np.flatnonzero(available & (values == best_value))
        best = int(_rank(tied, values, ruleset.body_lengths)[0]) if tied.size > 1 else int(tied[0])
        selected.append(best)
        scores.append(float(values[best]))
        available[best] = False

        covered = coverage.covered(best)
        weights[covered] = np.maximum(weights[covered] * 0.5, min_weight)
        per_class[covered, data.labels[covered]] = weights[covered]
        touched = np.unique(by_instance[:, covered].indices)
        sums[touched] = np.asarray(coverage.matrix[touched] @ per_class)
        logger.debug(
            f"Round {round_index + 1}: rule {best} ({values[best]:.4f}), "
            f"covered {covered.size} instances"
        )

    return RuleSubset(tuple(selected), tuple(scores), config)


def random_trees_order(forest: Forest, ruleset: RuleSet, seed: int) -> list[np.ndarray]:
    """Rule blocks of the trees in a seeded uniformly random tree order."""
    if forest.n_trees != ruleset.source_n_trees:
        raise SelectionError(
            f"Rule set stems from {ruleset.source_n_trees} trees, forest has {forest.n_trees}"
        )
    permutation = derive_rng(seed, STREAM_RANDOM_TREES).permutation(forest.n_trees)
    blocks = ruleset.tree_blocks()
    return [blocks[t] for t in permutation]


def whole_tree_prefix(blocks: list[np.ndarray], max_rules: int) -> np.ndarray:
    """Concatenate blocks while the total stays within ``max_rules``."""
    taken = []
    total = 0
    for block in blocks:
        if total + block.size > max_rules:
            break
        taken.append(block)
        total += block.size
    return np.concatenate(taken) if taken else np.empty(0, dtype=np.int64)


def select_random_trees(
    forest: Forest,
    ruleset: RuleSet,
    max_rules: int,
    seed: int,
    h: Heuristic | None = None,
) -> RuleSubset:
    """All rules of randomly chosen trees, one whole tree at a time.

    Stops before the next tree would exceed ``max_rules``; when even the first
    tree is larger, the subset is empty.
    """
    if max_rules < 1:
        raise SelectionError(f"Rule budget must be at least 1, got {max_rules}")
    config = SelectionConfig(
        Strategy.RANDOM_TREES, h or Heuristic.parse("precision"), max_rules, seed=seed
    )
    selected = whole_tree_prefix(random_trees_order(forest, ruleset, seed), max_rules)
    if selected.size == 0:
        logger.warning(f"No whole tree fits into a budget of {max_rules} rules")
    return RuleSubset(tuple(selected), (), config)


def select(
    config: SelectionConfig,
    forest: Forest,
    ruleset: RuleSet,
    data: Dataset,
    coverage: CoverageMatrix | None = None,
) -> RuleSubset:
    """Run the strategy named by ``config``."""
    match config.strategy:
        case Strategy.BEST_N:
            return select_best_n(ruleset, data, config.heuristic, config.n, coverage)
        case Strategy.WEIGHTED_COVERING:
            return select_weighted_covering(
                ruleset, data, config.heuristic, config.n, config.min_weight, coverage
            )
        case Strategy.RANDOM_TREES:
            return select_random_trees(forest, ruleset, config.n, config.seed, config.heuristic)
    raise SelectionError(f"Unknown strategy {config.strategy}")


def parse_strategy(name: str) -> Strategy:
    try:
        return Strategy(name.strip().lower())
    except ValueError:
        choices = ", ".join(s.value for s in Strategy)
        raise SelectionError(f"Unknown strategy '{name}' (choose from {choices})")

