"""Versioned JSON artifacts, the long-format curves CSV and rule text files.

Every JSON artifact is an object with ``format_version`` and ``kind`` keys.
Writers sort keys and omit timestamps so reruns produce identical bytes.
"""

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .dataset import Column, ColumnKind, DatasetSchema
from .errors import ArtifactFormatError, ConfigurationError
from .evaluation import (
    CurveKey,
    CurvePoint,
    ExperimentResult,
    RuleRectangle,
    SubsetEvaluation,
)
from .forest import DecisionTree, Forest, InternalNode, LeafNode, SplitCondition, SplitKind
from .heuristics import Heuristic, HeuristicKind
from .logger import get_logger
from .rules import Condition, Relation, Rule, RuleSet, ruleset_to_text
from .selection import RuleSubset, SelectionConfig, Strategy

logger = get_logger(__name__)

FORMAT_VERSION = 1
KIND_FOREST = "forest"
KIND_RULES = "rules"
KIND_SUBSET = "subset"
KIND_EXPERIMENT = "experiment"
KIND_EVALUATION = "evaluation"
KIND_RECTANGLES = "rectangles"

CURVES_COLUMNS = ("fold", "strategy", "heuristic", "n", "accuracy", "uncovered")
MEAN_FOLD = "mean"


def write_json(path: Path, kind: str, payload: dict[str, Any]) -> None:
    document = {"format_version": FORMAT_VERSION, "kind": kind, **payload}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    logger.info(f"Wrote {kind} artifact to {path}")


def read_json(path: Path, kind: str) -> dict[str, Any]:
    """Load a JSON artifact and check its kind and format version.

    Raises:
        ArtifactFormatError: malformed JSON, other kind or unsupported version
    """
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ArtifactFormatError(f"{path} is not valid JSON: {e}")
    if not isinstance(document, dict):
        raise ArtifactFormatError(f"{path} does not hold a JSON object")
    if document.get("format_version") != FORMAT_VERSION:
        raise ArtifactFormatError(
            f"{path} has unsupported format_version {document.get('format_version')!r}"
        )
    if document.get("kind") != kind:
        raise ArtifactFormatError(f"{path} holds a {document.get('kind')!r} artifact, expected {kind!r}")
    return document


def _decode(path: Path, kind: str, decoder: Callable[[dict[str, Any]], Any]) -> Any:
    document = read_json(path, kind)
    try:
        return decoder(document)
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactFormatError(f"{path} is not a well-formed {kind} artifact: {e}")


def schema_to_dict(schema: DatasetSchema) -> dict[str, Any]:
    return {
        "columns": [
            {"name": c.name, "kind": c.kind.value, "categories": list(c.categories)}
            for c in schema.columns
        ],
        "class_names": list(schema.class_names),
        "label_name": schema.label_name,
    }


def schema_from_dict(data: dict[str, Any]) -> DatasetSchema:
    return DatasetSchema(
        columns=tuple(
            Column(c["name"], ColumnKind(c["kind"]), tuple(c["categories"]))
            for c in data["columns"]
        ),
        class_names=tuple(data["class_names"]),
        label_name=data["label_name"],
    )


def _node_to_dict(node: InternalNode | LeafNode) -> dict[str, Any]:
    if isinstance(node, LeafNode):
        return {"label": node.label}
    return {
        "column": node.condition.column,
        "split": node.condition.kind.value,
        "value": node.condition.value,
        "left": node.left,
        "right": node.right,
    }


def _node_from_dict(data: dict[str, Any]) -> InternalNode | LeafNode:
    if "label" in data:
        return LeafNode(int(data["label"]))
    condition = SplitCondition(int(data["column"]), SplitKind(data["split"]), float(data["value"]))
    return InternalNode(condition, int(data["left"]), int(data["right"]))


def save_forest(forest: Forest, path: Path) -> None:
    write_json(
        path,
        KIND_FOREST,
        {
            "n_trees": forest.n_trees,
            "seed": forest.seed,
            "n_candidate_features": forest.n_candidate_features,
            "class_priors": forest.class_priors.tolist(),
            "majority_class": forest.majority_class,
            "schema": schema_to_dict(forest.schema),
            "trees": [
                {"root": tree.root, "nodes": [_node_to_dict(n) for n in tree.nodes]}
                for tree in forest.trees
            ],
        },
    )


def load_forest(path: Path) -> Forest:
    def decode(data: dict[str, Any]) -> Forest:
        trees = tuple(
            DecisionTree(tuple(_node_from_dict(n) for n in t["nodes"]), int(t["root"]))
            for t in data["trees"]
        )
        return Forest(
            trees=trees,
            n_trees=int(data["n_trees"]),
            class_priors=np.array(data["class_priors"], dtype=np.float64),
            majority_class=int(data["majority_class"]),
            seed=int(data["seed"]),
            n_candidate_features=int(data["n_candidate_features"]),
            schema=schema_from_dict(data["schema"]),
        )

    return _decode(path, KIND_FOREST, decode)


def save_rules(ruleset: RuleSet, path: Path) -> None:
    write_json(
        path,
        KIND_RULES,
        {
            "source_n_trees": ruleset.source_n_trees,
            "class_priors": ruleset.class_priors.tolist(),
            "majority_class": ruleset.majority_class,
            "schema": schema_to_dict(ruleset.schema),
            "rules": [
                {
                    "body": [
                        {"column": c.column, "relation": c.relation.value, "value": c.value}
                        for c in rule.body
                    ],
                    "head": rule.head,
                    "origin": list(rule.origin),
                }
                for rule in ruleset.rules
            ],
        },
    )


def load_rules(path: Path) -> RuleSet:
    def decode(data: dict[str, Any]) -> RuleSet:
        rules = tuple(
            Rule(
                body=tuple(
                    Condition(int(c["column"]), Relation(c["relation"]), float(c["value"]))
                    for c in r["body"]
                ),
                head=int(r["head"]),
                origin=(int(r["origin"][0]), int(r["origin"][1])),
            )
            for r in data["rules"]
        )
        return RuleSet(
            rules=rules,
            source_n_trees=int(data["source_n_trees"]),
            class_priors=np.array(data["class_priors"], dtype=np.float64),
            majority_class=int(data["majority_class"]),
            schema=schema_from_dict(data["schema"]),
        )

    return _decode(path, KIND_RULES, decode)


def _selection_to_dict(config: SelectionConfig) -> dict[str, Any]:
    return {
        "strategy": config.strategy.value,
        "heuristic": config.heuristic.kind.value,
        "m": config.heuristic.m,
        "n": config.n,
        "seed": config.seed,
        "min_weight": config.min_weight,
    }


def save_subset(subset: RuleSubset, path: Path, d: int) -> None:
    write_json(
        path,
        KIND_SUBSET,
        {
            "d": d,
            "selected": list(subset.selected),
            "scores": list(subset.scores),
            "config": _selection_to_dict(subset.config),
        },
    )


def load_subset(path: Path) -> RuleSubset:
    def decode(data: dict[str, Any]) -> RuleSubset:
        c = data["config"]
        config = SelectionConfig(
            strategy=Strategy(c["strategy"]),
            heuristic=Heuristic(HeuristicKind(c["heuristic"]), float(c["m"])),
            n=int(c["n"]),
            seed=int(c["seed"]),
            min_weight=float(c["min_weight"]),
        )
        return RuleSubset(tuple(data["selected"]), tuple(data["scores"]), config)

    return _decode(path, KIND_SUBSET, decode)


def save_subset_text(ruleset: RuleSet, subset: RuleSubset, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ruleset_to_text(ruleset, subset.selected), encoding="utf-8")


def save_evaluation(evaluation: SubsetEvaluation, path: Path) -> None:
    write_json(
        path,
        KIND_EVALUATION,
        {
            "n_rules": evaluation.n_rules,
            "n_instances": evaluation.n_instances,
            "accuracy": evaluation.accuracy,
            "uncovered_fraction": evaluation.uncovered_fraction,
            "uncovered_mode": evaluation.mode.value,
        },
    )


def _curve_to_list(curve: list[CurvePoint]) -> list[dict[str, Any]]:
    return [
        {"n": p.n_rules, "accuracy": p.accuracy, "uncovered": p.uncovered_fraction} for p in curve
    ]


def _curves_to_list(curves: dict[CurveKey, list[CurvePoint]]) -> list[dict[str, Any]]:
    return [
        {"strategy": key.strategy.value, "heuristic": key.heuristic, "points": _curve_to_list(curve)}
        for key, curve in curves.items()
    ]


def save_experiment(result: ExperimentResult, path: Path) -> None:
    config = result.config
    milestones = result.milestones()
    write_json(
        path,
        KIND_EXPERIMENT,
        {
            "config": {
                "n_folds": config.n_folds,
                "n_trees": config.n_trees,
                "strategies": [s.value for s in config.strategies],
                "heuristics": [h.kind.value for h in config.heuristics],
                "m": config.heuristics[0].m if config.heuristics else None,
                "seed": config.seed,
                "min_weight": config.min_weight,
                "n_candidate_features": config.n_candidate_features,
                "uncovered_mode": config.mode.value,
            },
            "n_max": result.n_max,
            "baseline_accuracy": result.baseline_accuracy,
            "milestones": [
                {"strategy": key.strategy.value, "heuristic": key.heuristic, **reached}
                for key, reached in milestones.items()
            ],
            "mean_curves": _curves_to_list(result.mean_curves),
            "folds": [
                {
                    "fold": fold.fold_index,
                    "n_train": fold.n_train,
                    "n_test": fold.n_test,
                    "d": fold.d,
                    "baseline_accuracy": fold.baseline_accuracy,
                    "curves": _curves_to_list(fold.curves),
                }
                for fold in result.folds
            ],
        },
    )


def curves_frame(result: ExperimentResult, stride: int = 1) -> pd.DataFrame:
    """Long-format curves: one row per (fold, strategy, heuristic, n).

    Keeps every ``stride``-th n plus the last one; fold ``mean`` holds the
    pointwise mean over folds.
    """
    if stride < 1:
        raise ConfigurationError(f"Stride must be at least 1, got {stride}")
    keep = {n for n in range(1, result.n_max + 1) if (n - 1) % stride == 0}
    keep.add(result.n_max)

    tables = [(str(fold.fold_index), fold.curves) for fold in result.folds]
    tables.append((MEAN_FOLD, result.mean_curves))
    rows = [
        (fold, key.strategy.value, key.heuristic, p.n_rules, p.accuracy, p.uncovered_fraction)
        for fold, curves in tables
        for key, curve in curves.items()
        for p in curve
        if p.n_rules in keep
    ]
    return pd.DataFrame(rows, columns=list(CURVES_COLUMNS))


def write_curves_csv(result: ExperimentResult, path: Path, stride: int = 1) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    curves_frame(result, stride).to_csv(
        path, index=False, lineterminator="\n", encoding="utf-8", float_format="%.10g"
    )
    logger.info(f"Wrote curves to {path}")


def save_rectangles(
    rectangles: list[RuleRectangle],
    path: Path,
    schema: DatasetSchema,
    grid_votes: np.ndarray,
    coverage_fraction: float,
    config: SelectionConfig,
) -> None:
    write_json(
        path,
        KIND_RECTANGLES,
        {
            "columns": [c.name for c in schema.columns],
            "class_names": list(schema.class_names),
            "selection": _selection_to_dict(config),
            "rectangles": [
                {
                    "rule": r.rule,
                    "head": schema.class_names[r.head],
                    "x": list(r.x),
                    "y": list(r.y),
                    "vote": r.vote,
                }
                for r in rectangles
            ],
            "grid": {
                "resolution": int(grid_votes.shape[0]),
                "coverage_fraction": coverage_fraction,
                "net_votes": grid_votes.tolist(),
            },
        },
    )
