"""Main entry point for forest-rules."""

import argparse
import sys
from pathlib import Path

from forest_rules import __version__
from forest_rules.artifacts import (
    load_forest,
    load_subset,
    save_evaluation,
    save_experiment,
    save_forest,
    save_rectangles,
    save_rules,
    save_subset,
    save_subset_text,
    write_curves_csv,
)
from forest_rules.config import RunConfig, get_config, parse_name_list
from forest_rules.dataset import generate_synthetic, load_csv, write_csv
from forest_rules.errors import ConfigurationError, ForestRulesError
from forest_rules.evaluation import (
    ExperimentConfig,
    baseline_accuracy,
    evaluate_subset,
    grid_coverage_fraction,
    grid_votes,
    rule_rectangles,
    run_experiment,
)
from forest_rules.forest import train_forest
from forest_rules.heuristics import Heuristic
from forest_rules.logger import get_log_dir_path, get_logger, setup_logging
from forest_rules.rules import extract_rules, ruleset_to_text
from forest_rules.selection import SelectionConfig, parse_strategy, select

logger = get_logger(__name__)

DEFAULT_SYNTHETIC_RULES = 30


def artifact_path(base: Path, suffix: str) -> Path:
    """``base`` with ``suffix``, replacing a known artifact extension."""
    if base.suffix in (".json", ".csv", ".txt"):
        base = base.with_suffix("")
    return base.with_name(base.name + suffix)


def _single(value: str) -> tuple[str, ...]:
    return (value,)


_FLAG_NAMES = {"forest_path": "--forest", "subset_path": "--subset", "n_rules": "--n"}


def _require(config: RunConfig, *names: str) -> None:
    missing = [name for name in names if getattr(config, name) is None]
    if missing:
        flags = ", ".join(_FLAG_NAMES.get(name, "--" + name) for name in missing)
        raise ConfigurationError(f"Missing required option(s): {flags}")


def _heuristic(config: RunConfig) -> Heuristic:
    return Heuristic.parse(config.heuristic, config.m)


def cmd_train(config: RunConfig) -> None:
    """Train a forest on a CSV and write it as JSON."""
    _require(config, "input", "output")
    data = load_csv(config.input, config.label_column)
    forest = train_forest(
        data, config.trees, config.seed, config.n_candidate_features, n_jobs=config.threads
    )
    save_forest(forest, artifact_path(config.output, ".json"))
    d = sum(tree.n_leaves for tree in forest.trees)
    print(f"Trained {forest.n_trees} trees with {d} rules")
    print(f"Training accuracy: {baseline_accuracy(forest, data):.4f}")


def cmd_extract(config: RunConfig) -> None:
    """Write the rules of a saved forest as JSON and text."""
    _require(config, "forest_path", "output")
    ruleset = extract_rules(load_forest(config.forest_path))
    save_rules(ruleset, artifact_path(config.output, ".json"))
    text_path = artifact_path(config.output, ".txt")
    text_path.write_text(ruleset_to_text(ruleset), encoding="utf-8")
    print(f"Extracted {ruleset.d} rules from {ruleset.source_n_trees} trees")


def cmd_select(config: RunConfig) -> None:
    """Select a rule subset of a saved forest on its training CSV."""
    _require(config, "forest_path", "input", "output", "n_rules")
    forest = load_forest(config.forest_path)
    data = load_csv(config.input, config.label_column, schema=forest.schema)
    ruleset = extract_rules(forest)
    selection = SelectionConfig(
        strategy=parse_strategy(config.strategy),
        heuristic=_heuristic(config),
        n=config.n_rules,
        seed=config.seed,
        min_weight=config.min_weight,
    )
    subset = select(selection, forest, ruleset, data)
    save_subset(subset, artifact_path(config.output, ".json"), ruleset.d)
    save_subset_text(ruleset, subset, artifact_path(config.output, ".txt"))
    print(f"Selected {len(subset)} of {ruleset.d} rules ({selection.strategy.value})")


def cmd_evaluate(config: RunConfig) -> None:
    """Accuracy and uncovered fraction of a saved subset on a test CSV."""
    _require(config, "forest_path", "subset_path", "input")
    forest = load_forest(config.forest_path)
    ruleset = extract_rules(forest)
    subset = load_subset(config.subset_path)
    test = load_csv(config.input, config.label_column, schema=forest.schema)
    evaluation = evaluate_subset(ruleset, subset, test, config.uncovered_mode)
    if config.output is not None:
        save_evaluation(evaluation, artifact_path(config.output, ".json"))
    print(f"Rules: {evaluation.n_rules}")
    print(f"Accuracy: {evaluation.accuracy:.4f} ({evaluation.mode.value})")
    print(f"Uncovered fraction: {evaluation.uncovered_fraction:.4f}")


def cmd_experiment(config: RunConfig) -> None:
    """Cross-validated accuracy curves as CSV and JSON."""
    _require(config, "input", "output")
    data = load_csv(config.input, config.label_column)
    experiment = ExperimentConfig(
        n_folds=config.folds,
        n_trees=config.trees,
        strategies=tuple(parse_strategy(s) for s in config.strategies),
        heuristics=tuple(Heuristic.parse(h, config.m) for h in config.heuristics),
        n_max=config.n_max,
        seed=config.seed,
        min_weight=config.min_weight,
        mode=config.uncovered_mode,
        n_candidate_features=config.n_candidate_features,
    )
    result = run_experiment(data, experiment, n_jobs=config.threads)
    write_curves_csv(result, artifact_path(config.output, ".csv"), config.stride)
    save_experiment(result, artifact_path(config.output, ".json"))

    print(f"Baseline accuracy: {result.baseline_accuracy:.4f} (n_max={result.n_max})")
    for key, reached in result.milestones().items():
        first = reached["baseline"]
        print(f"  {key}: reaches baseline at n={first if first is not None else '-'}")


def cmd_synthesize(config: RunConfig) -> None:
    """Write the two-line synthetic dataset and, with --strategy, selected rule rectangles."""
    _require(config, "output")
    data = generate_synthetic(config.n_red, config.n_blue, config.noise_sd, config.seed)
    write_csv(data, artifact_path(config.output, ".csv"))
    print(f"Wrote {data.n_rows} synthetic rows ({config.n_red} red, {config.n_blue} blue)")
    if not config.strategy_given:
        return

    forest = train_forest(
        data, config.trees, config.seed, config.n_candidate_features, n_jobs=config.threads
    )
    ruleset = extract_rules(forest)
    selection = SelectionConfig(
        strategy=parse_strategy(config.strategy),
        heuristic=_heuristic(config),
        n=config.n_rules or DEFAULT_SYNTHETIC_RULES,
        seed=config.seed,
        min_weight=config.min_weight,
    )
    subset = select(selection, forest, ruleset, data)
    votes = grid_votes(ruleset, subset, config.grid_resolution)
    coverage = grid_coverage_fraction(ruleset, subset, config.grid_resolution)
    save_rectangles(
        rule_rectangles(ruleset, subset),
        artifact_path(config.output, ".rectangles.json"),
        data.schema,
        votes,
        coverage,
        selection,
    )
    print(f"Selected {len(subset)} rules covering {coverage:.1%} of the grid")


COMMANDS = {
    "train": cmd_train,
    "extract": cmd_extract,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "synthesize": cmd_synthesize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forest-rules",
        description="Random forest rule extraction and rule subset selection",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  forest-rules train --input data.csv --output forest.json
  forest-rules select --forest forest.json --input data.csv --strategy weighted-covering \\
      --heuristic recall --n 20 --output subset
  forest-rules experiment --input breast-cancer.csv --output curves
  forest-rules synthesize --output synthetic --strategy weighted-covering
        """.strip(),
    )
    parser.add_argument("--version", action="version", version=f"forest-rules v{__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="run seed (default 0)")
    common.add_argument("--threads", type=int, help="worker processes, -1 for all cores")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--log-dir", help="directory for a rotating log file")

    forest_flags = argparse.ArgumentParser(add_help=False)
    forest_flags.add_argument("--trees", type=int, help="trees per forest (default 100)")
    forest_flags.add_argument("--features", type=int, help="candidate columns per node")

    selection_flags = argparse.ArgumentParser(add_help=False)
    selection_flags.add_argument(
        "--heuristic", dest="heuristics", type=_single, default=("m-estimate",),
        help="precision, recall or m-estimate (default m-estimate)",
    )
    selection_flags.add_argument("--m", type=float, help="m of the m-estimate (default 22.466)")
    selection_flags.add_argument("--n", dest="n_rules", type=int, help="number of rules")
    selection_flags.add_argument("--min-weight", type=float, help="floor of covering weights")

    subparsers = parser.add_subparsers(dest="command", required=True)

    train = subparsers.add_parser("train", parents=[common, forest_flags], help="train a forest")
    train.add_argument("--input", type=Path, help="training CSV")
    train.add_argument("--label-column", help="class column (default: last)")
    train.add_argument("--output", type=Path, help="forest JSON")

    extract = subparsers.add_parser("extract", parents=[common], help="extract rules")
    extract.add_argument("--forest", type=Path, help="forest JSON")
    extract.add_argument("--output", type=Path, help="output base for .json and .txt")

    select_cmd = subparsers.add_parser(
        "select", parents=[common, selection_flags], help="select a rule subset"
    )
    select_cmd.add_argument("--forest", type=Path, help="forest JSON")
    select_cmd.add_argument("--input", type=Path, help="training CSV")
    select_cmd.add_argument("--label-column", help="class column (default: from forest)")
    select_cmd.add_argument(
        "--strategy", dest="strategies", type=_single, required=True,
        help="best, weighted-covering or random-trees",
    )
    select_cmd.add_argument("--output", type=Path, help="output base for .json and .txt")

    evaluate = subparsers.add_parser("evaluate", parents=[common], help="evaluate a subset")
    evaluate.add_argument("--forest", type=Path, help="forest JSON the subset stems from")
    evaluate.add_argument("--subset", type=Path, help="subset JSON")
    evaluate.add_argument("--input", type=Path, help="test CSV")
    evaluate.add_argument("--label-column", help="class column (default: from forest)")
    evaluate.add_argument("--uncovered", help="default-class or error")
    evaluate.add_argument("--output", type=Path, help="optional evaluation JSON")

    experiment = subparsers.add_parser(
        "experiment", parents=[common, forest_flags], help="cross-validated accuracy curves"
    )
    experiment.add_argument("--input", type=Path, help="dataset CSV")
    experiment.add_argument("--label-column", help="class column (default: last)")
    experiment.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    experiment.add_argument(
        "--strategies", type=parse_name_list, help="comma-separated (default: all three)"
    )
    experiment.add_argument(
        "--heuristics", type=parse_name_list, help="comma-separated (default: all three)"
    )
    experiment.add_argument("--m", type=float, help="m of the m-estimate (default 22.466)")
    experiment.add_argument("--n-max", type=int, help="longest curve (default: smallest d)")
    experiment.add_argument("--min-weight", type=float, help="floor of covering weights")
    experiment.add_argument("--stride", type=int, help="keep every stride-th n in the CSV")
    experiment.add_argument("--uncovered", help="default-class or error")
    experiment.add_argument("--output", type=Path, help="output base for .csv and .json")

    synthesize = subparsers.add_parser(
        "synthesize", parents=[common, forest_flags, selection_flags], help="synthetic data"
    )
    synthesize.add_argument("--n-red", type=int, help="red points (default 800)")
    synthesize.add_argument("--n-blue", type=int, help="blue points (default 200)")
    synthesize.add_argument("--noise-sd", type=float, help="perpendicular noise (default 0.05)")
    synthesize.add_argument(
        "--strategy", dest="strategies", type=_single,
        help="select rules with this strategy and dump their rectangles",
    )
    synthesize.add_argument("--grid-resolution", type=int, help="grid cells per axis (default 100)")
    synthesize.add_argument("--output", type=Path, help="output base for .csv and .rectangles.json")

    return parser


def main(argv: list[str] | None = None) -> None:
    """Main entry point for the application."""

    # argparse exits with status 2 on usage errors
    args = build_parser().parse_args(argv)

    try:
        setup_logging()
        config = get_config(**vars(args))
        config.validate()
        setup_logging(config.get_log_level(), get_log_dir_path(config.log_dir))

        logger.info(f"Starting forest-rules v{__version__}")
        logger.info(f"Configuration: {config}")
        COMMANDS[config.command](config)

    except KeyboardInterrupt:
        print("error: interrupted by user", file=sys.stderr)
        sys.exit(130)
    except (ForestRulesError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        # Global exception handler - catch any unhandled exceptions
        logger.critical(f"Unhandled exception in main: {e}", exc_info=True)
        print(f"error: unexpected failure: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
