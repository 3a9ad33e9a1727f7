"""Configuration management for forest-rules runs."""

import logging
import os
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

from dotenv import load_dotenv

from .errors import ConfigurationError
from .evaluation import UncoveredMode
from .heuristics import DEFAULT_M, HeuristicKind
from .selection import Strategy

T = TypeVar("T")

ENV_FILE_VARIABLE = "FOREST_RULES_ENV_FILE"
DEFAULT_HEURISTICS = ("precision", "recall", "m-estimate")
DEFAULT_STRATEGIES = ("best", "weighted-covering", "random-trees")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def _resolve(flag: T | None, env_name: str | None, default: T, cast: Callable[[str], T]) -> T:
    """Explicit flag, else environment variable, else default."""
    if flag is not None:
        return flag
    if env_name:
        raw = os.getenv(env_name)
        if raw is not None and raw.strip():
            try:
                return cast(raw.strip())
            except ValueError:
                raise ConfigurationError(f"Invalid value for {env_name}: {raw!r}")
    return default


class RunConfig:
    """Parameters of one CLI invocation."""

    def __init__(self, env_file_path: Path | None = None, **flags: Any) -> None:
        """Initialize configuration.

        Args:
            env_file_path: Settings file loaded into the environment first, if any
            **flags: Values given on the command line; None means "not given"
        """
        if env_file_path is not None:
            load_dotenv(str(env_file_path), override=True)

        def flag(name: str) -> Any:
            return flags.get(name)

        self.command: str | None = flag("command")

        # Files
        self.input: Path | None = flag("input")
        self.output: Path | None = flag("output")
        self.forest_path: Path | None = flag("forest")
        self.subset_path: Path | None = flag("subset")
        self.label_column: str | None = flag("label_column")

        # Forest and experiment
        self.trees: int = _resolve(flag("trees"), "FOREST_RULES_TREES", 100, int)
        self.folds: int = _resolve(flag("folds"), "FOREST_RULES_FOLDS", 10, int)
        self.seed: int = _resolve(flag("seed"), "FOREST_RULES_SEED", 0, int)
        self.n_candidate_features: int | None = flag("features")
        self.threads: int = _resolve(flag("threads"), "FOREST_RULES_THREADS", 1, int)

        # Selection
        self.heuristics: tuple[str, ...] = tuple(
            h.strip().lower() for h in (flag("heuristics") or DEFAULT_HEURISTICS)
        )
        self.strategies: tuple[str, ...] = tuple(
            s.strip().lower() for s in (flag("strategies") or DEFAULT_STRATEGIES)
        )
        self.strategy_given: bool = flag("strategies") is not None
        self.m: float = _resolve(flag("m"), "FOREST_RULES_M", DEFAULT_M, float)
        self.n_rules: int | None = flag("n_rules")
        self.n_max: int | None = flag("n_max")
        self.min_weight: float = _resolve(flag("min_weight"), "FOREST_RULES_MIN_WEIGHT", 0.0, float)

        # Output
        self.stride: int = _resolve(flag("stride"), "FOREST_RULES_STRIDE", 1, int)
        self.uncovered: str = _resolve(
            flag("uncovered"), "FOREST_RULES_UNCOVERED", UncoveredMode.DEFAULT_CLASS.value, str
        ).lower()

        # Synthetic data
        self.n_red: int = _resolve(flag("n_red"), None, 800, int)
        self.n_blue: int = _resolve(flag("n_blue"), None, 200, int)
        self.noise_sd: float = _resolve(flag("noise_sd"), None, 0.05, float)
        self.grid_resolution: int = _resolve(flag("grid_resolution"), None, 100, int)

        # Logging
        self.log_level: str = _resolve(flag("log_level"), "LOG_LEVEL", "INFO", str).upper()
        self.log_dir: str | None = _resolve(flag("log_dir"), "LOG_DIR", None, str)

    @property
    def heuristic(self) -> str:
        """The heuristic used by single-selection commands."""
        return self.heuristics[0]

    @property
    def strategy(self) -> str:
        """The strategy used by single-selection commands."""
        return self.strategies[0]

    @property
    def uncovered_mode(self) -> UncoveredMode:
        return UncoveredMode(self.uncovered)

    def validate(self) -> None:
        """Validate configuration settings.

        Raises:
            ConfigurationError: listing every violated constraint
        """
        errors = []

        if self.trees < 1:
            errors.append(f"trees must be at least 1, got {self.trees}")
        if self.folds < 2:  # noqa: PLR2004
            errors.append(f"folds must be at least 2, got {self.folds}")
        if self.seed < 0:
            errors.append(f"seed must be non-negative, got {self.seed}")
        if self.m < 0:
            errors.append(f"m must be non-negative, got {self.m}")
        if not 0.0 <= self.min_weight <= 1.0:
            errors.append(f"min_weight must be in [0, 1], got {self.min_weight}")
        if self.stride < 1:
            errors.append(f"stride must be at least 1, got {self.stride}")
        if self.threads == 0:
            errors.append("threads must not be 0 (use -1 for all cores)")
        if self.n_rules is not None and self.n_rules < 1:
            errors.append(f"n_rules must be at least 1, got {self.n_rules}")
        if self.n_max is not None and self.n_max < 1:
            errors.append(f"n_max must be at least 1, got {self.n_max}")
        if self.n_candidate_features is not None and self.n_candidate_features < 1:
            errors.append(f"features must be at least 1, got {self.n_candidate_features}")

        known_heuristics = {k.value for k in HeuristicKind}
        errors.extend(
            f"Invalid heuristic: {h}" for h in self.heuristics if h not in known_heuristics
        )
        known_strategies = {s.value for s in Strategy}
        errors.extend(
            f"Invalid strategy: {s}" for s in self.strategies if s not in known_strategies
        )
        if self.uncovered not in {mode.value for mode in UncoveredMode}:
            errors.append(f"Invalid uncovered mode: {self.uncovered}")
        if self.log_level not in LOG_LEVELS:
            errors.append(f"Invalid LOG_LEVEL: {self.log_level}")

        if self.n_red < 1 or self.n_blue < 1:
            errors.append(f"n_red and n_blue must be at least 1, got {self.n_red}/{self.n_blue}")
        if self.noise_sd < 0:
            errors.append(f"noise_sd must be non-negative, got {self.noise_sd}")
        if self.grid_resolution < 1:
            errors.append(f"grid_resolution must be at least 1, got {self.grid_resolution}")

        if errors:
            raise ConfigurationError(f"Configuration errors: {', '.join(errors)}")

    def get_log_level(self, fallback_lvl: int = logging.INFO) -> int:
        """Get the logging level as an integer."""
        return getattr(logging, self.log_level, fallback_lvl)

    def __str__(self) -> str:
        return (
            f"RunConfig("
            f"command={self.command}, "
            f"input={self.input}, "
            f"output={self.output}, "
            f"trees={self.trees}, "
            f"folds={self.folds}, "
            f"seed={self.seed}, "
            f"heuristics={','.join(self.heuristics)}, "
            f"m={self.m:g}, "
            f"strategies={','.join(self.strategies)}, "
            f"n_rules={self.n_rules}, "
            f"min_weight={self.min_weight:g}, "
            f"stride={self.stride}, "
            f"uncovered={self.uncovered}, "
            f"threads={self.threads}, "
            f"log_level={self.log_level}"
            f")"
        )


def get_settings_env_file_path() -> Path | None:
    """Get the path to the settings .env file.

    The file named by ``FOREST_RULES_ENV_FILE`` wins; otherwise ``.env`` in
    the current directory is used when present.

    Returns:
        Path to the settings file, or None when there is none

    Raises:
        ConfigurationError: the path names a directory, or the explicitly
            named file does not exist
    """
    explicit = os.getenv(ENV_FILE_VARIABLE)
    settings_file_p = Path(explicit).expanduser() if explicit else Path(".env")

    if settings_file_p.is_dir():
        raise ConfigurationError(f"Expected file but found directory: {settings_file_p}")
    if settings_file_p.exists():
        return settings_file_p
    if explicit:
        raise ConfigurationError(f"Settings file not found: {settings_file_p}")
    return None


def get_config(**flags: Any) -> RunConfig:
    """Factory function creating the run configuration.

    Args:
        **flags: Parsed command-line values; None means "not given"

    Returns:
        RunConfig instance
    """
    return RunConfig(get_settings_env_file_path(), **flags)


def parse_name_list(raw: str) -> tuple[str, ...]:
    """Comma-separated CLI list, e.g. ``best,weighted-covering``."""
    return tuple(name.strip().lower() for name in raw.split(",") if name.strip())
