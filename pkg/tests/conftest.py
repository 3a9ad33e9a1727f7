"""Global test configuration and fixtures."""

import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add the source directory and the shared test utilities to Python path
project_root = Path(__file__).parent.parent  # Go up to project root
sys.path.insert(0, str(project_root / "src" / "forest_rules" / "src"))
sys.path.insert(0, str(Path(__file__).parent))

# Import must be after path setup
from common_test_utils import make_mixed_dataset, make_numeric_dataset  # noqa: E402
from forest_rules.dataset import Column, ColumnKind, Dataset  # noqa: E402
from forest_rules.logger import setup_logging  # noqa: E402


@pytest.fixture(autouse=True, scope="session")
def setup_test_logging():
    """Set up logging for all tests automatically at session level."""
    setup_logging(logging.INFO)
    yield
    # Cleanup: Reset logging configuration after session
    logging.getLogger().handlers.clear()


@pytest.fixture(autouse=True)
def clean_test_environment(monkeypatch):
    """Clean up environment variables that might interfere with tests."""
    # Preserve current working directory
    original_cwd = os.getcwd()

    env_vars_to_clean = [
        "FOREST_RULES_ENV_FILE",
        "FOREST_RULES_TREES",
        "FOREST_RULES_FOLDS",
        "FOREST_RULES_SEED",
        "FOREST_RULES_M",
        "FOREST_RULES_THREADS",
        "FOREST_RULES_MIN_WEIGHT",
        "FOREST_RULES_STRIDE",
        "FOREST_RULES_UNCOVERED",
        "LOG_LEVEL",
        "LOG_DIR",
    ]
    for var in env_vars_to_clean:
        monkeypatch.delenv(var, raising=False)

    yield

    # Restore working directory
    os.chdir(original_cwd)


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Four rows, one numeric column, two classes."""
    return Dataset(
        columns=(Column("x", ColumnKind.NUMERIC),),
        values=np.array([[1.0], [2.0], [3.0], [4.0]]),
        labels=np.array([0, 0, 1, 1]),
        class_names=("neg", "pos"),
        weights=np.ones(4),
    )


@pytest.fixture
def numeric_dataset() -> Dataset:
    return make_numeric_dataset(60, 4, 2, seed=1)


@pytest.fixture
def mixed_dataset() -> Dataset:
    return make_mixed_dataset(80, seed=2)


@pytest.fixture
def toy_corpus() -> list[Dataset]:
    """Small datasets covering numeric, categorical and multi-class data."""
    return [
        make_numeric_dataset(40, 2, 2, seed=10),
        make_numeric_dataset(50, 3, 3, seed=11),
        make_numeric_dataset(30, 5, 2, seed=12),
        make_mixed_dataset(60, seed=13),
        make_mixed_dataset(45, seed=14),
    ]


@pytest.fixture
def csv_file(temp_dir) -> Path:
    """A small CSV with a numeric and a categorical feature."""
    path = temp_dir / "data.csv"
    rows = ["size,colour,label"]
    for i in range(30):
        colour = ("red", "green", "blue")[i % 3]
        label = "yes" if i % 3 == 0 or i > 20 else "no"  # noqa: PLR2004
        rows.append(f"{i * 0.5},{colour},{label}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path
