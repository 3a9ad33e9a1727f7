"""Tabular classification data: CSV ingestion, cross-validation folds, bagging
samples and the two-line synthetic dataset."""

import dataclasses as dc
import math
from collections.abc import Sequence
from enum import StrEnum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ArityMismatchError, DatasetError
from .logger import get_logger
from .seeding import STREAM_FOLDS, STREAM_SYNTHETIC, derive_rng

logger = get_logger(__name__)

# A row of feature values: reals for numeric columns, category indices otherwise.
Instance = np.ndarray

SYNTHETIC_LINE_OFFSET = 0.2
SYNTHETIC_CLASS_NAMES = ("red", "blue")
SYNTHETIC_COLUMNS = ("x", "y")


class ColumnKind(StrEnum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dc.dataclass(frozen=True)
class Column:
    """A feature column; categorical columns record their category names."""

    name: str
    kind: ColumnKind
    categories: tuple[str, ...] = ()

    @property
    def cardinality(self) -> int:
        return len(self.categories)

    @property
    def is_numeric(self) -> bool:
        return self.kind is ColumnKind.NUMERIC


@dc.dataclass(frozen=True)
class DatasetSchema:
    """Encoding of a training dataset, used to load further CSVs consistently."""

    columns: tuple[Column, ...]
    class_names: tuple[str, ...]
    label_name: str


@dc.dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix, class labels and per-instance weights.

    ``values`` holds one row per instance; categorical cells store the category
    index as a float. All arrays are read-only copies.
    """

    columns: tuple[Column, ...]
    values: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    weights: np.ndarray
    label_name: str = "class"

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        weights = np.array(self.weights, dtype=np.float64)
        for array in (values, labels, weights):
            array.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        self._validate()

    def _validate(self) -> None:
        if self.values.ndim != 2:  # noqa: PLR2004
            raise DatasetError("Feature matrix must be two-dimensional")
        n_rows, n_columns = self.values.shape
        if n_rows == 0:
            raise DatasetError("Dataset must contain at least one row")
        if n_columns != len(self.columns) or n_columns == 0:
            raise DatasetError(
                f"Feature matrix has {n_columns} columns, schema lists {len(self.columns)}"
            )
        if self.labels.shape != (n_rows,) or self.weights.shape != (n_rows,):
            raise DatasetError("Rows, labels and weights must have equal length")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise DatasetError("Class label outside the range of class names")
        if not np.all(np.isfinite(self.weights)) or self.weights.min() < 0:
            raise DatasetError("Instance weights must be finite and non-negative")
        for j, column in enumerate(self.columns):
            cells = self.values[:, j]
            if not np.all(np.isfinite(cells)):
                raise DatasetError(f"Column '{column.name}' contains non-finite values")
            if column.is_numeric:
                continue
            if np.any(cells != np.floor(cells)) or cells.min() < 0:
                raise DatasetError(f"Column '{column.name}' has invalid category indices")
            if cells.max() >= column.cardinality:
                raise DatasetError(
                    f"Column '{column.name}' has a category index beyond its "
                    f"{column.cardinality} categories"
                )

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_columns(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def schema(self) -> DatasetSchema:
        return DatasetSchema(self.columns, self.class_names, self.label_name)

    def subset(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        """Rows at ``indices`` (repeats allowed), weights copied along."""
        idx = np.asarray(indices, dtype=np.int64)
        return dc.replace(
            self, values=self.values[idx], labels=self.labels[idx], weights=self.weights[idx]
        )

    def with_weights(self, weights: Sequence[float] | np.ndarray) -> "Dataset":
        return dc.replace(self, weights=np.asarray(weights, dtype=np.float64))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def class_priors(self) -> np.ndarray:
        """Unweighted class frequencies."""
        return self.class_counts() / self.n_rows


@dc.dataclass(frozen=True, eq=False)
class FoldSplit:
    train: Dataset
    test: Dataset
    fold_index: int
    train_indices: np.ndarray
    test_indices: np.ndarray


def check_arity(instance: Sequence[float] | np.ndarray, n_columns: int) -> Instance:
    """Return ``instance`` as a float vector, rejecting a wrong width."""
    values = np.asarray(instance, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] != n_columns:
        raise ArityMismatchError(n_columns, int(values.size))
    return values


def _read_cells(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise DatasetError(f"Data file not found: {path}")
    try:
        # Header read as an ordinary row so every line is held to the header width
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as e:
        raise DatasetError(f"Data file is empty: {path}") from e
    except pd.errors.ParserError as e:
        raise DatasetError(f"Ragged rows in {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DatasetError(f"Data file is not valid UTF-8: {path}") from e

    # Short rows are padded with NaN even with na_filter off; empty cells stay ""
    short_rows = raw.isna().any(axis=1).to_numpy()
    if short_rows.any():
        row = int(np.flatnonzero(short_rows)[0])
        raise DatasetError(
            f"Ragged row at line {row + 1} of {path}: expected {raw.shape[1]} fields"
        )
    if len(raw) < 2:  # noqa: PLR2004
        raise DatasetError(f"Data file has a header but no rows: {path}")

    header = [str(name).strip() for name in raw.iloc[0]]
    duplicates = sorted({name for name in header if header.count(name) > 1})
    if duplicates:
        raise DatasetError(f"Duplicate column names in {path}: {', '.join(duplicates)}")

    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = header
    frame = frame.apply(lambda col: col.str.strip())
    empty = (frame == "").to_numpy()
    if empty.any():
        row, col = (int(v) for v in np.argwhere(empty)[0])
        raise DatasetError(
            f"Missing value at line {row + 2}, column '{frame.columns[col]}' of {path}"
        )
    return frame


def _to_float(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return math.nan


def _cells_to_float(cells: pd.Series) -> np.ndarray:
    """Cells as correctly rounded floats; NaN where a cell is not a number."""
    return np.fromiter((_to_float(c) for c in cells), dtype=np.float64, count=len(cells))


def _parse_numeric(cells: pd.Series) -> np.ndarray | None:
    parsed = _cells_to_float(cells)
    if not np.all(np.isfinite(parsed)):
        return None
    return parsed


def _encode_categories(
    cells: pd.Series, known: tuple[str, ...] = ()
) -> tuple[np.ndarray, tuple[str, ...]]:
    categories = list(known)
    index = {name: i for i, name in enumerate(categories)}
    for value in pd.unique(cells):
        if value not in index:
            index[value] = len(categories)
            categories.append(value)
    codes = cells.map(index).to_numpy(dtype=np.float64)
    return codes, tuple(categories)


def load_csv(
    path: str | Path,
    label_column: str | None = None,
    schema: DatasetSchema | None = None,
) -> Dataset:
    """Load a comma-separated file with a header row.

    Without a schema, a column is numeric when every cell parses as a finite
    real and categorical otherwise; classes and categories are numbered in order
    of first appearance. With a schema, cells are encoded against it.

    Args:
        path: CSV file
        label_column: Name of the class column; the last column by default, or
            the schema's label column when a schema is given
        schema: Encoding of the training data this file must match

    Returns:
        Dataset with unit weights

    Raises:
        DatasetError: Missing file, ragged rows, empty cells, unknown columns,
            or (without a schema) fewer than two classes
    """
    path = Path(path)
    frame = _read_cells(path)

    if label_column is None:
        label_column = schema.label_name if schema is not None else str(frame.columns[-1])
    if label_column not in frame.columns:
        raise DatasetError(f"Label column '{label_column}' not found in {path}")

    if schema is None:
        columns, values = _infer_columns(frame, label_column, path)
        labels, class_names = _encode_categories(frame[label_column])
        if len(class_names) < 2:  # noqa: PLR2004
            raise DatasetError(f"Data in {path} has a single class '{class_names[0]}'")
    else:
        columns, values = _encode_with_schema(frame, schema, path)
        class_index = {name: i for i, name in enumerate(schema.class_names)}
        unknown = sorted(set(frame[label_column]) - set(class_index))
        if unknown:
            raise DatasetError(f"Unknown class labels in {path}: {', '.join(unknown)}")
        labels = frame[label_column].map(class_index).to_numpy()
        class_names = schema.class_names

    data = Dataset(
        columns=columns,
        values=values,
        labels=labels,
        class_names=class_names,
        weights=np.ones(len(frame)),
        label_name=label_column,
    )
    logger.info(
        f"Loaded {path.name}: {data.n_rows} rows, {data.n_columns} features, "
        f"{data.n_classes} classes"
    )
    return data


def _infer_columns(
    frame: pd.DataFrame, label_column: str, path: Path
) -> tuple[tuple[Column, ...], np.ndarray]:
    feature_names = [str(name) for name in frame.columns if name != label_column]
    if not feature_names:
        raise DatasetError(f"No feature columns in {path}")

    columns = []
    matrix = np.empty((len(frame), len(feature_names)))
    for j, name in enumerate(feature_names):
        numeric = _parse_numeric(frame[name])
        if numeric is not None:
            columns.append(Column(name, ColumnKind.NUMERIC))
            matrix[:, j] = numeric
        else:
            codes, categories = _encode_categories(frame[name])
            columns.append(Column(name, ColumnKind.CATEGORICAL, categories))
            matrix[:, j] = codes
    return tuple(columns), matrix


def _encode_with_schema(
    frame: pd.DataFrame, schema: DatasetSchema, path: Path
) -> tuple[tuple[Column, ...], np.ndarray]:
    missing = [c.name for c in schema.columns if c.name not in frame.columns]
    if missing:
        raise DatasetError(f"Columns missing from {path}: {', '.join(missing)}")

    columns = []
    matrix = np.empty((len(frame), len(schema.columns)))
    for j, column in enumerate(schema.columns):
        cells = frame[column.name]
        if column.is_numeric:
            numeric = _parse_numeric(cells)
            if numeric is None:
                bad = int(np.flatnonzero(~np.isfinite(_cells_to_float(cells)))[0])
                raise DatasetError(
                    f"Non-numeric value at line {bad + 2}, column '{column.name}' of {path}"
                )
            columns.append(column)
            matrix[:, j] = numeric
            continue
        codes, categories = _encode_categories(cells, column.categories)
        if len(categories) > column.cardinality:
            unseen = ", ".join(categories[column.cardinality :])
            logger.warning(f"Column '{column.name}' in {path} has unseen categories: {unseen}")
        columns.append(dc.replace(column, categories=categories))
        matrix[:, j] = codes
    return tuple(columns), matrix


def write_csv(data: Dataset, path: str | Path) -> None:
    """Write ``data`` as CSV readable by ``load_csv`` (label column last)."""
    frame = pd.DataFrame(
        {
            column.name: (
                data.values[:, j]
                if column.is_numeric
                else [column.categories[int(v)] for v in data.values[:, j]]
            )
            for j, column in enumerate(data.columns)
        }
    )
    frame[data.label_name] = [data.class_names[c] for c in data.labels]
    frame.to_csv(Path(path), index=False, lineterminator="\n", encoding="utf-8")


def stratified_kfold(data: Dataset, k: int, seed: int) -> list[FoldSplit]:
    """Split ``data`` into ``k`` stratified cross-validation folds.

    Rows of each class are shuffled and dealt round-robin over the folds, so
    each fold holds within one instance of its exact share of every class and
    fold sizes differ by at most one. Falls back to plain shuffled folds (with a
    warning) when some class has fewer than ``k`` members.

    Raises:
        DatasetError: k < 2 or k > number of rows
    """
    if k < 2:  # noqa: PLR2004
        raise DatasetError(f"Need at least 2 folds, got {k}")
    if k > data.n_rows:
        raise DatasetError(f"Cannot split {data.n_rows} rows into {k} folds")

    rng = derive_rng(seed, STREAM_FOLDS)
    counts = data.class_counts()
    present = counts[counts > 0]
    if np.any(present < k):
        logger.warning(
            f"Smallest class has {int(present.min())} members, fewer than {k} folds; "
            "using unstratified folds"
        )
        order = rng.permutation(data.n_rows)
    else:
        order = np.concatenate(
            [
                rng.permutation(np.flatnonzero(data.labels == c))
                for c in range(data.n_classes)
                if counts[c] > 0
            ]
        )

    fold_of = np.empty(data.n_rows, dtype=np.int64)
    fold_of[order] = np.arange(data.n_rows) % k

    splits = []
    for fold in range(k):
        test_indices = np.flatnonzero(fold_of == fold)
        train_indices = np.flatnonzero(fold_of != fold)
        splits.append(
            FoldSplit(
                train=data.subset(train_indices),
                test=data.subset(test_indices),
                fold_index=fold,
                train_indices=train_indices,
                test_indices=test_indices,
            )
        )
    return splits


def bootstrap_sample(data: Dataset, rng: np.random.Generator) -> Dataset:
    """Draw ``n_rows`` rows uniformly with replacement, ignoring weights."""
    return data.subset(rng.integers(0, data.n_rows, size=data.n_rows))


def generate_synthetic(n_red: int, n_blue: int, noise_sd: float, seed: int) -> Dataset:
    """Two classes scattered around parallel lines on either side of ``y = x``.

    Red points lie around ``y = x - 0.2`` and blue points around ``y = x + 0.2``,
    each drawn uniformly along the part of its line inside the unit square and
    displaced perpendicular to it by Gaussian noise, then clipped to [0, 1]².
    The separating boundary is the oblique line ``y = x``.
    """
    if n_red < 1 or n_blue < 1:
        raise DatasetError(f"Need at least one point per class, got {n_red}/{n_blue}")
    if noise_sd < 0 or not math.isfinite(noise_sd):
        raise DatasetError(f"Noise standard deviation must be >= 0, got {noise_sd}")

    rng = derive_rng(seed, STREAM_SYNTHETIC)

    def points_along(count: int, intercept: float) -> np.ndarray:
        x = rng.uniform(max(0.0, -intercept), min(1.0, 1.0 - intercept), size=count)
        offset = rng.normal(0.0, noise_sd, size=count) / math.sqrt(2.0)
        return np.clip(np.column_stack([x - offset, x + intercept + offset]), 0.0, 1.0)

    values = np.vstack(
        [points_along(n_red, -SYNTHETIC_LINE_OFFSET), points_along(n_blue, SYNTHETIC_LINE_OFFSET)]
    )
    labels = np.concatenate([np.zeros(n_red, dtype=np.int64), np.ones(n_blue, dtype=np.int64)])
    return Dataset(
        columns=tuple(Column(name, ColumnKind.NUMERIC) for name in SYNTHETIC_COLUMNS),
        values=values,
        labels=labels,
        class_names=SYNTHETIC_CLASS_NAMES,
        weights=np.ones(n_red + n_blue),
        label_name="color",
    )
