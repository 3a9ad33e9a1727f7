"""Unit tests for dataset loading, folds, bootstrap and synthetic data."""

import numpy as np
import pytest
from common_test_utils import BREAST_CANCER_CSV, make_mixed_dataset

from forest_rules.dataset import (
    Column,
    ColumnKind,
    Dataset,
    bootstrap_sample,
    check_arity,
    generate_synthetic,
    load_csv,
    stratified_kfold,
    write_csv,
)
from forest_rules.errors import ArityMismatchError, DatasetError

pytestmark = pytest.mark.unit


class TestLoadCsv:
    """Test CSV ingestion."""

    def test_infers_numeric_and_categorical_columns(self, csv_file):
        data = load_csv(csv_file)

        assert data.n_rows == 30
        assert [c.kind for c in data.columns] == [ColumnKind.NUMERIC, ColumnKind.CATEGORICAL]
        assert data.columns[1].categories == ("red", "green", "blue")
        assert data.class_names == ("yes", "no")
        assert data.label_name == "label"
        assert np.all(data.weights == 1.0)

    def test_numeric_values_are_parsed(self, csv_file):
        data = load_csv(csv_file)
        assert data.values[:3, 0].tolist() == [0.0, 0.5, 1.0]

    def test_label_column_can_be_chosen(self, temp_dir):
        path = temp_dir / "wisconsin.csv"
        path.write_text("diagnosis,radius,texture\nM,17.9,10.3\nB,13.5,14.3\nM,20.5,17.7\n")

        data = load_csv(path, label_column="diagnosis")

        assert data.class_names == ("M", "B")
        assert [c.name for c in data.columns] == ["radius", "texture"]

    def test_missing_file(self, temp_dir):
        with pytest.raises(DatasetError, match="not found"):
            load_csv(temp_dir / "missing.csv")

    def test_ragged_row_names_the_line(self, temp_dir):
        path = temp_dir / "ragged.csv"
        path.write_text("a,b,label\n1,2,x\n3,y\n5,6,y\n")

        with pytest.raises(DatasetError, match="line 3"):
            load_csv(path)

    @pytest.mark.parametrize(
        "text",
        [
            "x,label\n1,a,p\n2,b,q\n3,a,p\n",
            "a,label\n1,x,extra\n2,y\n3,x\n",
            "a,b,label\n1,x\n2,y\n",
        ],
        ids=["every-row-long", "long-first-row", "every-row-short"],
    )
    def test_rows_wider_or_narrower_than_header_are_ragged(self, temp_dir, text):
        path = temp_dir / "ragged.csv"
        path.write_text(text)

        with pytest.raises(DatasetError, match="Ragged"):
            load_csv(path)

    def test_duplicate_column_names(self, temp_dir):
        path = temp_dir / "dup.csv"
        path.write_text("a,a,label\n1,2,x\n3,4,y\n")

        with pytest.raises(DatasetError, match="Duplicate column names"):
            load_csv(path)

    def test_header_only(self, temp_dir):
        path = temp_dir / "header.csv"
        path.write_text("a,label\n")

        with pytest.raises(DatasetError, match="no rows"):
            load_csv(path)

    def test_empty_cell_names_line_and_column(self, temp_dir):
        path = temp_dir / "empty.csv"
        path.write_text("a,b,label\n1,2,x\n3,,y\n")

        with pytest.raises(DatasetError, match="line 3, column 'b'"):
            load_csv(path)

    def test_single_class_is_rejected(self, temp_dir):
        path = temp_dir / "single.csv"
        path.write_text("a,label\n1,x\n2,x\n")

        with pytest.raises(DatasetError, match="single class"):
            load_csv(path)

    def test_unknown_label_column(self, csv_file):
        with pytest.raises(DatasetError, match="not found"):
            load_csv(csv_file, label_column="nope")

    def test_schema_encoding_extends_unseen_categories(self, csv_file, temp_dir):
        train = load_csv(csv_file)
        path = temp_dir / "test.csv"
        path.write_text("size,colour,label\n1.5,purple,yes\n2.0,green,no\n")

        test = load_csv(path, schema=train.schema)

        assert test.columns[1].categories == ("red", "green", "blue", "purple")
        assert test.values[:, 1].tolist() == [3.0, 1.0]
        assert test.class_names == train.class_names

    def test_schema_rejects_unknown_labels(self, csv_file, temp_dir):
        train = load_csv(csv_file)
        path = temp_dir / "test.csv"
        path.write_text("size,colour,label\n1.5,red,maybe\n")

        with pytest.raises(DatasetError, match="Unknown class labels"):
            load_csv(path, schema=train.schema)

    def test_schema_rejects_non_numeric_cell(self, csv_file, temp_dir):
        train = load_csv(csv_file)
        path = temp_dir / "test.csv"
        path.write_text("size,colour,label\n1.5,red,yes\nbig,red,no\n")

        with pytest.raises(DatasetError, match="line 3, column 'size'"):
            load_csv(path, schema=train.schema)

    def test_write_then_load_keeps_values(self, mixed_dataset, temp_dir):
        path = temp_dir / "mixed.csv"
        write_csv(mixed_dataset, path)

        loaded = load_csv(path, schema=mixed_dataset.schema)

        np.testing.assert_array_equal(loaded.values, mixed_dataset.values)
        np.testing.assert_array_equal(loaded.labels, mixed_dataset.labels)
        assert path.read_text().splitlines()[0] == "a,b,colour,size,answer"

    def test_written_synthetic_data_loads_bit_identical(self, temp_dir):
        data = generate_synthetic(800, 200, 0.05, seed=0)
        path = temp_dir / "synthetic.csv"
        write_csv(data, path)

        loaded = load_csv(path)

        assert loaded.values.tobytes() == data.values.tobytes()
        np.testing.assert_array_equal(loaded.labels, data.labels)

    def test_numbers_parse_to_nearest_double(self, temp_dir):
        cells = ["0.1", "0.30000000000000004", "2.675", "1e-310", "0.7071067811865476"]
        path = temp_dir / "digits.csv"
        path.write_text("v,label\n" + "".join(f"{c},{'xy'[i % 2]}\n" for i, c in enumerate(cells)))

        assert load_csv(path).values[:, 0].tolist() == [float(c) for c in cells]

    @pytest.mark.skipif(not BREAST_CANCER_CSV.is_file(), reason=f"{BREAST_CANCER_CSV} is missing")
    def test_breast_cancer_layout(self):
        data = load_csv(BREAST_CANCER_CSV)

        assert data.n_rows == 286
        assert data.n_columns == 9
        # deg-malig holds the integers 1-3 and loads as numeric
        assert sum(c.kind is ColumnKind.CATEGORICAL for c in data.columns) >= 8
        assert data.n_classes == 2


class TestDatasetInvariants:
    """Test Dataset validation."""

    def test_category_index_out_of_range(self):
        with pytest.raises(DatasetError, match="category index"):
            Dataset(
                columns=(Column("c", ColumnKind.CATEGORICAL, ("a", "b")),),
                values=np.array([[0.0], [2.0]]),
                labels=np.array([0, 1]),
                class_names=("x", "y"),
                weights=np.ones(2),
            )

    def test_negative_weights(self):
        with pytest.raises(DatasetError, match="weights"):
            Dataset(
                columns=(Column("v", ColumnKind.NUMERIC),),
                values=np.array([[0.0], [1.0]]),
                labels=np.array([0, 1]),
                class_names=("x", "y"),
                weights=np.array([1.0, -1.0]),
            )

    def test_arrays_are_read_only(self, tiny_dataset):
        with pytest.raises(ValueError):
            tiny_dataset.values[0, 0] = 9.0

    def test_check_arity(self, tiny_dataset):
        assert check_arity([1.0], 1).tolist() == [1.0]
        with pytest.raises(ArityMismatchError) as excinfo:
            check_arity([1.0, 2.0], tiny_dataset.n_columns)
        assert (excinfo.value.expected, excinfo.value.actual) == (1, 2)


class TestStratifiedKFold:
    """Test cross-validation fold assignment."""

    def test_partition_and_stratification(self, numeric_dataset):
        k = 5
        folds = stratified_kfold(numeric_dataset, k, seed=3)

        tests = np.concatenate([f.test_indices for f in folds])
        assert sorted(tests.tolist()) == list(range(numeric_dataset.n_rows))
        sizes = [f.test.n_rows for f in folds]
        assert max(sizes) - min(sizes) <= 1
        for fold in folds:
            assert set(fold.train_indices) | set(fold.test_indices) == set(range(60))
            assert not set(fold.train_indices) & set(fold.test_indices)
            expected = numeric_dataset.class_counts() / k
            assert np.all(np.abs(fold.test.class_counts() - expected) <= 1)

    def test_same_seed_same_folds(self, numeric_dataset):
        first = stratified_kfold(numeric_dataset, 4, seed=9)
        second = stratified_kfold(numeric_dataset, 4, seed=9)
        for a, b in zip(first, second, strict=True):
            np.testing.assert_array_equal(a.test_indices, b.test_indices)

    def test_small_class_falls_back_with_warning(self, caplog):
        data = Dataset(
            columns=(Column("v", ColumnKind.NUMERIC),),
            values=np.arange(10, dtype=float).reshape(-1, 1),
            labels=np.array([0] * 9 + [1]),
            class_names=("a", "b"),
            weights=np.ones(10),
        )

        folds = stratified_kfold(data, 5, seed=0)

        assert len(folds) == 5
        assert "unstratified" in caplog.text

    def test_286_rows_in_ten_folds(self):
        folds = stratified_kfold(make_mixed_dataset(286, seed=0), 10, seed=0)

        sizes = [f.test.n_rows for f in folds]
        assert set(sizes) <= {28, 29}
        assert sum(sizes) == 286

    @pytest.mark.parametrize("k", [1, 61])
    def test_invalid_k(self, numeric_dataset, k):
        with pytest.raises(DatasetError):
            stratified_kfold(numeric_dataset, k, seed=0)


class TestBootstrapAndSynthetic:
    """Test bagging samples and the synthetic generator."""

    def test_bootstrap_draws_n_rows_from_data(self, numeric_dataset):
        sample = bootstrap_sample(numeric_dataset, np.random.default_rng(0))

        assert sample.n_rows == numeric_dataset.n_rows
        rows = {tuple(r) for r in numeric_dataset.values}
        assert all(tuple(r) in rows for r in sample.values)

    def test_bootstrap_keeps_about_63_percent_distinct_rows(self):
        data = Dataset(
            columns=(Column("id", ColumnKind.NUMERIC),),
            values=np.arange(100, dtype=float).reshape(-1, 1),
            labels=np.arange(100) % 2,
            class_names=("a", "b"),
            weights=np.ones(100),
        )
        rng = np.random.default_rng(0)

        distinct = [np.unique(bootstrap_sample(data, rng).values).size / 100 for _ in range(10_000)]

        expected = 1 - (1 - 1 / 100) ** 100
        assert abs(np.mean(distinct) - expected) <= 0.01

    def test_synthetic_class_counts(self):
        data = generate_synthetic(800, 200, 0.05, seed=0)

        assert data.n_rows == 1000
        assert data.class_counts().tolist() == [800, 200]
        assert data.class_names == ("red", "blue")
        assert data.values.min() >= 0.0 and data.values.max() <= 1.0

    def test_zero_noise_points_lie_on_their_lines(self):
        data = generate_synthetic(50, 50, 0.0, seed=1)
        x, y = data.values[:, 0], data.values[:, 1]
        offset = np.where(data.labels == 0, -0.2, 0.2)
        np.testing.assert_allclose(y, x + offset, atol=1e-12)

    def test_little_noise_keeps_red_below_diagonal(self):
        data = generate_synthetic(800, 200, 0.05, seed=2)
        red = data.values[data.labels == 0]
        assert np.mean(red[:, 1] > red[:, 0]) < 0.02

    def test_deterministic(self):
        a = generate_synthetic(10, 5, 0.05, seed=4)
        b = generate_synthetic(10, 5, 0.05, seed=4)
        np.testing.assert_array_equal(a.values, b.values)

    @pytest.mark.parametrize(("n_red", "n_blue", "sd"), [(0, 1, 0.1), (1, 1, -0.1)])
    def test_invalid_parameters(self, n_red, n_blue, sd):
        with pytest.raises(DatasetError):
            generate_synthetic(n_red, n_blue, sd, seed=0)
