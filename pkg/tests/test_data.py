"""CSV reading/writing and Dataset column access."""

import math

import numpy as np
import pytest

from lapgm import Dataset, read_csv
from lapgm.data import write_csv
from lapgm.errors import DataError


@pytest.fixture
def csv_file(tmp_path):
    def make(text, name="d.csv"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return make


class TestReadCsv:
    def test_basic(self, csv_file):
        ds = read_csv(csv_file("y,w,idx\n1,0.5,1\n2,-0.25,2\n"))
        assert ds.names() == ["y", "w", "idx"]
        assert ds.nrows == 2
        np.testing.assert_array_equal(ds["y"], [1.0, 2.0])
        np.testing.assert_array_equal(ds["w"], [0.5, -0.25])

    def test_na_strings_become_nan(self, csv_file):
        ds = read_csv(csv_file("y\nNA\nNaN\nnan\n\n3\n"))
        # blank lines are skipped; NA tokens parse to NaN
        assert ds.nrows == 4
        assert np.isnan(ds["y"][:3]).all()
        assert ds["y"][3] == 3.0

    def test_whitespace_tolerated(self, csv_file):
        ds = read_csv(csv_file(" y , w \n 1 , 2 \n"))
        assert ds.names() == ["y", "w"]
        assert ds["w"][0] == 2.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot open"):
            read_csv(str(tmp_path / "nope.csv"))

    def test_empty_file(self, csv_file):
        with pytest.raises(DataError, match="is empty"):
            read_csv(csv_file(""))

    def test_header_only(self, csv_file):
        with pytest.raises(DataError, match="no data rows"):
            read_csv(csv_file("y,w\n"))

    def test_unnamed_column(self, csv_file):
        with pytest.raises(DataError, match="unnamed column"):
            read_csv(csv_file("y,,w\n1,2,3\n"))

    def test_duplicate_column(self, csv_file):
        with pytest.raises(DataError, match="duplicate column name 'y'"):
            read_csv(csv_file("y,y\n1,2\n"))

    def test_field_count_mismatch_reports_line(self, csv_file):
        with pytest.raises(DataError, match="line 3 has 3 fields, expected 2"):
            read_csv(csv_file("y,w\n1,2\n1,2,3\n"))

    def test_bad_cell_reports_line_and_column(self, csv_file):
        with pytest.raises(DataError, match="line 2, column 'w'"):
            read_csv(csv_file("y,w\n1,abc\n"))


class TestDataset:
    def test_unequal_lengths(self):
        with pytest.raises(DataError, match="unequal lengths"):
            Dataset({"a": [1.0, 2.0], "b": [1.0]})

    def test_nrows_derived(self):
        assert Dataset({"a": [1.0, 2.0, 3.0]}).nrows == 3

    def test_contains_and_missing_column(self):
        ds = Dataset({"a": [1.0]})
        assert "a" in ds
        assert "b" not in ds
        with pytest.raises(DataError, match="no column named 'b'"):
            ds["b"]

    def test_index_column_good(self):
        ds = Dataset({"g": [1.0, 3.0, 2.0, 3.0]})
        idx, m = ds.index_column("g")
        np.testing.assert_array_equal(idx, [0, 2, 1, 2])
        assert m == 3

    def test_index_column_declared_size(self):
        ds = Dataset({"g": [1.0, 2.0]})
        _, m = ds.index_column("g", n=5)
        assert m == 5

    def test_index_column_too_large_for_declared_size(self):
        ds = Dataset({"g": [1.0, 4.0]})
        with pytest.raises(DataError, match="index 4 but n=3"):
            ds.index_column("g", n=3)

    def test_index_column_rejects_non_integers(self):
        ds = Dataset({"g": [1.0, 2.5]})
        with pytest.raises(DataError, match="must hold integers \\(line 3\\)"):
            ds.index_column("g")

    def test_index_column_rejects_zero(self):
        ds = Dataset({"g": [0.0, 1.0]})
        with pytest.raises(DataError, match="1-based"):
            ds.index_column("g")

    def test_index_column_rejects_nan(self):
        ds = Dataset({"g": [1.0, math.nan]})
        with pytest.raises(DataError, match="missing value at line 3"):
            ds.index_column("g")


class TestWriteCsv:
    def test_round_trip_with_na(self, tmp_path):
        p = str(tmp_path / "out.csv")
        y = np.array([1.5, math.nan, -3.0])
        w = np.array([0.1, 0.2, 0.3])
        write_csv(p, ["y", "w"], [y, w])
        ds = read_csv(p)
        assert np.isnan(ds["y"][1])
        np.testing.assert_array_equal(ds["y"][[0, 2]], [1.5, -3.0])
        np.testing.assert_array_equal(ds["w"], w)

    def test_floats_written_exactly(self, tmp_path):
        p = str(tmp_path / "out.csv")
        x = np.array([1.0 / 3.0, 1e-17])
        write_csv(p, ["x"], [x])
        np.testing.assert_array_equal(read_csv(p)["x"], x)
