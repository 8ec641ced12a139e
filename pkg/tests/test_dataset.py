"""CSV round trips and the error cases the loader must catch."""

import numpy as np
import pytest

from spnstream.dataset import DatasetError, load_csv, save_csv


def test_round_trip_without_header(tmp_path):
    path = tmp_path / "plain.csv"
    rows = np.random.default_rng(0).normal(size=(40, 3))
    save_csv(path, rows)
    got, names = load_csv(path)
    assert names is None
    # repr() of a float round-trips exactly.
    assert np.array_equal(got, rows)


def test_round_trip_with_header(tmp_path):
    path = tmp_path / "named.csv"
    rows = np.arange(12.0).reshape(4, 3)
    save_csv(path, rows, names=["a", "b", "c"])
    got, names = load_csv(path)
    assert names == ["a", "b", "c"]
    assert np.array_equal(got, rows)


def test_header_is_sniffed_not_assumed(tmp_path):
    path = tmp_path / "numeric_first_line.csv"
    path.write_text("1.5,2.5\n3.5,4.5\n")
    got, names = load_csv(path)
    assert names is None
    assert got.shape == (2, 2)
    assert got[0, 0] == 1.5


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("x,y\n\n1,2\n\n3,4\n")
    got, names = load_csv(path)
    assert names == ["x", "y"]
    assert got.shape == (2, 2)


def test_non_numeric_body_line_reports_its_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n")
    with pytest.raises(DatasetError, match="line 2"):
        load_csv(path)


def test_ragged_row_reports_expected_width(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2,3\n4,5\n")
    with pytest.raises(DatasetError, match="expected 3 columns, got 2"):
        load_csv(path)


def test_empty_file_is_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DatasetError, match="no data rows"):
        load_csv(path)


def test_header_only_file_is_rejected(tmp_path):
    path = tmp_path / "header_only.csv"
    path.write_text("x,y,z\n")
    with pytest.raises(DatasetError, match="no data rows"):
        load_csv(path)


def test_non_finite_values_are_rejected(tmp_path):
    path = tmp_path / "inf.csv"
    path.write_text("1,2\ninf,4\n")
    with pytest.raises(DatasetError, match="non-finite"):
        load_csv(path)


def test_header_width_mismatch_is_rejected(tmp_path):
    path = tmp_path / "short_header.csv"
    path.write_text("x,y\n1,2,3\n")
    with pytest.raises(DatasetError, match="header has 2 names for 3 columns"):
        load_csv(path)


def test_save_rejects_wrong_header_length(tmp_path):
    with pytest.raises(DatasetError):
        save_csv(tmp_path / "x.csv", np.zeros((2, 3)), names=["only", "two"])


def test_save_promotes_single_row(tmp_path):
    path = tmp_path / "one.csv"
    save_csv(path, np.array([1.0, 2.0]))
    got, _ = load_csv(path)
    assert got.shape == (1, 2)
