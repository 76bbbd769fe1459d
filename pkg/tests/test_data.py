import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waferscreen import (
    DataMatrix,
    IngestOptions,
    Label,
    LabelSet,
    column,
    load_csv,
    load_labels,
    restrict,
    save_csv,
    save_labels,
)
from waferscreen.errors import (
    EmptyData,
    EmptySelection,
    MalformedCsv,
    NonNumericCell,
    UnknownParam,
)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_plain_parse(self, tmp_path):
        m = load_csv(write(tmp_path, "lot,p1,p2\nA,1,2\nB,3,4\nC,5,6\n"))
        assert m.n_lots == 3 and m.n_params == 2
        assert m.lot_ids == ("A", "B", "C")
        assert m.values[2, 1] == 6.0

    def test_missing_cell_imputed_with_median(self, tmp_path):
        m = load_csv(write(tmp_path, "lot,p1\nA,1\nB,2\nC,\nD,4\n"))
        assert m.values[2, 0] == 2.0

    def test_duplicate_header_rejected(self, tmp_path):
        with pytest.raises(MalformedCsv):
            load_csv(write(tmp_path, "lot,p1,p1\nA,1,2\n"))

    def test_ragged_row_rejected(self, tmp_path):
        with pytest.raises(MalformedCsv):
            load_csv(write(tmp_path, "lot,p1,p2\nA,1\n"))

    def test_duplicate_lot_rejected(self, tmp_path):
        with pytest.raises(MalformedCsv):
            load_csv(write(tmp_path, "lot,p1\nA,1\nA,2\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyData):
            load_csv(write(tmp_path, ""))

    def test_no_data_rows(self, tmp_path):
        with pytest.raises(EmptyData):
            load_csv(write(tmp_path, "lot,p1\n"))

    def test_no_data_columns(self, tmp_path):
        with pytest.raises(EmptyData):
            load_csv(write(tmp_path, "lot\nA\n"))

    def test_non_numeric_without_imputation(self, tmp_path):
        path = write(tmp_path, "lot,p1\nA,oops\nB,2\n")
        with pytest.raises(NonNumericCell):
            load_csv(path, IngestOptions(impute_missing=False))

    def test_entirely_missing_column_rejected(self, tmp_path):
        with pytest.raises(MalformedCsv):
            load_csv(write(tmp_path, "lot,p1,p2\nA,,1\nB,,2\n"))

    def test_comment_lines_skipped(self, tmp_path):
        m = load_csv(write(tmp_path, "# generated by a tool\nlot,p1\nA,1\nB,2\n"))
        assert m.n_lots == 2

    def test_inf_text_treated_as_missing(self, tmp_path):
        m = load_csv(write(tmp_path, "lot,p1\nA,inf\nB,2\nC,4\n"))
        assert np.isfinite(m.values).all()
        assert m.values[0, 0] == 3.0


class TestDataMatrixInvariants:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            DataMatrix(values=[[np.nan]], param_ids=("p",), lot_ids=("L",))

    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError):
            DataMatrix(values=[[1.0, 2.0]], param_ids=("p", "p"), lot_ids=("L",))

    def test_rejects_empty(self):
        with pytest.raises(EmptyData):
            DataMatrix(
                values=np.zeros((0, 1)), param_ids=("p",), lot_ids=()
            )

    def test_values_read_only(self, small_matrix):
        with pytest.raises(ValueError):
            small_matrix.values[0, 0] = 99.0


class TestColumn:
    def test_returns_stored_values(self):
        m = DataMatrix(values=[[0.0], [0.0], [5.0]], param_ids=("p1",), lot_ids=("A", "B", "C"))
        view = column(m, "p1")
        assert list(view.samples) == [0.0, 0.0, 5.0]

    def test_unknown_param(self, small_matrix):
        with pytest.raises(UnknownParam):
            column(small_matrix, "zz")

    def test_single_lot_boundary(self):
        m = DataMatrix(values=[[7.0]], param_ids=("p1",), lot_ids=("A",))
        assert len(column(m, "p1")) == 1


class TestRestrict:
    def test_identity(self, small_matrix):
        r = restrict(small_matrix, set(small_matrix.param_ids))
        assert r.param_ids == small_matrix.param_ids
        assert np.array_equal(r.values, small_matrix.values)

    def test_single_column(self, small_matrix):
        r = restrict(small_matrix, {"p2"})
        assert r.param_ids == ("p2",)
        assert np.array_equal(r.values[:, 0], small_matrix.values[:, 1])

    def test_empty_selection(self, small_matrix):
        with pytest.raises(EmptySelection):
            restrict(small_matrix, set())

    def test_unknown_param(self, small_matrix):
        with pytest.raises(UnknownParam):
            restrict(small_matrix, {"p1", "nope"})

    def test_idempotent(self, small_matrix):
        keep = {"p1", "p3"}
        once = restrict(small_matrix, keep)
        twice = restrict(once, keep)
        assert once.param_ids == twice.param_ids
        assert np.array_equal(once.values, twice.values)

    def test_preserves_relative_order(self, small_matrix):
        r = restrict(small_matrix, {"p4", "p1"})
        assert r.param_ids == ("p1", "p4")


finite_floats = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12
)


class TestCsvRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(
            st.lists(finite_floats, min_size=3, max_size=3),
            min_size=1,
            max_size=8,
        )
    )
    def test_bit_exact_round_trip(self, rows):
        import tempfile, os

        m = DataMatrix(
            values=rows,
            param_ids=("a", "b", "c"),
            lot_ids=tuple(f"L{i}" for i in range(len(rows))),
        )
        fd, path = tempfile.mkstemp(suffix=".csv")
        os.close(fd)
        try:
            save_csv(m, path)
            back = load_csv(path)
        finally:
            os.unlink(path)
        assert back.param_ids == m.param_ids
        assert back.lot_ids == m.lot_ids
        assert np.array_equal(back.values, m.values)

    def test_round_trip_with_comment(self, tmp_path, small_matrix):
        path = tmp_path / "out.csv"
        save_csv(small_matrix, path, header_comment="hello")
        assert path.read_text().startswith("# hello\n")
        back = load_csv(path)
        assert np.array_equal(back.values, small_matrix.values)


class TestLabels:
    def test_round_trip(self, tmp_path):
        labels = LabelSet(labels={"A": Label.GOOD, "B": Label.BAD})
        path = tmp_path / "labels.csv"
        save_labels(labels, path)
        back = load_labels(path)
        assert back.labels == labels.labels
        assert back.bad_lots() == {"B"}

    def test_covers(self, small_matrix):
        labels = LabelSet(labels={lot: Label.GOOD for lot in small_matrix.lot_ids})
        assert labels.covers(small_matrix)
        partial = LabelSet(labels={"L00": Label.GOOD})
        assert not partial.covers(small_matrix)

    def test_bad_label_text_rejected(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("lot,label\nA,MAYBE\n")
        with pytest.raises(MalformedCsv):
            load_labels(path)
