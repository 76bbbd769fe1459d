import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from waferscreen import (
    Binning,
    ColumnView,
    column,
    entropy,
    made_stats,
    make_binning,
    rank_by_entropy,
    rank_by_made,
    select_top,
)
from waferscreen.errors import EmptyColumn, KOutOfRange
from waferscreen.univariate import MADE_TO_SIGMA

from conftest import make_matrix


def col(samples, pid="x"):
    return ColumnView(param_id=pid, samples=np.asarray(samples, dtype=np.float64))


class TestMadeStats:
    def test_hand_example(self):
        s = made_stats(col([1, 2, 3, 4, 5]), n_factor=1.0)
        assert s.median == 3.0
        assert s.made == 1.0
        # deviations {2,1,0,1,2}; threshold 1.483 -> only 1 and 5 exceed it
        assert s.ood_fraction == pytest.approx(0.4)

    def test_constant_column(self):
        s = made_stats(col([7, 7, 7]), n_factor=1.0)
        assert s.made == 0.0
        assert s.ood_fraction == 0.0

    def test_degenerate_spike(self):
        s = made_stats(col([0, 0, 0, 0, 100]), n_factor=3.0)
        assert s.made == 0.0
        assert s.ood_fraction == pytest.approx(0.2)

    def test_empty_column(self):
        with pytest.raises(EmptyColumn):
            made_stats(col([]), n_factor=1.0)

    def test_bad_n_factor(self):
        with pytest.raises(ValueError):
            made_stats(col([1.0]), n_factor=0.0)

    @settings(max_examples=200, deadline=None)
    @given(
        samples=st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=40
        ),
        a=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        b=st.floats(min_value=1e-3, max_value=1e3, allow_nan=False),
        sign=st.sampled_from([-1.0, 1.0]),
        n_factor=st.floats(min_value=0.5, max_value=5.0),
    )
    def test_affine_equivariance(self, samples, a, b, sign, n_factor):
        b = sign * b
        x = np.asarray(samples)
        base = made_stats(col(x), n_factor)
        scale = max(1.0, float(np.abs(x).max()), abs(a))
        if base.made > 0.0:
            # skip samples within rounding distance of the threshold boundary
            margin = np.abs(
                np.abs(x - base.median) - n_factor * MADE_TO_SIGMA * base.made
            )
            assume(float(margin.min()) > 1e-6 * scale)
        else:
            # skip samples that could collide with the median after the map
            off = np.abs(x - base.median)
            assume(not np.any((off > 0.0) & (off < 1e-6 * scale / abs(b))))
        mapped = made_stats(col(a + b * x), n_factor)
        assert mapped.median == pytest.approx(a + b * base.median, rel=1e-9, abs=1e-6)
        assert mapped.made == pytest.approx(abs(b) * base.made, rel=1e-9, abs=1e-9)
        assert mapped.ood_fraction == pytest.approx(base.ood_fraction)


class TestMakeBinning:
    def test_equal_spacing(self):
        b = make_binning(col([0.0, 10.0, 5.0]), n_interior=4)
        assert b.edges == (0.0, 2.5, 5.0, 7.5, 10.0)
        assert b.n_bins == 6

    def test_constant_column(self):
        b = make_binning(col([3.0, 3.0]), n_interior=4)
        assert b.edges == (3.0,)
        assert b.n_bins == 2

    def test_outer_bins_are_total(self):
        b = make_binning(col([0.0, 10.0]), n_interior=4)
        assert b.assign(np.array([1e9]))[0] == b.n_bins - 1
        assert b.assign(np.array([-1e9]))[0] == 0

    def test_empty_column(self):
        with pytest.raises(EmptyColumn):
            make_binning(col([]), n_interior=4)

    def test_bad_interior_count(self):
        with pytest.raises(ValueError):
            make_binning(col([1.0, 2.0]), n_interior=0)


class TestEntropy:
    def test_constant_column_zero(self):
        c = col([3.0] * 10)
        assert entropy(c, make_binning(c, 8)) == 0.0

    def test_uniform_spread_is_log_k(self):
        # 2 interior intervals + 2 outer bins = 4 bins, 5 samples in each
        b = Binning(edges=(0.0, 1.0, 2.0))
        samples = [-5.0] * 5 + [0.5] * 5 + [1.5] * 5 + [9.0] * 5
        assert entropy(col(samples), b) == pytest.approx(math.log(4), abs=1e-12)

    def test_hand_example(self):
        b = Binning(edges=(0.5,))
        h = entropy(col([0.0, 0.0, 0.0, 1.0]), b)
        expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        assert h == pytest.approx(expected, abs=1e-12)
        assert h == pytest.approx(0.5623, abs=1e-4)

    @settings(max_examples=100, deadline=None)
    @given(
        samples=st.lists(
            st.floats(min_value=-1e9, max_value=1e9, allow_nan=False),
            min_size=1,
            max_size=60,
        ),
        n_interior=st.integers(min_value=1, max_value=12),
    )
    def test_bounds(self, samples, n_interior):
        c = col(samples)
        b = make_binning(c, n_interior)
        h = entropy(c, b)
        assert 0.0 <= h <= math.log(b.n_bins) + 1e-12

    def test_single_sample_corruption_bound(self):
        # fixed binning from the clean sample; one value replaced by 1e12
        rng = np.random.default_rng(5)
        n = 200
        clean = rng.normal(size=n)
        c = col(clean)
        bins = make_binning(c, 16)
        h0 = entropy(c, bins)
        bound = 3.0 * math.log(n) / n + 2.0 / n
        for idx in (0, 57, n - 1):
            corrupted = clean.copy()
            corrupted[idx] = 1e12
            h1 = entropy(col(corrupted), bins)
            assert abs(h1 - h0) <= bound


class TestRankings:
    def test_made_prefers_spike_column(self):
        rng = np.random.default_rng(0)
        spike = np.zeros(200)
        spike[17] = 9.0
        m = make_matrix(np.column_stack([rng.normal(size=200), spike]))
        ranking = rank_by_made(m, n_factor=3.0)
        assert ranking.entries[0][0] == "p001"

    def test_entropy_prefers_spread_column(self):
        rng = np.random.default_rng(1)
        spike = np.zeros(200)
        spike[17] = 1e6
        m = make_matrix(np.column_stack([spike, rng.normal(size=200)]))
        ranking = rank_by_entropy(m, n_interior=16)
        assert ranking.entries[0][0] == "p001"

    def test_all_constant_lexicographic(self):
        m = make_matrix(np.ones((5, 3)))
        ranking = rank_by_made(m, n_factor=3.0)
        assert [pid for pid, _ in ranking.entries] == ["p000", "p001", "p002"]
        assert all(score == 0.0 for _, score in ranking.entries)

    def test_single_column(self):
        m = make_matrix(np.arange(6.0)[:, None])
        assert rank_by_made(m, 3.0).entries[0][0] == "p000"

    def test_identical_columns_tie_break(self):
        base = np.arange(10.0)
        m = make_matrix(np.column_stack([base, base]))
        ranking = rank_by_entropy(m, n_interior=4)
        assert ranking.entries[0][0] == "p000"
        assert ranking.entries[0][1] == ranking.entries[1][1]

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(50, 4))
        m1 = make_matrix(X)
        m2 = make_matrix(X[rng.permutation(50)])
        for ranker, arg in ((rank_by_made, 3.0), (rank_by_entropy, 8)):
            assert ranker(m1, arg).entries == ranker(m2, arg).entries

    def test_corruption_preserves_ranking_under_reference_binning(self):
        # one binning per column, built on the clean data, reused afterwards
        rng = np.random.default_rng(9)
        X = np.column_stack(
            [rng.normal(0, sigma, size=300) for sigma in (0.2, 1.0, 3.0, 8.0, 20.0)]
        )
        m = make_matrix(X)
        binnings = {
            pid: make_binning(column(m, pid), 16) for pid in m.param_ids
        }
        def scores(matrix):
            return {
                pid: entropy(column(matrix, pid), binnings[pid])
                for pid in matrix.param_ids
            }
        order0 = sorted(m.param_ids, key=lambda pid: -scores(m)[pid])
        X2 = X.copy()
        X2[123, 2] = 1e12
        order1 = sorted(m.param_ids, key=lambda pid: -scores(make_matrix(X2))[pid])
        assert order0 == order1


class TestSelectTop:
    def test_all(self):
        r = rank_by_made(make_matrix(np.eye(3)), 3.0)
        assert select_top(r, 3) == {"p000", "p001", "p002"}

    def test_best(self):
        rng = np.random.default_rng(0)
        spike = np.zeros(100)
        spike[3] = 5.0
        m = make_matrix(np.column_stack([spike, rng.normal(size=100)]))
        r = rank_by_made(m, 3.0)
        assert select_top(r, 1) == {"p000"}

    def test_zero_out_of_range(self):
        r = rank_by_made(make_matrix(np.eye(3)), 3.0)
        with pytest.raises(KOutOfRange):
            select_top(r, 0)
        with pytest.raises(KOutOfRange):
            select_top(r, 4)


class TestRankingCsv:
    def test_export_shape(self):
        m = make_matrix(np.eye(4))
        lines = rank_by_made(m, 3.0).to_csv_lines()
        assert lines[0] == "rank,param_id,method,score"
        assert len(lines) == 5
        assert lines[1].startswith("1,")
