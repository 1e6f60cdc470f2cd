import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gprterrain.preprocess import (
    Band,
    ShapeError,
    SliceSpec,
    StratificationError,
    extract_band,
    make_slices,
    normalize,
    pad_radargram,
    pad_width,
    slice_radargram,
    split_dataset,
    split_radargrams,
    window_count,
)
from gprterrain.simulate import Radargram, TerrainClass


def radargram(width, labels=None, height=200, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.zeros(width, dtype=np.uint8) if labels is None else labels
    return Radargram(rng.standard_normal((height, width)), labels, f"r{seed}")


class TestPadWidth:
    @pytest.mark.parametrize("w,expected", [(100, 100), (101, 102), (32, 32)])
    def test_hand_values(self, w, expected):
        assert pad_width(w, 32, 4) == expected

    def test_literal_formula_not_snapped(self):
        # (103 - 32) % 4 = 3, so the literal rule adds 3 columns
        assert pad_width(103, 32, 4) == 106
        assert pad_width(103, 32, 4, snap=True) == 104

    def test_too_narrow(self):
        with pytest.raises(ValueError):
            pad_width(31, 32, 4)

    @given(st.integers(32, 400), st.sampled_from([1, 8, 16, 24, 32]), st.integers(1, 8))
    def test_snap_aligns(self, w, wr, s):
        assert (pad_width(w, wr, s, snap=True) - wr) % s == 0


class TestPadRadargram:
    def test_unchanged(self):
        r = radargram(40)
        assert pad_radargram(r, 40) is r

    def test_replicates_last_column(self):
        labels = np.array([0] * 39 + [2], dtype=np.uint8)
        p = pad_radargram(radargram(40, labels), 42)
        assert p.width == 42 and len(p.labels) == 42
        assert np.array_equal(p.data[:, -1], p.data[:, -3])
        assert np.array_equal(p.data[:, -2], p.data[:, -3])
        assert list(p.labels[-3:]) == [2, 2, 2]

    def test_shrink_rejected(self):
        with pytest.raises(ValueError):
            pad_radargram(radargram(40), 39)


class TestBands:
    def test_heights(self):
        r = radargram(4)
        assert extract_band(r, Band.DIRECT).shape == (60, 4)
        assert extract_band(r, Band.REFLECTED).shape == (60, 4)
        assert extract_band(r, Band.FULL).shape == (200, 4)

    def test_partition(self):
        r = radargram(4)
        rebuilt = np.vstack([extract_band(r, Band.DIRECT), r.data[60:]])
        assert np.array_equal(rebuilt, r.data)

    def test_wrong_height(self):
        with pytest.raises(ShapeError):
            extract_band(radargram(4, height=100), Band.DIRECT)


class TestSlicing:
    def test_count_and_offsets(self):
        slices, dropped = slice_radargram(radargram(100), SliceSpec(32, 4))
        assert len(slices) == (100 - 32) // 4 + 1 and dropped == 0
        assert [s.offset for s in slices[:3]] == [0, 4, 8]
        assert slices[0].data.shape == (60, 32)

    def test_boundary_windows_discarded(self):
        labels = np.array([1] * 50 + [2] * 50, dtype=np.uint8)
        slices, dropped = slice_radargram(radargram(100, labels), SliceSpec(32, 4))
        # windows starting at 20..48 straddle column 50
        assert dropped == 8
        assert all(len({int(s.label)}) == 1 for s in slices)
        for s in slices:
            assert np.all(labels[s.offset:s.offset + 32] == int(s.label))

    def test_window_content(self):
        r = radargram(40)
        s = slice_radargram(r, SliceSpec(8, 4, Band.REFLECTED))[0][1]
        assert np.array_equal(s.data, r.data[60:120, 4:12])

    def test_narrow_radargram_yields_nothing(self):
        assert make_slices(radargram(10), SliceSpec(32, 4)) == ([], 0)

    def test_stride_bound(self):
        with pytest.raises(ValueError):
            SliceSpec(8, 9)

    def test_for_width_clamps(self):
        assert SliceSpec.for_width(1).s == 1

    @settings(max_examples=200, deadline=None)
    @given(st.integers(32, 120), st.sampled_from([1, 8, 16, 24, 32]), st.integers(1, 8))
    def test_count_matches_enumeration(self, w, wr, s):
        if s > wr:
            return
        spec = SliceSpec(wr, s, Band.DIRECT)
        r = radargram(w)
        slices, _ = make_slices(r, spec)
        w_pad = pad_width(w, wr, s)
        expected = sum(1 for start in range(w_pad) if start % s == 0 and start + wr <= w_pad)
        assert len(slices) == expected == window_count(w_pad, wr, s)


class TestSplit:
    def corpus(self):
        out = []
        for k in range(20):
            out.append(radargram(40, np.full(40, k % 4, dtype=np.uint8), seed=k))
        return out

    def test_disjoint_and_stratified(self):
        train, test = split_radargrams(self.corpus(), 0.8, 42)
        assert not {r.source_id for r in train} & {r.source_id for r in test}
        assert len(test) == 4
        assert sorted(int(r.dominant_label()) for r in test) == [0, 1, 2, 3]

    def test_frozen_across_widths(self):
        ids = {split_dataset(self.corpus(), SliceSpec.for_width(w), 0.8, 42).test_ids for w in (1, 8, 16, 32)}
        assert len(ids) == 1

    def test_seed_changes_split(self):
        a = split_dataset(self.corpus(), SliceSpec(), 0.8, 1).test_ids
        assert any(split_dataset(self.corpus(), SliceSpec(), 0.8, s).test_ids != a for s in range(2, 6))

    def test_single_radargram_class(self):
        corpus = self.corpus()[:4] + [radargram(40, np.zeros(40, dtype=np.uint8), seed=99)]
        with pytest.raises(StratificationError):
            split_radargrams(corpus)

    def test_normalize_uses_train_stats(self):
        split = normalize(split_dataset(self.corpus(), SliceSpec(), 0.8, 42))
        x, _ = split.arrays("train")
        assert abs(x.mean()) < 1e-9
        assert abs(x.std() - 1.0) < 1e-9
        assert split.mean is not None and split.std > 0

    def test_arrays_shape(self):
        split = split_dataset(self.corpus(), SliceSpec(32, 4, Band.FULL), 0.8, 42)
        x, y = split.arrays("test")
        assert x.shape[1:] == (1, 200, 32) and len(y) == len(x)
