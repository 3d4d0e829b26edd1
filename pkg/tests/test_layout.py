import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from draftattn.layout import (
    LatentLayout,
    Permutation,
    gen_reorder_index,
    gen_restore_index,
    invert_permutation,
    permute_rows,
)

from gridutil import layouts_only
from oracles import reorder_index_loops, region_token_sets, restore_index_loops


class TestLatentLayout:
    def test_derived_counts(self):
        layout = LatentLayout(2, 8, 16, 2, 4)
        assert layout.num_tokens == 256
        assert layout.region_size == 8
        assert layout.patches_h == 4
        assert layout.patches_w == 4
        assert layout.num_regions == 32
        assert layout.num_regions * layout.region_size == layout.num_tokens

    @pytest.mark.parametrize("kwargs", [
        dict(frames=0, height=4, width=4, patch_h=2, patch_w=2),
        dict(frames=1, height=5, width=4, patch_h=2, patch_w=2),
        dict(frames=1, height=4, width=6, patch_h=2, patch_w=4),
        dict(frames=1, height=4, width=4, patch_h=-2, patch_w=2),
    ])
    def test_invalid_layouts_rejected(self, kwargs):
        with pytest.raises(ValueError):
            LatentLayout(**kwargs)


class TestReorderIndex:
    def test_hand_trace(self):
        perm = gen_reorder_index(LatentLayout(1, 2, 4, 2, 2))
        assert perm.forward.tolist() == [0, 1, 4, 5, 2, 3, 6, 7]

    def test_single_patch_is_identity(self):
        perm = gen_reorder_index(LatentLayout(3, 2, 4, 2, 4))
        np.testing.assert_array_equal(perm.forward, np.arange(24))

    def test_first_patch_of_4x4_grid(self):
        # the top-left 2x2 patch holds original tokens 0, 1, 4, 5 and must
        # land contiguously at the front
        perm = gen_reorder_index(LatentLayout(1, 4, 4, 2, 2))
        assert perm.forward[:4].tolist() == [0, 1, 4, 5]

    def test_matches_loop_transcription_on_grid(self):
        for layout in layouts_only():
            expected = reorder_index_loops(layout.frames, layout.height, layout.width,
                                           layout.patch_h, layout.patch_w)
            np.testing.assert_array_equal(gen_reorder_index(layout).forward, expected)

    @given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4),
           st.integers(1, 3), st.integers(1, 3))
    @settings(max_examples=40, deadline=None)
    def test_matches_loop_transcription_random(self, frames, mh, mw, patch_h, patch_w):
        layout = LatentLayout(frames, mh * patch_h, mw * patch_w, patch_h, patch_w)
        expected = reorder_index_loops(layout.frames, layout.height, layout.width,
                                       layout.patch_h, layout.patch_w)
        np.testing.assert_array_equal(gen_reorder_index(layout).forward, expected)

    def test_regions_contiguous_after_reordering(self):
        for layout in layouts_only():
            perm = gen_reorder_index(layout)
            p = layout.region_size
            sets = region_token_sets(layout.frames, layout.height, layout.width,
                                     layout.patch_h, layout.patch_w)
            for i, tokens in enumerate(sets):
                positions = perm.inverse[np.asarray(tokens)]
                assert positions.min() >= i * p and positions.max() < (i + 1) * p

    def test_tokens_never_cross_frames(self):
        layout = LatentLayout(3, 4, 8, 2, 4)
        perm = gen_reorder_index(layout)
        per_frame = layout.height * layout.width
        assert (perm.forward // per_frame == np.arange(len(perm)) // per_frame).all()


class TestRestoreIndex:
    def test_three_cycle(self):
        perm = gen_restore_index(np.array([2, 0, 1]))
        assert perm.forward.tolist() == [1, 2, 0]

    def test_identity(self):
        perm = gen_restore_index(np.arange(5))
        np.testing.assert_array_equal(perm.forward, np.arange(5))

    def test_composes_to_identity_on_grid(self):
        for layout in layouts_only():
            perm = gen_reorder_index(layout)
            restore = gen_restore_index(perm)
            np.testing.assert_array_equal(perm.forward[restore.forward],
                                          np.arange(len(perm)))
            np.testing.assert_array_equal(restore.forward[perm.forward],
                                          np.arange(len(perm)))

    def test_matches_loop_scatter(self):
        rng = np.random.default_rng(8)
        forward = rng.permutation(40)
        np.testing.assert_array_equal(invert_permutation(forward),
                                      restore_index_loops(forward))

    def test_duplicate_index_rejected(self):
        with pytest.raises(ValueError, match="duplicate index 1"):
            invert_permutation(np.array([0, 1, 1]))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            invert_permutation(np.array([0, 3]))

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            invert_permutation(np.array([], dtype=np.int64))


class TestPermuteRows:
    def test_identity_perm_is_noop(self):
        x = np.arange(12.0).reshape(4, 3)
        perm = Permutation.from_forward(np.arange(4))
        np.testing.assert_array_equal(permute_rows(x, perm), x)

    def test_round_trip_exact(self):
        rng = np.random.default_rng(9)
        for layout in layouts_only():
            x = rng.standard_normal((layout.num_tokens, 3))
            perm = gen_reorder_index(layout)
            np.testing.assert_array_equal(permute_rows(permute_rows(x, perm), perm.inverse), x)

    def test_hand_trace_row_order(self):
        x = np.arange(8.0)[:, None]
        perm = gen_reorder_index(LatentLayout(1, 2, 4, 2, 2))
        assert permute_rows(x, perm)[:, 0].tolist() == [0, 1, 4, 5, 2, 3, 6, 7]

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="does not match"):
            permute_rows(np.zeros((3, 2)), Permutation.from_forward(np.arange(4)))
