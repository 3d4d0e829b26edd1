import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from draftattn.bounds import (
    block_broadcast,
    compute_delta,
    draft_error_check,
    mask_error_check,
    verify_instance,
)
from draftattn.layout import LatentLayout, gen_reorder_index, permute_rows
from draftattn.pooling import pool_regions
from draftattn.synth import gen_gaussian, gen_smooth

from oracles import delta_loops


def _small_layout():
    return LatentLayout(1, 4, 8, 2, 4)


class TestBlockBroadcast:
    def test_hand_example(self):
        out = block_broadcast(np.array([[1.0, 2.0], [3.0, 4.0]]), 2)
        np.testing.assert_array_equal(out, [[1, 1, 2, 2],
                                            [1, 1, 2, 2],
                                            [3, 3, 4, 4],
                                            [3, 3, 4, 4]])

    def test_inverse_of_block_mean(self):
        from draftattn.pooling import block_mean
        pooled = np.random.default_rng(0).standard_normal((3, 3))
        np.testing.assert_allclose(block_mean(block_broadcast(pooled, 4), 4),
                                   pooled, atol=1e-12)


class TestComputeDelta:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        for g, p in ((2, 3), (4, 2), (5, 4)):
            full = rng.standard_normal((g * p, g * p))
            pooled = rng.standard_normal((g, g))
            assert compute_delta(full, pooled) == pytest.approx(
                delta_loops(full, pooled, p), rel=1e-15)

    def test_zero_when_block_constant(self):
        pooled = np.random.default_rng(2).standard_normal((3, 3))
        assert compute_delta(block_broadcast(pooled, 2), pooled) == 0.0

    def test_rejects_incompatible_shapes(self):
        with pytest.raises(ValueError, match="incompatible"):
            compute_delta(np.zeros((6, 6)), np.zeros((4, 4)))


class TestDraftErrorBound:
    def test_holds_on_gaussian_instances(self):
        layout = _small_layout()
        for seed in range(5):
            q, k, _ = gen_gaussian(layout, 8, seed)
            report = draft_error_check(q, k, layout)
            assert report.holds
            assert report.frob_error <= report.bound + 1e-9
            assert report.slack == pytest.approx(report.bound - report.frob_error)

    def test_bound_is_delta_times_tokens(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 4, 7)
        report = draft_error_check(q, k, layout)
        assert report.bound == pytest.approx(report.delta * layout.num_tokens)

    def test_exact_when_inputs_constant_per_region(self):
        # constant rows inside every region make pooling lossless: delta and
        # the error are both zero
        layout = _small_layout()
        rng = np.random.default_rng(3)
        g, p, d = layout.num_regions, layout.region_size, 8
        per_region = rng.standard_normal((g, d))
        q_r = np.repeat(per_region, p, axis=0)
        k_r = np.repeat(rng.standard_normal((g, d)), p, axis=0)
        perm = gen_reorder_index(layout)
        q = permute_rows(q_r, perm.inverse)
        k = permute_rows(k_r, perm.inverse)
        report = draft_error_check(q, k, layout)
        assert report.delta == pytest.approx(0.0, abs=1e-12)
        assert report.frob_error == pytest.approx(0.0, abs=1e-10)
        assert report.holds

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_holds_property(self, seed):
        layout = LatentLayout(1, 4, 4, 2, 2)
        q, k, _ = gen_gaussian(layout, 4, seed)
        assert draft_error_check(q, k, layout).holds


class TestMaskErrorBound:
    def test_frobenius_holds_on_gaussian_instances(self):
        layout = _small_layout()
        for seed in range(5):
            q, k, _ = gen_gaussian(layout, 8, seed)
            for r in (0.1, 0.25, 0.5):
                report = mask_error_check(q, k, layout, r)
                assert report.holds

    def test_bound_formula(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 8, 11)
        r = 0.25
        report = mask_error_check(q, k, layout, r)
        assert report.bound == pytest.approx(
            layout.num_tokens * (report.delta + report.threshold) * math.sqrt(1 - r))

    def test_keep_all_gives_zero_error(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 8, 12)
        report = mask_error_check(q, k, layout, 1.0)
        assert report.frob_error == 0.0
        assert report.dropped_abs_max == 0.0
        assert report.holds and report.pointwise_holds

    def test_pointwise_flag_reflects_margin(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 8, 13)
        report = mask_error_check(q, k, layout, 0.25)
        expected = report.dropped_abs_max <= report.pointwise_bound + 1e-9
        assert report.pointwise_holds == expected

    def test_pointwise_violation_constructible(self):
        # a dropped block whose mean sits far below -t escapes [-t, t]; the
        # per-entry condition |S_uv| <= delta + t then fails, and with means
        # this extreme the Frobenius inequality built on it fails too. Random
        # zero-mean data trips the per-entry condition at modest rates while
        # leaving the Frobenius inequality intact (dropped entries there are
        # only mildly outside the band); this instance shows the failure mode
        # in its pure form.
        layout = LatentLayout(1, 4, 4, 2, 2)
        g, p = layout.num_regions, layout.region_size
        q_r = np.repeat(np.eye(g), p, axis=0)
        means = np.array([[1.0, 0.9, 0.8, -5.0],
                          [0.9, 1.0, 0.7, -5.0],
                          [0.8, 0.7, 1.0, -5.0],
                          [-5.0, -5.0, -5.0, 1.0]])
        k_r = np.repeat(means.T, p, axis=0)
        perm = gen_reorder_index(layout)
        q = permute_rows(q_r, perm.inverse)
        k = permute_rows(k_r, perm.inverse)
        report = mask_error_check(q, k, layout, 0.5)
        # block-constant inputs: delta = 0, threshold = 0.8, dropped |mean| = 5
        assert report.delta == pytest.approx(0.0, abs=1e-12)
        assert report.threshold == pytest.approx(0.8)
        assert report.dropped_abs_max == pytest.approx(5.0)
        assert not report.pointwise_holds
        assert not report.holds

    def test_smooth_data_also_checked(self):
        layout = LatentLayout(2, 4, 8, 2, 4)
        q, k, _ = gen_smooth(layout, 8, 15)
        for r in (0.1, 0.5):
            report = mask_error_check(q, k, layout, r)
            assert report.holds

    def test_softmax_error_is_informational(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 8, 16)
        report = mask_error_check(q, k, layout, 0.5)
        assert report.softmax_frob_error >= 0.0
        assert np.isfinite(report.softmax_frob_error)

    def test_as_dict_round_trip(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 8, 17)
        report = mask_error_check(q, k, layout, 0.5)
        d = report.as_dict()
        assert d["keep_ratio"] == 0.5
        assert set(d) == set(report.__dataclass_fields__)


class TestVerifyInstance:
    def test_matches_individual_checks(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 8, 18)
        draft_report, mask_reports = verify_instance(q, k, layout,
                                                     keep_ratios=(0.1, 0.5))
        assert draft_report == draft_error_check(q, k, layout)
        assert mask_reports[0] == mask_error_check(q, k, layout, 0.1)
        assert mask_reports[1] == mask_error_check(q, k, layout, 0.5)

    def test_default_ratios(self):
        layout = _small_layout()
        q, k, _ = gen_gaussian(layout, 8, 19)
        _, mask_reports = verify_instance(q, k, layout)
        assert [r.keep_ratio for r in mask_reports] == [0.1, 0.25, 0.5]
