import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from draftattn.core import MASKED, full_attention, head_dim_scale, logits, softmax_rows

from oracles import attention_loops, logits_loops, softmax_longdouble


class TestLogits:
    def test_orthonormal_rows_give_identity(self):
        eye = np.eye(2)
        np.testing.assert_array_equal(logits(eye, eye, 1.0), eye)

    def test_zero_queries_give_zeros(self):
        q = np.zeros((3, 4))
        k = np.random.default_rng(0).standard_normal((5, 4))
        np.testing.assert_array_equal(logits(q, k, 1.0), np.zeros((3, 5)))

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(11)
        q = rng.standard_normal((8, 4))
        k = rng.standard_normal((8, 4))
        np.testing.assert_allclose(logits(q, k, 1.0), logits_loops(q, k, 1.0), atol=1e-6)

    def test_default_scale_is_inverse_sqrt_head_dim(self):
        rng = np.random.default_rng(2)
        q = rng.standard_normal((4, 16))
        k = rng.standard_normal((4, 16))
        np.testing.assert_allclose(logits(q, k), logits(q, k, 0.25), rtol=1e-12)

    def test_head_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="head_dim mismatch"):
            logits(np.zeros((2, 3)), np.zeros((2, 4)))

    def test_preserves_single_precision(self):
        q = np.ones((2, 2), dtype=np.float32)
        assert logits(q, q).dtype == np.float32


class TestSoftmaxRows:
    def test_constant_row_is_uniform(self):
        for c in (-3.0, 0.0, 7.5):
            out = softmax_rows(np.full((1, 3), c))
            np.testing.assert_allclose(out, [[1 / 3] * 3], rtol=1e-12)

    def test_single_survivor(self):
        out = softmax_rows(np.array([[0.0, MASKED]]))
        np.testing.assert_array_equal(out, [[1.0, 0.0]])

    def test_matches_high_precision_oracle(self):
        row = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(softmax_rows(row), softmax_longdouble(row), atol=1e-9)

    def test_fully_masked_row_is_zero(self):
        scores = np.array([[MASKED, MASKED], [0.0, 1.0]])
        out = softmax_rows(scores)
        np.testing.assert_array_equal(out[0], [0.0, 0.0])
        assert abs(out[1].sum() - 1.0) < 1e-12

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        out = softmax_rows(rng.standard_normal((20, 7)))
        np.testing.assert_allclose(out.sum(axis=1), np.ones(20), atol=1e-6)
        assert (out >= 0).all()

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=6),
           st.floats(-100, 100))
    @settings(max_examples=50, deadline=None)
    def test_invariant_under_row_shift(self, row, shift):
        base = np.array([row])
        np.testing.assert_allclose(softmax_rows(base + shift), softmax_rows(base),
                                   atol=1e-6)

    def test_extreme_logits_stay_finite(self):
        out = softmax_rows(np.array([[1e4, -1e4, 0.0]]))
        assert np.isfinite(out).all()

    def test_preserves_single_precision(self):
        assert softmax_rows(np.ones((2, 2), dtype=np.float32)).dtype == np.float32


class TestFullAttention:
    def test_single_token_returns_its_value_row(self):
        q = np.array([[2.0, 1.0]])
        v = np.array([[5.0, -1.0, 3.0]])
        np.testing.assert_allclose(full_attention(q, q, v), v, rtol=1e-12)

    def test_identical_keys_average_values(self):
        rng = np.random.default_rng(4)
        q = rng.standard_normal((5, 3))
        k = np.tile(rng.standard_normal((1, 3)), (6, 1))
        v = rng.standard_normal((6, 2))
        expected = np.tile(v.mean(axis=0), (5, 1))
        np.testing.assert_allclose(full_attention(q, k, v), expected, atol=1e-6)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(5)
        q = rng.standard_normal((16, 8))
        k = rng.standard_normal((16, 8))
        v = rng.standard_normal((16, 8))
        scale = head_dim_scale(8)
        np.testing.assert_allclose(full_attention(q, k, v),
                                   attention_loops(q, k, v, scale), atol=1e-5)

    def test_output_rows_inside_value_hull(self):
        rng = np.random.default_rng(6)
        q = rng.standard_normal((32, 4))
        k = rng.standard_normal((32, 4))
        v = rng.standard_normal((32, 5))
        out = full_attention(q, k, v)
        eps = 1e-9
        assert (out <= v.max(axis=0) + eps).all()
        assert (out >= v.min(axis=0) - eps).all()

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 12, 4
        q = rng.standard_normal((n, d))
        k = rng.standard_normal((n, d))
        v = rng.standard_normal((n, d))
        pi = rng.permutation(n)
        direct = full_attention(q[pi], k[pi], v[pi])
        np.testing.assert_allclose(direct, full_attention(q, k, v)[pi], atol=1e-6)

    def test_chunked_equals_unchunked(self):
        rng = np.random.default_rng(7)
        q = rng.standard_normal((37, 6))
        k = rng.standard_normal((37, 6))
        v = rng.standard_normal((37, 6))
        np.testing.assert_allclose(full_attention(q, k, v, chunk_rows=8),
                                   full_attention(q, k, v), rtol=1e-12, atol=1e-12)

    def test_value_row_mismatch_rejected(self):
        with pytest.raises(ValueError, match="rows"):
            full_attention(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((4, 3)))
