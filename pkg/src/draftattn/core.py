"""Dense scaled-dot-product attention primitives shared by every stage."""

from __future__ import annotations

import math

import numpy as np

# Sentinel for masked-out logits. exp(MASKED) underflows to exactly 0.
MASKED = float("-inf")


def head_dim_scale(head_dim: int) -> float:
    """Standard attention temperature: 1/sqrt(head_dim)."""
    if head_dim < 1:
        raise ValueError(f"head_dim must be positive, got {head_dim}")
    return 1.0 / math.sqrt(head_dim)


def logits(q: np.ndarray, k: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Scaled score matrix ``scale * q @ k.T``.

    ``scale=None`` uses ``1/sqrt(d)`` with ``d`` taken from the trailing axis.
    """
    q = np.asarray(q)
    k = np.asarray(k)
    if q.ndim != 2 or k.ndim != 2:
        raise ValueError(f"expected 2-d q and k, got {q.shape} and {k.shape}")
    if q.shape[1] != k.shape[1]:
        raise ValueError(f"head_dim mismatch: q has {q.shape[1]}, k has {k.shape[1]}")
    if scale is None:
        scale = head_dim_scale(q.shape[1])
    out = q @ k.T
    out *= np.asarray(scale, dtype=out.dtype)
    return out


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Numerically stable row softmax.

    Rows whose entries are all ``-inf`` (fully masked) come back as all-zero
    rather than NaN, so downstream weighted sums simply contribute nothing.
    """
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ValueError(f"expected a 2-d score matrix, got shape {scores.shape}")
    row_max = scores.max(axis=1, keepdims=True)
    alive = np.isfinite(row_max)
    # shift by 0 for dead rows so exp(-inf - 0) = 0 instead of exp(nan)
    shift = np.where(alive, row_max, 0.0)
    expd = np.exp(scores - shift)
    denom = expd.sum(axis=1, keepdims=True)
    denom = np.where(alive, denom, 1.0)
    return (expd / denom).astype(scores.dtype, copy=False)


def full_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    scale: float | None = None,
    chunk_rows: int | None = None,
) -> np.ndarray:
    """Dense reference attention: ``softmax(scale * q k^T) v``.

    ``chunk_rows`` processes query rows in slabs of that size, bounding peak
    memory at ``chunk_rows * len(k)`` score entries instead of the full n^2.
    """
    q = np.asarray(q)
    v = np.asarray(v)
    if v.ndim != 2:
        raise ValueError(f"expected 2-d v, got shape {v.shape}")
    if v.shape[0] != np.asarray(k).shape[0]:
        raise ValueError(f"k rows {np.asarray(k).shape[0]} != v rows {v.shape[0]}")
    if chunk_rows is None or chunk_rows >= q.shape[0]:
        return softmax_rows(logits(q, k, scale)) @ v
    if chunk_rows < 1:
        raise ValueError(f"chunk_rows must be positive, got {chunk_rows}")
    out = np.empty((q.shape[0], v.shape[1]), dtype=np.result_type(q, k, v))
    for start in range(0, q.shape[0], chunk_rows):
        stop = min(start + chunk_rows, q.shape[0])
        out[start:stop] = softmax_rows(logits(q[start:stop], k, scale)) @ v
    return out
