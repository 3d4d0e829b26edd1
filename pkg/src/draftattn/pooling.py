"""Region pooling of reordered tokens and the low-resolution draft score map."""

from __future__ import annotations

import numpy as np

from .core import head_dim_scale, logits, softmax_rows

POOL_MODES = ("average", "max")


def pool_regions(x: np.ndarray, region_size: int, mode: str = "average") -> np.ndarray:
    """Reduce contiguous blocks of ``region_size`` rows to one row each.

    Input must already be reordered so each region occupies a contiguous row
    range; ``(g*p, d) -> (g, d)``. ``average`` takes the arithmetic mean,
    ``max`` the coordinatewise maximum.
    """
    if mode not in POOL_MODES:
        raise ValueError(f"mode must be one of {POOL_MODES}, got {mode!r}")
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"expected 2-d input, got shape {x.shape}")
    if region_size < 1:
        raise ValueError(f"region_size must be positive, got {region_size}")
    n, d = x.shape
    if n % region_size != 0:
        raise ValueError(f"row count {n} is not a multiple of region_size {region_size}")
    grouped = x.reshape(n // region_size, region_size, d)
    if mode == "average":
        return grouped.mean(axis=1)
    return grouped.max(axis=1)


def draft_logits(
    q_pooled: np.ndarray,
    k_pooled: np.ndarray,
    scale: float | None = None,
    head_dim: int | None = None,
) -> np.ndarray:
    """Score matrix of the pooled sequences: ``scale * q_pooled k_pooled^T``.

    ``scale=None`` uses ``1/sqrt(d)`` of the pooled vectors, which matches the
    full-resolution scale because pooling keeps the head dimension; pass
    ``head_dim`` to spell that out, or an explicit ``scale`` (the error-bound
    checks use 1).

    With average pooling and a common scale, entry ``(i, j)`` equals the mean
    of the full-resolution score matrix over block ``(i, j)`` exactly (up to
    roundoff), because pooling is a row average and the score map is bilinear.
    """
    if scale is not None and head_dim is not None:
        raise ValueError("pass at most one of scale and head_dim")
    if head_dim is not None:
        scale = head_dim_scale(head_dim)
    return logits(q_pooled, k_pooled, scale)


def draft_attention_map(
    q_pooled: np.ndarray,
    k_pooled: np.ndarray,
    scale: float | None = None,
) -> np.ndarray:
    """Row-softmaxed draft map of the pooled sequences."""
    return softmax_rows(draft_logits(q_pooled, k_pooled, scale))


def block_mean(full: np.ndarray, region_size: int) -> np.ndarray:
    """Mean over each ``region_size x region_size`` tile of a tiled matrix.

    The reference that the average-pooled draft scores are compared against:
    pooling inputs first and then scoring must agree with scoring first and
    averaging each block.
    """
    full = np.asarray(full)
    if full.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {full.shape}")
    rows, cols = full.shape
    if region_size < 1 or rows % region_size != 0 or cols % region_size != 0:
        raise ValueError(f"shape {full.shape} is not tiled by region_size {region_size}")
    gr = rows // region_size
    gc = cols // region_size
    return full.reshape(gr, region_size, gc, region_size).mean(axis=(1, 3))
