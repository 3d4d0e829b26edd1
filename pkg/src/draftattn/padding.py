"""Zero-padding of token grids whose sides the patch size does not divide.

Padded tokens are masked out of all attention: they are excluded from pooling
averages, never receive attention weight as keys, regions made entirely of
padding are force-dropped, and their output rows are discarded on restore.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import head_dim_scale, softmax_rows
from .layout import LatentLayout, gen_reorder_index, permute_rows
from .masking import drop_key_regions, select_top_fraction
from .pooling import draft_logits
from .sparse import block_sparse_attention, draft_sparse_attention


@dataclass(frozen=True, eq=False)
class PadPlan:
    """Padded geometry plus the validity of each padded-grid token.

    ``valid`` is indexed in the padded grid's original (un-reordered) token
    order; its true positions enumerate the real tokens in their original
    row-major order.
    """

    frames: int
    height: int
    width: int
    layout: LatentLayout
    valid: np.ndarray

    @property
    def num_valid(self) -> int:
        return int(self.valid.sum())

    @property
    def is_identity(self) -> bool:
        return bool(self.valid.all())


def pad_plan(frames: int, height: int, width: int, patch_h: int, patch_w: int) -> PadPlan:
    """Smallest patch-divisible grid containing (height, width), plus validity."""
    if min(frames, height, width, patch_h, patch_w) < 1:
        raise ValueError("all grid dimensions must be positive")
    padded_h = -(-height // patch_h) * patch_h
    padded_w = -(-width // patch_w) * patch_w
    layout = LatentLayout(frames, padded_h, padded_w, patch_h, patch_w)
    ys, xs = np.mgrid[0:padded_h, 0:padded_w]
    frame_valid = ((ys < height) & (xs < width)).reshape(-1)
    valid = np.tile(frame_valid, frames)
    valid.setflags(write=False)
    return PadPlan(frames=frames, height=height, width=width, layout=layout, valid=valid)


def embed_rows(x: np.ndarray, plan: PadPlan) -> np.ndarray:
    """Scatter real-token rows into a zero-filled padded-grid matrix."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != plan.num_valid:
        raise ValueError(f"expected ({plan.num_valid}, d) real-token rows, got {x.shape}")
    out = np.zeros((plan.layout.num_tokens, x.shape[1]), dtype=x.dtype)
    out[plan.valid] = x
    return out


def extract_rows(x_padded: np.ndarray, plan: PadPlan) -> np.ndarray:
    """Keep only real-token rows, restoring the original row count."""
    x_padded = np.asarray(x_padded)
    if x_padded.shape[0] != plan.layout.num_tokens:
        raise ValueError(
            f"expected {plan.layout.num_tokens} padded rows, got {x_padded.shape[0]}")
    return x_padded[plan.valid]


def pool_regions_valid(x_r: np.ndarray, valid_r: np.ndarray, region_size: int) -> np.ndarray:
    """Average each contiguous region over its valid rows only.

    Regions with no valid rows pool to zero; their key blocks are dropped
    separately, so the zeros never influence anything.
    """
    x_r = np.asarray(x_r)
    valid_r = np.asarray(valid_r, dtype=bool)
    n, d = x_r.shape
    if valid_r.shape != (n,) or n % region_size != 0:
        raise ValueError("rows, validity, and region size are inconsistent")
    g = n // region_size
    counts = valid_r.reshape(g, region_size).sum(axis=1)
    sums = (x_r * valid_r[:, None]).reshape(g, region_size, d).sum(axis=1)
    return sums / np.maximum(counts, 1)[:, None]


def padded_sparse_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    frames: int,
    height: int,
    width: int,
    patch_h: int,
    patch_w: int,
    sparsity: float,
    scale: float | None = None,
    pool_mode: str = "average",
    select_on: str = "logits",
    force_row_keep: bool = True,
    two_pass: bool = False,
    return_details: bool = False,
):
    """End-to-end pipeline for grids of any height and width.

    Already-divisible grids take the direct path. Otherwise inputs are
    zero-embedded into the padded grid, pooling averages run over real tokens
    only, all-padding key regions are force-dropped, padded keys are excluded
    from the executor's softmax, and padded output rows are discarded.

    The padded path supports average pooling only: a coordinatewise max over
    a partially padded region has no principled treatment of missing tokens.
    """
    from .sparse import PipelineResult, flops_count
    from .masking import mask_density_stats

    if height % patch_h == 0 and width % patch_w == 0:
        layout = LatentLayout(frames, height, width, patch_h, patch_w)
        return draft_sparse_attention(q, k, v, layout, sparsity, scale=scale,
                                      pool_mode=pool_mode, select_on=select_on,
                                      force_row_keep=force_row_keep,
                                      two_pass=two_pass, return_details=return_details)
    if pool_mode != "average":
        raise ValueError("padded grids support average pooling only")

    plan = pad_plan(frames, height, width, patch_h, patch_w)
    layout = plan.layout
    if scale is None:
        scale = head_dim_scale(np.asarray(q).shape[1])

    perm = gen_reorder_index(layout)
    q_r = permute_rows(embed_rows(q, plan), perm)
    k_r = permute_rows(embed_rows(k, plan), perm)
    v_r = permute_rows(embed_rows(v, plan), perm)
    valid_r = permute_rows(plan.valid, perm)

    p = layout.region_size
    basis = draft_logits(pool_regions_valid(q_r, valid_r, p),
                         pool_regions_valid(k_r, valid_r, p), scale)
    if select_on == "softmax":
        basis = softmax_rows(basis)
    mask = select_top_fraction(basis, 1.0 - sparsity, force_row_keep)
    dead = np.flatnonzero(valid_r.reshape(layout.num_regions, p).sum(axis=1) == 0)
    if dead.size:
        mask = drop_key_regions(mask, dead)

    out_r = block_sparse_attention(q_r, k_r, v_r, mask, scale, key_valid=valid_r,
                                   two_pass=two_pass)
    out = extract_rows(permute_rows(out_r, perm.inverse), plan)
    if not return_details:
        return out
    return PipelineResult(
        output=out,
        mask=mask,
        flops=flops_count(layout, np.asarray(q).shape[1], kept_count=mask.kept_count),
        mask_stats=mask_density_stats(mask),
    )
