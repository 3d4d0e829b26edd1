"""Block-skipping sparse attention executor and the end-to-end pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import head_dim_scale, softmax_rows
from .layout import LatentLayout, gen_reorder_index, permute_rows
from .masking import RegionMask, select_top_fraction, mask_density_stats
from .pooling import draft_logits, pool_regions


@dataclass(frozen=True)
class FlopsReport:
    """Matmul FLOP counts (2*m*n*k per m x k times k x n product).

    Softmax, pooling, and permutation costs are excluded; the two attention
    matmul stages dominate. ``overhead_ratio`` is the draft-map cost relative
    to the full first-stage cost; ``total_ratio`` is (draft + sparse first
    stage) relative to the full first stage.
    """

    full_logits_flops: int
    full_av_flops: int
    draft_flops: int
    sparse_logits_flops: int
    sparse_av_flops: int
    overhead_ratio: float
    total_ratio: float

    def as_dict(self) -> dict:
        return {
            "full_logits_flops": self.full_logits_flops,
            "full_av_flops": self.full_av_flops,
            "draft_flops": self.draft_flops,
            "sparse_logits_flops": self.sparse_logits_flops,
            "sparse_av_flops": self.sparse_av_flops,
            "overhead_ratio": self.overhead_ratio,
            "total_ratio": self.total_ratio,
        }


def flops_count(
    layout: LatentLayout,
    head_dim: int,
    sparsity: float | None = None,
    kept_count: int | None = None,
    force_row_keep_extras: int = 0,
) -> FlopsReport:
    """FLOP accounting for one head.

    Pass either ``sparsity`` (kept blocks then follow the top-fraction count
    plus ``force_row_keep_extras``) or an explicit ``kept_count`` from an
    actual mask.
    """
    from .masking import top_fraction_count

    if head_dim < 1:
        raise ValueError(f"head_dim must be positive, got {head_dim}")
    n = layout.num_tokens
    g = layout.num_regions
    p = layout.region_size
    if kept_count is None:
        if sparsity is None:
            raise ValueError("pass sparsity or kept_count")
        if not 0.0 <= sparsity < 1.0:
            raise ValueError(f"sparsity must be in [0, 1), got {sparsity}")
        kept_count = top_fraction_count(g * g, 1.0 - sparsity) + force_row_keep_extras
        kept_count = min(kept_count, g * g)
    elif not 0 <= kept_count <= g * g:
        raise ValueError(f"kept_count {kept_count} outside [0, {g * g}]")
    full_logits = 2 * n * n * head_dim
    draft = 2 * g * g * head_dim
    sparse_stage = 2 * kept_count * p * p * head_dim
    return FlopsReport(
        full_logits_flops=full_logits,
        full_av_flops=full_logits,
        draft_flops=draft,
        sparse_logits_flops=sparse_stage,
        sparse_av_flops=sparse_stage,
        overhead_ratio=draft / full_logits,
        total_ratio=(draft + sparse_stage) / full_logits,
    )


def block_sparse_attention(
    q_r: np.ndarray,
    k_r: np.ndarray,
    v_r: np.ndarray,
    mask: RegionMask,
    scale: float | None = None,
    key_valid: np.ndarray | None = None,
    two_pass: bool = False,
) -> np.ndarray:
    """Attention over reordered inputs, computing only kept key blocks.

    Per query block, kept key blocks are visited in ascending index order with
    a streaming row softmax (running max, running denominator), so dropped
    blocks are never materialized and the result renormalizes over kept keys
    only. Rows of a fully dropped query block come back as zeros.

    ``key_valid`` marks key rows (reordered order) allowed to receive
    attention; invalid keys are excluded from the softmax. ``two_pass``
    switches to a materialize-then-normalize variant for debugging.
    """
    q_r = np.asarray(q_r)
    k_r = np.asarray(k_r)
    v_r = np.asarray(v_r)
    if q_r.ndim != 2 or k_r.ndim != 2 or v_r.ndim != 2:
        raise ValueError("q, k, v must be 2-d")
    n, d = q_r.shape
    if k_r.shape != (n, d):
        raise ValueError(f"k shape {k_r.shape} does not match q shape {q_r.shape}")
    if v_r.shape[0] != n:
        raise ValueError(f"v rows {v_r.shape[0]} != key rows {n}")
    g = mask.g
    if n % g != 0:
        raise ValueError(f"token count {n} is not a multiple of region count {g}")
    p = n // g
    if key_valid is not None:
        key_valid = np.asarray(key_valid, dtype=bool)
        if key_valid.shape != (n,):
            raise ValueError(f"key_valid shape {key_valid.shape} != ({n},)")
    if scale is None:
        scale = head_dim_scale(d)

    dt = np.result_type(q_r, k_r, v_r)
    dv = v_r.shape[1]
    out = np.zeros((n, dv), dtype=dt)
    scale = dt.type(scale)
    neg_inf = dt.type(-np.inf)

    for i in range(g):
        cols = np.flatnonzero(mask.kept[i])
        if cols.size == 0:
            continue
        q_blk = q_r[i * p:(i + 1) * p]
        if two_pass:
            out[i * p:(i + 1) * p] = _two_pass_block(
                q_blk, k_r, v_r, cols, p, scale, neg_inf, key_valid)
            continue
        m = np.full(p, -np.inf, dtype=dt)
        l = np.zeros(p, dtype=dt)
        acc = np.zeros((p, dv), dtype=dt)
        for j in cols:
            s = q_blk @ k_r[j * p:(j + 1) * p].T
            s *= scale
            if key_valid is not None:
                invalid = ~key_valid[j * p:(j + 1) * p]
                if invalid.all():
                    continue
                s[:, invalid] = neg_inf
            m_new = np.maximum(m, s.max(axis=1))
            # fully -inf rows would make m_new - m_new produce NaN; shift them by 0
            shift = np.where(np.isfinite(m_new), m_new, 0.0).astype(dt, copy=False)
            alpha = np.where(np.isfinite(m), np.exp(m - shift), 0.0).astype(dt, copy=False)
            w = np.exp(s - shift[:, None])
            l = l * alpha + w.sum(axis=1)
            acc *= alpha[:, None]
            acc += w @ v_r[j * p:(j + 1) * p]
            m = m_new
        live = l > 0
        out[i * p:(i + 1) * p][live] = acc[live] / l[live, None]
    return out


def _two_pass_block(q_blk, k_r, v_r, cols, p, scale, neg_inf, key_valid):
    """Reference path: materialize kept logit slabs, then one normalization."""
    slabs = []
    for j in cols:
        s = q_blk @ k_r[j * p:(j + 1) * p].T
        s *= scale
        if key_valid is not None:
            s[:, ~key_valid[j * p:(j + 1) * p]] = neg_inf
        slabs.append(s)
    weights = softmax_rows(np.concatenate(slabs, axis=1))
    kept_keys = np.concatenate([np.arange(j * p, (j + 1) * p) for j in cols])
    return weights @ v_r[kept_keys]


@dataclass(frozen=True, eq=False)
class PipelineResult:
    """End-to-end pipeline output plus the artifacts that produced it."""

    output: np.ndarray
    mask: RegionMask
    flops: FlopsReport
    mask_stats: dict


def draft_sparse_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    layout: LatentLayout,
    sparsity: float,
    scale: float | None = None,
    pool_mode: str = "average",
    select_on: str = "logits",
    force_row_keep: bool = True,
    two_pass: bool = False,
    return_details: bool = False,
):
    """Full pipeline on original-order inputs.

    Reorders tokens so regions are contiguous, pools queries/keys per region,
    scores the pooled sequences, keeps the top ``1 - sparsity`` fraction of
    region pairs, runs the block-skipping executor, and restores the original
    row order. ``select_on`` ranks region pairs by raw pooled scores
    ("logits") or their row softmax ("softmax").
    """
    if not 0.0 <= sparsity < 1.0:
        raise ValueError(f"sparsity must be in [0, 1), got {sparsity}")
    if select_on not in ("logits", "softmax"):
        raise ValueError(f"select_on must be 'logits' or 'softmax', got {select_on!r}")
    q = np.asarray(q)
    if scale is None:
        scale = head_dim_scale(q.shape[1])
    if q.shape[0] != layout.num_tokens:
        raise ValueError(f"q rows {q.shape[0]} != layout token count {layout.num_tokens}")

    perm = gen_reorder_index(layout)
    q_r = permute_rows(q, perm)
    k_r = permute_rows(np.asarray(k), perm)
    v_r = permute_rows(np.asarray(v), perm)

    p = layout.region_size
    q_pooled = pool_regions(q_r, p, pool_mode)
    k_pooled = pool_regions(k_r, p, pool_mode)
    basis = draft_logits(q_pooled, k_pooled, scale)
    if select_on == "softmax":
        basis = softmax_rows(basis)
    mask = select_top_fraction(basis, 1.0 - sparsity, force_row_keep)

    out_r = block_sparse_attention(q_r, k_r, v_r, mask, scale, two_pass=two_pass)
    out = permute_rows(out_r, perm.inverse)
    if not return_details:
        return out
    return PipelineResult(
        output=out,
        mask=mask,
        flops=flops_count(layout, q.shape[1], kept_count=mask.kept_count),
        mask_stats=mask_density_stats(mask),
    )


def multi_head_sparse_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    layout: LatentLayout,
    sparsity: float,
    shared_head_mask: bool = False,
    scale: float | None = None,
    pool_mode: str = "average",
    select_on: str = "logits",
    force_row_keep: bool = True,
) -> np.ndarray:
    """Loop the single-head pipeline over stacked (heads, n, d) inputs.

    By default every head selects its own mask from its own draft scores;
    ``shared_head_mask`` averages the per-head selection scores first and
    applies one mask to all heads.
    """
    q = np.asarray(q)
    k = np.asarray(k)
    v = np.asarray(v)
    if q.ndim != 3:
        raise ValueError(f"expected (heads, n, d) inputs, got shape {q.shape}")
    heads = q.shape[0]
    if not shared_head_mask:
        return np.stack([
            draft_sparse_attention(q[h], k[h], v[h], layout, sparsity, scale=scale,
                                   pool_mode=pool_mode, select_on=select_on,
                                   force_row_keep=force_row_keep)
            for h in range(heads)
        ])

    if scale is None:
        scale = head_dim_scale(q.shape[2])
    perm = gen_reorder_index(layout)
    p = layout.region_size
    basis_sum = None
    reordered = []
    for h in range(heads):
        q_r = permute_rows(q[h], perm)
        k_r = permute_rows(k[h], perm)
        v_r = permute_rows(v[h], perm)
        reordered.append((q_r, k_r, v_r))
        basis = draft_logits(pool_regions(q_r, p, pool_mode),
                             pool_regions(k_r, p, pool_mode), scale)
        if select_on == "softmax":
            basis = softmax_rows(basis)
        basis_sum = basis if basis_sum is None else basis_sum + basis
    mask = select_top_fraction(basis_sum / heads, 1.0 - sparsity, force_row_keep)
    out = np.stack([
        permute_rows(block_sparse_attention(q_r, k_r, v_r, mask, scale), perm.inverse)
        for q_r, k_r, v_r in reordered
    ])
    return out
