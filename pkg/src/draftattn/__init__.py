"""Draft-guided block-sparse attention with verified error bounds.

A low-resolution score map over region-pooled queries and keys ranks region
pairs; the top fraction survives as a block mask; a patch-contiguity token
reordering makes each region a contiguous memory block; a block-skipping
executor with a streaming softmax computes attention over kept blocks only.
"""

from .bounds import (
    DraftErrorReport,
    MaskErrorReport,
    block_broadcast,
    compute_delta,
    draft_error_check,
    mask_error_check,
    verify_instance,
)
from .config import PRESETS, RunConfig, apply_preset
from .core import MASKED, full_attention, head_dim_scale, logits, softmax_rows
from .layout import (
    LatentLayout,
    Permutation,
    gen_reorder_index,
    gen_restore_index,
    invert_permutation,
    permute_rows,
)
from .masking import (
    RegionMask,
    hadamard_masked_logits,
    mask_density_stats,
    select_top_fraction,
    top_fraction_count,
)
from .matio import load_matrix, save_matrix
from .padding import PadPlan, pad_plan, padded_sparse_attention
from .pooling import block_mean, draft_attention_map, draft_logits, pool_regions
from .sparse import (
    FlopsReport,
    block_sparse_attention,
    draft_sparse_attention,
    flops_count,
    multi_head_sparse_attention,
)
from .synth import gen_gaussian, gen_inputs, gen_smooth, make_rng

__version__ = "0.1.0"

__all__ = [
    "DraftErrorReport", "MaskErrorReport", "block_broadcast", "compute_delta",
    "draft_error_check", "mask_error_check", "verify_instance",
    "PRESETS", "RunConfig", "apply_preset",
    "MASKED", "full_attention", "head_dim_scale", "logits", "softmax_rows",
    "LatentLayout", "Permutation", "gen_reorder_index", "gen_restore_index",
    "invert_permutation", "permute_rows",
    "RegionMask", "hadamard_masked_logits", "mask_density_stats",
    "select_top_fraction", "top_fraction_count",
    "load_matrix", "save_matrix",
    "PadPlan", "pad_plan", "padded_sparse_attention",
    "block_mean", "draft_attention_map", "draft_logits", "pool_regions",
    "FlopsReport", "block_sparse_attention", "draft_sparse_attention",
    "flops_count", "multi_head_sparse_attention",
    "gen_gaussian", "gen_inputs", "gen_smooth", "make_rng",
    "__version__",
]
