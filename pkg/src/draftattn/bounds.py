"""Empirical verification of the two Frobenius-norm error bounds.

Both bounds compare the token-level score matrix S (scale-1 inner products)
against coarse surrogates built from region-averaged inputs:

  pooling error:  ||S - S_block||_F <= delta * n, where S_block is the
      block-constant matrix of region-pair means and delta is the worst
      absolute deviation of any entry from its block mean;

  masking error:  ||S - S (.) M||_F <= n * (delta + t) * sqrt(1 - r), where M
      keeps the top r fraction of region pairs and t is the weakest kept
      region score.

The first inequality is unconditional. The second rests on a pointwise step,
|S_uv| <= delta + t for every dropped entry, that silently needs every
dropped block mean to lie within [-t, t]; blocks whose mean is below -t break
the step, and with zero-mean data that happens routinely even though the
Frobenius inequality itself still holds in practice. Reports carry both the
Frobenius comparison and the pointwise margin so the distinction stays
visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import logits, softmax_rows
from .layout import LatentLayout, gen_reorder_index, permute_rows
from .masking import RegionMask, hadamard_masked_logits, select_top_fraction
from .pooling import pool_regions

# forgive float roundoff when classifying an inequality as violated
_REL_TOL = 1e-9


@dataclass(frozen=True)
class DraftErrorReport:
    """Pooling-error bound check on one instance."""

    num_tokens: int
    num_regions: int
    region_size: int
    delta: float
    frob_error: float
    bound: float
    slack: float
    holds: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class MaskErrorReport:
    """Masking-error bound check on one instance at one keep ratio.

    ``pointwise_holds`` tracks the per-entry condition |S_uv| <= delta + t on
    dropped entries; ``softmax_frob_error`` is informational only (the bounds
    are statements about scores, not attention weights).
    """

    num_tokens: int
    num_regions: int
    region_size: int
    keep_ratio: float
    delta: float
    threshold: float
    frob_error: float
    bound: float
    slack: float
    holds: bool
    dropped_abs_max: float
    pointwise_bound: float
    pointwise_holds: bool
    softmax_frob_error: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def block_broadcast(pooled: np.ndarray, region_size: int) -> np.ndarray:
    """Expand a (g, g) matrix to block-constant (g*p, g*p)."""
    pooled = np.asarray(pooled)
    return np.repeat(np.repeat(pooled, region_size, axis=0), region_size, axis=1)


def compute_delta(scores_full: np.ndarray, scores_pooled: np.ndarray) -> float:
    """Worst absolute deviation of any entry from its region-pair score."""
    scores_full = np.asarray(scores_full)
    scores_pooled = np.asarray(scores_pooled)
    n = scores_full.shape[0]
    g = scores_pooled.shape[0]
    if scores_full.shape != (n, n) or scores_pooled.shape != (g, g) or n % g != 0:
        raise ValueError(
            f"incompatible shapes {scores_full.shape} and {scores_pooled.shape}")
    p = n // g
    blocks = scores_full.reshape(g, p, g, p)
    return float(np.abs(blocks - scores_pooled[:, None, :, None]).max())


def _score_matrices(q, k, layout, scale):
    """Reorder inputs, then build the token-level and region-level scores."""
    perm = gen_reorder_index(layout)
    q_r = permute_rows(np.asarray(q, dtype=np.float64), perm)
    k_r = permute_rows(np.asarray(k, dtype=np.float64), perm)
    p = layout.region_size
    full = logits(q_r, k_r, scale)
    pooled = logits(pool_regions(q_r, p), pool_regions(k_r, p), scale)
    return full, pooled


def draft_error_check(
    q: np.ndarray,
    k: np.ndarray,
    layout: LatentLayout,
    scale: float = 1.0,
) -> DraftErrorReport:
    """Check the pooling-error bound on original-order inputs."""
    full, pooled = _score_matrices(q, k, layout, scale)
    n = layout.num_tokens
    p = layout.region_size
    delta = compute_delta(full, pooled)
    err = float(np.linalg.norm(full - block_broadcast(pooled, p), "fro"))
    bound = delta * n
    slack = bound - err
    return DraftErrorReport(
        num_tokens=n, num_regions=layout.num_regions, region_size=p,
        delta=delta, frob_error=err, bound=bound, slack=slack,
        holds=bool(slack >= -_REL_TOL * max(1.0, abs(bound))),
    )


def mask_error_check(
    q: np.ndarray,
    k: np.ndarray,
    layout: LatentLayout,
    keep_ratio: float,
    scale: float = 1.0,
) -> MaskErrorReport:
    """Check the masking-error bound at one keep ratio."""
    full, pooled = _score_matrices(q, k, layout, scale)
    return _mask_report(full, pooled, layout, keep_ratio)


def _mask_report(full, pooled, layout, keep_ratio) -> MaskErrorReport:
    n = layout.num_tokens
    p = layout.region_size
    delta = compute_delta(full, pooled)
    mask = select_top_fraction(pooled, keep_ratio, force_row_keep=False)
    masked = hadamard_masked_logits(full, mask)
    err = float(np.linalg.norm(full - masked, "fro"))
    bound = n * (delta + mask.threshold) * math.sqrt(1.0 - keep_ratio)
    slack = bound - err

    dropped = ~mask.kept
    if dropped.any():
        blocks = np.abs(full.reshape(mask.g, p, mask.g, p))
        dropped_abs_max = float((blocks * dropped[:, None, :, None]).max())
    else:
        dropped_abs_max = 0.0
    pointwise_bound = delta + mask.threshold
    pointwise_holds = bool(
        dropped_abs_max <= pointwise_bound + _REL_TOL * max(1.0, abs(pointwise_bound)))

    softmax_err = float(np.linalg.norm(softmax_rows(full) - softmax_rows(masked), "fro"))
    return MaskErrorReport(
        num_tokens=n, num_regions=layout.num_regions, region_size=p,
        keep_ratio=float(keep_ratio), delta=delta, threshold=mask.threshold,
        frob_error=err, bound=bound, slack=slack,
        holds=bool(slack >= -_REL_TOL * max(1.0, abs(bound))),
        dropped_abs_max=dropped_abs_max, pointwise_bound=pointwise_bound,
        pointwise_holds=pointwise_holds, softmax_frob_error=softmax_err,
    )


def verify_instance(
    q: np.ndarray,
    k: np.ndarray,
    layout: LatentLayout,
    keep_ratios: tuple[float, ...] = (0.1, 0.25, 0.5),
    scale: float = 1.0,
) -> tuple[DraftErrorReport, list[MaskErrorReport]]:
    """Run both bound checks on one instance, sharing the score matrices."""
    full, pooled = _score_matrices(q, k, layout, scale)
    n = layout.num_tokens
    p = layout.region_size
    delta = compute_delta(full, pooled)
    err = float(np.linalg.norm(full - block_broadcast(pooled, p), "fro"))
    bound = delta * n
    draft_report = DraftErrorReport(
        num_tokens=n, num_regions=layout.num_regions, region_size=p,
        delta=delta, frob_error=err, bound=bound, slack=bound - err,
        holds=bool(bound - err >= -_REL_TOL * max(1.0, abs(bound))),
    )
    mask_reports = [_mask_report(full, pooled, layout, r) for r in keep_ratios]
    return draft_report, mask_reports
