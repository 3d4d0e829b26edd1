"""Global top-fraction selection of region pairs and the resulting block mask."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SELECT_MODES = ("logits", "softmax")

# guards against float error in keep_ratio * g**2 (e.g. 0.1 * 100 -> 10.000000000000002)
_CEIL_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Boolean keep/drop decision for every (query region, key region) pair.

    ``threshold`` is the score of the weakest globally selected entry; with
    ``force_row_keep`` the mask may additionally hold each row's argmax, and
    ``forced_row_keeps`` counts how many entries that added beyond the global
    top fraction.
    """

    kept: np.ndarray
    keep_ratio: float
    threshold: float
    forced_row_keeps: int = 0

    def __post_init__(self) -> None:
        kept = self.kept
        if kept.ndim != 2 or kept.shape[0] != kept.shape[1] or kept.dtype != np.bool_:
            raise ValueError(f"kept must be a square boolean matrix, got {kept.dtype} {kept.shape}")

    @property
    def g(self) -> int:
        return self.kept.shape[0]

    @property
    def kept_count(self) -> int:
        return int(self.kept.sum())

    @property
    def row_kept_counts(self) -> np.ndarray:
        return self.kept.sum(axis=1)


def top_fraction_count(num_entries: int, keep_ratio: float) -> int:
    """Number of entries a global top-``keep_ratio`` selection retains."""
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError(f"keep_ratio must be in (0, 1], got {keep_ratio}")
    if num_entries < 1:
        raise ValueError(f"num_entries must be positive, got {num_entries}")
    m = math.ceil(keep_ratio * num_entries - _CEIL_EPS)
    return min(max(m, 1), num_entries)


def select_top_fraction(
    scores: np.ndarray,
    keep_ratio: float,
    force_row_keep: bool = False,
) -> RegionMask:
    """Keep the globally largest ``ceil(keep_ratio * g^2)`` score entries.

    The threshold is the weakest selected score; ties at the threshold are
    resolved toward smaller flat index ``i*g + j``, so the kept count is exact
    even with duplicated scores. ``force_row_keep`` additionally keeps each
    row's argmax (smallest column on ties) so no query region is left without
    a key region.
    """
    scores = np.asarray(scores)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise ValueError(f"expected a square score matrix, got shape {scores.shape}")
    g = scores.shape[0]
    m = top_fraction_count(g * g, keep_ratio)
    flat = scores.reshape(-1)
    # stable argsort of the negated scores: descending, ties by smaller flat index
    order = np.argsort(-flat, kind="stable")
    threshold = float(flat[order[m - 1]])
    kept = np.zeros(g * g, dtype=bool)
    kept[order[:m]] = True
    kept = kept.reshape(g, g)
    forced = 0
    if force_row_keep:
        row_best = np.argmax(scores, axis=1)
        forced = int((~kept[np.arange(g), row_best]).sum())
        kept[np.arange(g), row_best] = True
    kept.setflags(write=False)
    return RegionMask(kept=kept, keep_ratio=float(keep_ratio), threshold=threshold,
                      forced_row_keeps=forced)


def drop_key_regions(mask: RegionMask, dead_columns: np.ndarray) -> RegionMask:
    """Copy of ``mask`` with the given key-region columns forced off.

    Used by the padding path to guarantee regions containing no real tokens
    are never attended to.
    """
    dead_columns = np.asarray(dead_columns)
    kept = mask.kept.copy()
    kept[:, dead_columns] = False
    kept.setflags(write=False)
    return RegionMask(kept=kept, keep_ratio=mask.keep_ratio, threshold=mask.threshold,
                      forced_row_keeps=mask.forced_row_keeps)


def hadamard_masked_logits(scores_full: np.ndarray, mask: RegionMask) -> np.ndarray:
    """Zero every entry of a token-level score matrix whose block is dropped.

    This is the literal elementwise-product semantics used by the error-bound
    checks; attention execution skips dropped blocks instead (see
    draftattn.sparse).
    """
    scores_full = np.asarray(scores_full)
    if scores_full.ndim != 2 or scores_full.shape[0] != scores_full.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {scores_full.shape}")
    n = scores_full.shape[0]
    g = mask.g
    if n % g != 0:
        raise ValueError(f"matrix size {n} is not a multiple of region count {g}")
    p = n // g
    blocks = scores_full.reshape(g, p, g, p)
    out = blocks * mask.kept[:, None, :, None]
    return out.reshape(n, n).astype(scores_full.dtype, copy=False)


def mask_density_stats(mask: RegionMask) -> dict:
    """Occupancy summary: kept fraction and per-row kept-count spread."""
    rows = mask.row_kept_counts
    return {
        "g": mask.g,
        "keep_ratio": mask.keep_ratio,
        "threshold": mask.threshold,
        "kept_count": mask.kept_count,
        "kept_fraction": mask.kept_count / (mask.g * mask.g),
        "row_kept_min": int(rows.min()),
        "row_kept_mean": float(rows.mean()),
        "row_kept_max": int(rows.max()),
        "forced_row_keeps": mask.forced_row_keeps,
    }


def mask_to_json_dict(mask: RegionMask) -> dict:
    """JSON-ready export: metadata plus the kept coordinate list."""
    ii, jj = np.nonzero(mask.kept)
    return {
        "g": mask.g,
        "keep_ratio": mask.keep_ratio,
        "threshold": mask.threshold,
        "kept_count": mask.kept_count,
        "forced_row_keeps": mask.forced_row_keeps,
        "kept": [[int(i), int(j)] for i, j in zip(ii, jj)],
    }


def mask_from_json_dict(data: dict) -> RegionMask:
    g = int(data["g"])
    kept = np.zeros((g, g), dtype=bool)
    for i, j in data["kept"]:
        kept[i, j] = True
    kept.setflags(write=False)
    return RegionMask(kept=kept, keep_ratio=float(data["keep_ratio"]),
                      threshold=float(data["threshold"]),
                      forced_row_keeps=int(data.get("forced_row_keeps", 0)))


def mask_to_bitmap(mask: RegionMask) -> bytes:
    """Row-major packed bits of the kept matrix (executor feed format)."""
    return np.packbits(mask.kept.reshape(-1)).tobytes()


def kept_from_bitmap(raw: bytes, g: int) -> np.ndarray:
    """Unpack a row-major bitmap back into a (g, g) boolean matrix."""
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=g * g)
    return bits.astype(bool).reshape(g, g)
