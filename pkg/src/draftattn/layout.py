"""Token-grid geometry and the patch-contiguity reorder/restore permutations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LatentLayout:
    """Geometry of a latent video token grid partitioned into pooling patches.

    Tokens are flattened frame by frame, row-major within each frame. Every
    frame is split into non-overlapping ``patch_h x patch_w`` patches; a patch
    is a "region", the unit of pooling and of mask granularity.
    """

    frames: int
    height: int
    width: int
    patch_h: int
    patch_w: int

    def __post_init__(self) -> None:
        for name in ("frames", "height", "width", "patch_h", "patch_w"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.height % self.patch_h != 0:
            raise ValueError(
                f"patch_h={self.patch_h} does not divide height={self.height}; "
                "pad the grid first (see draftattn.padding)"
            )
        if self.width % self.patch_w != 0:
            raise ValueError(
                f"patch_w={self.patch_w} does not divide width={self.width}; "
                "pad the grid first (see draftattn.padding)"
            )

    @property
    def num_tokens(self) -> int:
        return self.frames * self.height * self.width

    @property
    def region_size(self) -> int:
        """Tokens per region (patch area)."""
        return self.patch_h * self.patch_w

    @property
    def patches_h(self) -> int:
        return self.height // self.patch_h

    @property
    def patches_w(self) -> int:
        return self.width // self.patch_w

    @property
    def num_regions(self) -> int:
        return self.frames * self.patches_h * self.patches_w


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on token indices together with its inverse.

    ``forward`` holds gather indices: row ``i`` of the permuted matrix is row
    ``forward[i]`` of the original. ``inverse`` undoes it.
    """

    forward: np.ndarray
    inverse: np.ndarray

    @classmethod
    def from_forward(cls, forward: np.ndarray) -> "Permutation":
        forward = np.asarray(forward, dtype=np.int64)
        if forward.ndim != 1:
            raise ValueError("permutation indices must be one-dimensional")
        inverse = invert_permutation(forward)
        forward = forward.copy()
        forward.setflags(write=False)
        inverse.setflags(write=False)
        return cls(forward=forward, inverse=inverse)

    def __len__(self) -> int:
        return self.forward.shape[0]


def invert_permutation(forward: np.ndarray) -> np.ndarray:
    """Scatter-based inverse: ``out[forward[i]] = i``. Rejects non-bijections."""
    forward = np.asarray(forward, dtype=np.int64)
    n = forward.shape[0]
    if n == 0:
        raise ValueError("empty permutation")
    if forward.min() < 0 or forward.max() >= n:
        raise ValueError("permutation indices out of range")
    counts = np.bincount(forward, minlength=n)
    if (counts != 1).any():
        dup = int(np.flatnonzero(counts > 1)[0])
        raise ValueError(f"duplicate index {dup}: input is not a bijection")
    inverse = np.empty(n, dtype=np.int64)
    inverse[forward] = np.arange(n, dtype=np.int64)
    return inverse


def gen_reorder_index(layout: LatentLayout) -> Permutation:
    """Permutation that makes every patch's tokens contiguous.

    Visits frames outermost, then patch rows, patch columns, and finally the
    rows/columns inside each patch, appending the original flat index of each
    visited token. After gathering with the result, region ``i`` occupies the
    contiguous row range ``[i * region_size, (i + 1) * region_size)``.
    """
    idx = np.arange(layout.num_tokens, dtype=np.int64).reshape(
        layout.frames,
        layout.patches_h,
        layout.patch_h,
        layout.patches_w,
        layout.patch_w,
    )
    # reorder loop nesting to (frame, patch row, patch col, in-patch row, in-patch col)
    forward = idx.transpose(0, 1, 3, 2, 4).reshape(-1)
    return Permutation.from_forward(forward)


def gen_restore_index(perm: Permutation | np.ndarray) -> Permutation:
    """Permutation undoing ``perm``; accepts a Permutation or raw forward indices."""
    if isinstance(perm, Permutation):
        return Permutation.from_forward(perm.inverse)
    return Permutation.from_forward(invert_permutation(np.asarray(perm)))


def permute_rows(x: np.ndarray, perm: Permutation | np.ndarray) -> np.ndarray:
    """Gather rows: ``out[i] = x[forward[i]]``."""
    forward = perm.forward if isinstance(perm, Permutation) else np.asarray(perm)
    x = np.asarray(x)
    if x.shape[0] != forward.shape[0]:
        raise ValueError(
            f"row count {x.shape[0]} does not match permutation length {forward.shape[0]}"
        )
    return x[forward]
