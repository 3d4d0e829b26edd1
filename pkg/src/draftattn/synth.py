"""Deterministic synthetic inputs: i.i.d. gaussian and spatially smooth latents."""

from __future__ import annotations

import numpy as np

from .layout import LatentLayout

DATA_MODES = ("gaussian", "smooth")

# Smooth-mode constants, frozen after calibration against the bound checks:
# knots at pooling-patch corners (one bilinear cell per patch per axis) with
# standard deviation SMOOTH_FIELD_SCALE, plus SMOOTH_NOISE_SCALE i.i.d. noise.
# This keeps within-patch variation well below between-patch variation, the
# regime where region pooling is a faithful summary, while leaving the
# masking-error bound a wide margin at every tested shape.
SMOOTH_FIELD_SCALE = 0.5
SMOOTH_NOISE_SCALE = 0.1


def make_rng(seed) -> np.random.Generator:
    """The project-wide PRNG: PCG64, fully determined by the seed.

    Accepts an integer or a numpy SeedSequence (used for per-head spawning).
    """
    return np.random.Generator(np.random.PCG64(seed))


def gen_gaussian(
    layout: LatentLayout,
    head_dim: int,
    seed,
    dtype=np.float32,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q, K, V with i.i.d. standard normal entries, drawn in that order."""
    rng = make_rng(seed)
    n = layout.num_tokens
    q = rng.standard_normal((n, head_dim))
    k = rng.standard_normal((n, head_dim))
    v = rng.standard_normal((n, head_dim))
    return q.astype(dtype), k.astype(dtype), v.astype(dtype)


def _smooth_matrix(rng: np.random.Generator, layout: LatentLayout, head_dim: int) -> np.ndarray:
    """One matrix of per-frame bilinear fields plus small i.i.d. noise."""
    cells_h = layout.patches_h
    cells_w = layout.patches_w
    height, width = layout.height, layout.width
    ys = np.linspace(0.0, cells_h, height)
    xs = np.linspace(0.0, cells_w, width)
    y0 = np.clip(ys.astype(np.int64), 0, cells_h - 1)
    x0 = np.clip(xs.astype(np.int64), 0, cells_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    frames = []
    for _ in range(layout.frames):
        knots = rng.standard_normal((cells_h + 1, cells_w + 1, head_dim))
        knots *= SMOOTH_FIELD_SCALE
        field = (knots[y0][:, x0] * (1 - fy) * (1 - fx)
                 + knots[y0][:, x0 + 1] * (1 - fy) * fx
                 + knots[y0 + 1][:, x0] * fy * (1 - fx)
                 + knots[y0 + 1][:, x0 + 1] * fy * fx)
        frames.append(field.reshape(height * width, head_dim))
    out = np.concatenate(frames, axis=0)
    out += SMOOTH_NOISE_SCALE * rng.standard_normal(out.shape)
    return out


def gen_smooth(
    layout: LatentLayout,
    head_dim: int,
    seed,
    dtype=np.float32,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q, K, V whose tokens vary smoothly inside each frame.

    Each matrix is an independent per-frame Gaussian field sampled at patch
    corners, bilinearly upsampled to the full token grid, plus 0.1-scaled
    i.i.d. noise. Tokens within a pooling patch end up far more similar than
    in gaussian mode.
    """
    rng = make_rng(seed)
    q = _smooth_matrix(rng, layout, head_dim)
    k = _smooth_matrix(rng, layout, head_dim)
    v = _smooth_matrix(rng, layout, head_dim)
    return q.astype(dtype), k.astype(dtype), v.astype(dtype)


def gen_inputs(
    layout: LatentLayout,
    head_dim: int,
    seed: int,
    mode: str = "gaussian",
    dtype=np.float32,
    heads: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dispatch on data mode; ``heads > 1`` stacks independent (n, d) draws.

    Per-head seeds come from spawning the root seed sequence, so head h is
    reproducible on its own and heads are mutually independent.
    """
    if mode not in DATA_MODES:
        raise ValueError(f"mode must be one of {DATA_MODES}, got {mode!r}")
    gen = gen_gaussian if mode == "gaussian" else gen_smooth
    if heads == 1:
        return gen(layout, head_dim, seed, dtype)
    if heads < 1:
        raise ValueError(f"heads must be positive, got {heads}")
    children = np.random.SeedSequence(seed).spawn(heads)
    triples = [gen(layout, head_dim, child, dtype) for child in children]
    q = np.stack([t[0] for t in triples])
    k = np.stack([t[1] for t in triples])
    v = np.stack([t[2] for t in triples])
    return q, k, v
