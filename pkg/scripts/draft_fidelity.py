"""How faithfully the pooled draft map picks the blocks that matter.

Ground truth for a region pair is the attention mass it actually receives:
the block sum of the row-softmaxed score matrix. The draft path instead
ranks region pairs by pooled-input scores, which costs ~1/p^2 of the dense
logits. This script measures, per data mode and keep ratio, how much the two
selections overlap and what fraction of total attention mass the draft
selection captures, against the best any selection of equal budget could do.

Example:
    python scripts/draft_fidelity.py --frames 2 --height 16 --width 16 --seeds 5
"""

import argparse
import sys

import numpy as np

from draftattn.core import head_dim_scale, logits, softmax_rows
from draftattn.layout import LatentLayout, gen_reorder_index, permute_rows
from draftattn.masking import select_top_fraction
from draftattn.pooling import block_mean, pool_regions
from draftattn.synth import DATA_MODES, gen_inputs


def lifted(kept: np.ndarray, region_size: int) -> np.ndarray:
    return np.repeat(np.repeat(kept, region_size, axis=0), region_size, axis=1)


def measure(q, k, layout, keep_ratio):
    perm = gen_reorder_index(layout)
    q_r = permute_rows(q, perm)
    k_r = permute_rows(k, perm)
    p = layout.region_size
    scale = head_dim_scale(q.shape[1])

    full = logits(q_r, k_r, scale)
    weights = softmax_rows(full)
    draft_scores = logits(pool_regions(q_r, p), pool_regions(k_r, p), scale)

    # same ratio and same g on both selections, so budgets match exactly
    draft_mask = select_top_fraction(draft_scores, keep_ratio, force_row_keep=False)
    oracle_mask = select_top_fraction(block_mean(weights, p), keep_ratio,
                                      force_row_keep=False)

    n = layout.num_tokens
    overlap = (draft_mask.kept & oracle_mask.kept).sum() / draft_mask.kept_count
    row_mass = (weights * lifted(draft_mask.kept, p)).sum(axis=1)
    draft_mass = row_mass.sum() / n
    oracle_mass = (weights * lifted(oracle_mask.kept, p)).sum() / n
    return overlap, draft_mass, oracle_mass, row_mass.min()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=2)
    parser.add_argument("--height", type=int, default=16)
    parser.add_argument("--width", type=int, default=16)
    parser.add_argument("--patch", type=int, default=4)
    parser.add_argument("--head-dim", type=int, default=32)
    parser.add_argument("--ratios", default="0.1,0.25,0.5")
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args()

    layout = LatentLayout(args.frames, args.height, args.width, args.patch, args.patch)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    print(f"# {layout.num_tokens} tokens, {layout.num_regions} regions of "
          f"{layout.region_size}, head_dim {args.head_dim}, "
          f"{args.seeds} seeds per cell")
    print(f"{'mode':>10} {'ratio':>6} {'overlap':>8} {'draft_mass':>10} "
          f"{'oracle_mass':>11} {'capture':>8} {'min_row':>8}")

    for mode in DATA_MODES:
        for ratio in ratios:
            rows = []
            for seed in range(args.seeds):
                q, k, _ = gen_inputs(layout, args.head_dim, seed, mode,
                                     dtype=np.float64)
                rows.append(measure(q, k, layout, ratio))
            overlap, draft_mass, oracle_mass, min_row = np.mean(rows, axis=0)
            print(f"{mode:>10} {ratio:6.2f} {overlap:8.3f} {draft_mass:10.3f} "
                  f"{oracle_mass:11.3f} {draft_mass / oracle_mass:8.3f} "
                  f"{min_row:8.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
