"""Randomized sweep of both error bounds over a grid of layouts.

For each layout x data-mode x seed instance this checks the pooling-error
bound and, at each keep ratio, the masking-error bound, then aggregates:
hold rates, minimum slack, and the per-entry companion condition on dropped
entries (|S_uv| <= delta + t), which fails routinely on zero-mean data even
while the Frobenius inequality holds with room to spare.

Example:
    python scripts/bounds_sweep.py --seeds 3 --ratios 0.1,0.25,0.5
"""

import argparse
import itertools
import sys

import numpy as np

from draftattn.bounds import verify_instance
from draftattn.layout import LatentLayout
from draftattn.synth import DATA_MODES, gen_inputs


def layout_grid(patch: int, frames: tuple[int, ...], multiples: tuple[int, ...]):
    for f, mh, mw in itertools.product(frames, multiples, multiples):
        yield LatentLayout(f, mh * patch, mw * patch, patch, patch)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--patch", type=int, default=4)
    parser.add_argument("--frames", default="1,2,3")
    parser.add_argument("--multiples", default="1,2,4")
    parser.add_argument("--head-dims", default="4,16,64")
    parser.add_argument("--ratios", default="0.1,0.25,0.5")
    parser.add_argument("--seeds", type=int, default=2, help="instances per combo")
    args = parser.parse_args()

    frames = tuple(int(x) for x in args.frames.split(","))
    multiples = tuple(int(x) for x in args.multiples.split(","))
    head_dims = tuple(int(x) for x in args.head_dims.split(","))
    ratios = tuple(float(x) for x in args.ratios.split(","))

    layouts = list(layout_grid(args.patch, frames, multiples))
    draft = {m: [] for m in DATA_MODES}
    masks = {(m, r): [] for m in DATA_MODES for r in ratios}
    deltas = {m: [] for m in DATA_MODES}

    seed = 0
    for layout, head_dim, mode in itertools.product(layouts, head_dims, DATA_MODES):
        for _ in range(args.seeds):
            q, k, _ = gen_inputs(layout, head_dim, seed, mode, dtype=np.float64)
            seed += 1
            draft_report, mask_reports = verify_instance(q, k, layout, ratios)
            draft[mode].append(draft_report)
            deltas[mode].append(draft_report.delta)
            for rep in mask_reports:
                masks[(mode, rep.keep_ratio)].append(rep)

    total = sum(len(v) for v in draft.values())
    print(f"# {len(layouts)} layouts x {len(head_dims)} head dims x "
          f"{len(DATA_MODES)} modes x {args.seeds} seeds = {total} instances")

    print("\npooling-error bound  ||S - S_block||_F <= delta * n")
    print(f"{'mode':>10} {'held':>10} {'min_slack':>10} {'median_delta':>12}")
    for mode in DATA_MODES:
        reps = draft[mode]
        held = sum(r.holds for r in reps)
        print(f"{mode:>10} {held:>5}/{len(reps):<4} "
              f"{min(r.slack for r in reps):10.3f} "
              f"{np.median(deltas[mode]):12.3f}")

    print("\nmasking-error bound  ||S - S(.)M||_F <= n (delta + t) sqrt(1 - r)")
    print(f"{'mode':>10} {'ratio':>6} {'frob_held':>10} {'min_slack':>10} "
          f"{'ptwise_held':>12} {'worst_over':>10}")
    for mode in DATA_MODES:
        for r in ratios:
            reps = masks[(mode, r)]
            held = sum(rep.holds for rep in reps)
            pt_held = sum(rep.pointwise_holds for rep in reps)
            over = max((rep.dropped_abs_max / rep.pointwise_bound
                        for rep in reps if rep.pointwise_bound > 0), default=0.0)
            print(f"{mode:>10} {r:6.2f} {held:>5}/{len(reps):<4} "
                  f"{min(rep.slack for rep in reps):10.3f} "
                  f"{pt_held:>7}/{len(reps):<4} {over:9.2f}x")

    any_frob_fail = any(not rep.holds for reps in masks.values() for rep in reps)
    any_frob_fail |= any(not r.holds for reps in draft.values() for r in reps)
    return 1 if any_frob_fail else 0


if __name__ == "__main__":
    sys.exit(main())
