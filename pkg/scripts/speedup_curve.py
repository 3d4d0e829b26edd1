"""Sparsity sweep on a preset grid: wall-clock latency and speedup table.

Times the dense reference and the draft-guided sparse pipeline at each
sparsity, reporting speedup both against dense attention and against the
same pipeline at sparsity 0 (the executor-vs-itself number the FLOP model
predicts directly).

Example:
    python scripts/speedup_curve.py --preset 768p --frames 4 --repeats 5
"""

import argparse
import dataclasses
import sys

from draftattn.bench import bench_grid, write_csv, write_json
from draftattn.config import PRESETS, RunConfig, apply_preset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--preset", choices=sorted(PRESETS), default="768p")
    parser.add_argument("--frames", type=int, default=4)
    parser.add_argument("--head-dim", type=int, default=64)
    parser.add_argument("--precision", choices=("single", "double"), default="single")
    parser.add_argument("--mode", choices=("gaussian", "smooth"), default="gaussian")
    parser.add_argument("--sparsities", default="0,0.5,0.75,0.9",
                        help="comma-separated dropped fractions, ascending")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--csv")
    parser.add_argument("--json")
    args = parser.parse_args()

    base = apply_preset(
        RunConfig(frames=args.frames, head_dim=args.head_dim, precision=args.precision,
                  data_mode=args.mode, seed=args.seed), args.preset)
    sparsities = [float(s) for s in args.sparsities.split(",")]
    configs = [dataclasses.replace(base, sparsity=s).validate() for s in sparsities]

    n = base.layout().num_tokens
    print(f"# preset {args.preset}, frames {args.frames}: {n} tokens, "
          f"head_dim {args.head_dim}, {args.precision} precision, "
          f"median of {args.repeats} runs, {args.threads} thread(s)")
    records = bench_grid(configs, repeats=args.repeats, threads=args.threads)

    base_sparse = records[0].sparse_time
    header = (f"{'sparsity':>8} {'kept':>6} {'flop_ratio':>10} {'dense_s':>8} "
              f"{'sparse_s':>8} {'vs_dense':>8} {'vs_s0':>6}")
    print(header)
    for rec in records:
        kept = rec.mask_stats["kept_count"]
        print(f"{rec.config.sparsity:8.2f} {kept:6d} {rec.flops.total_ratio:10.4f} "
              f"{rec.dense_time:8.3f} {rec.sparse_time:8.3f} "
              f"{rec.speedup:7.2f}x {base_sparse / rec.sparse_time:5.2f}x")

    if args.csv:
        write_csv(records, args.csv)
    if args.json:
        write_json(records, args.json)
    return 0


if __name__ == "__main__":
    sys.exit(main())
