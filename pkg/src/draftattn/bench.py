"""Wall-clock benchmark harness comparing dense and draft-guided attention."""

from __future__ import annotations

import csv
import json
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import RunConfig
from .core import full_attention
from .sparse import FlopsReport, draft_sparse_attention, flops_count, multi_head_sparse_attention
from .synth import gen_inputs

# memory cap for the dense reference: score slabs of this many query rows
DENSE_CHUNK_ROWS = 2048


@dataclass(frozen=True)
class BenchRecord:
    """Median timings for one configuration (seconds)."""

    config: RunConfig
    dense_time: float
    sparse_time: float
    speedup: float
    flops: FlopsReport
    mask_stats: dict
    repeats: int
    threads: int | None

    def as_dict(self) -> dict:
        return {
            "frames": self.config.frames,
            "height": self.config.height,
            "width": self.config.width,
            "patch_h": self.config.patch_h,
            "patch_w": self.config.patch_w,
            "head_dim": self.config.head_dim,
            "heads": self.config.heads,
            "sparsity": self.config.sparsity,
            "precision": self.config.precision,
            "data_mode": self.config.data_mode,
            "seed": self.config.seed,
            "num_tokens": self.config.layout().num_tokens,
            "dense_time_s": self.dense_time,
            "sparse_time_s": self.sparse_time,
            "speedup": self.speedup,
            "repeats": self.repeats,
            "threads": self.threads,
            **{f"flops_{k}": v for k, v in self.flops.as_dict().items()},
            **{f"mask_{k}": v for k, v in self.mask_stats.items()},
        }


def time_median(fn, repeats: int, warmup: int = 1) -> float:
    """Median wall-clock seconds over ``repeats`` calls (at least 3)."""
    if repeats < 3:
        raise ValueError(f"repeats must be at least 3, got {repeats}")
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def bench_config(
    config: RunConfig,
    repeats: int = 5,
    threads: int | None = None,
    warmup: int = 1,
) -> BenchRecord:
    """Time dense attention against the sparse pipeline on synthetic inputs."""
    config.validate()
    if config.data_mode == "file":
        raise ValueError("benchmarks generate their own inputs; use gaussian or smooth")
    layout = config.layout()
    q, k, v = gen_inputs(layout, config.head_dim, config.seed, config.data_mode,
                         config.dtype, heads=config.heads)
    if config.heads == 1:
        q, k, v = q[None], k[None], v[None]

    def run_dense():
        for h in range(config.heads):
            full_attention(q[h], k[h], v[h], chunk_rows=DENSE_CHUNK_ROWS)

    def run_sparse():
        if config.heads == 1:
            draft_sparse_attention(q[0], k[0], v[0], layout, config.sparsity,
                                   pool_mode=config.pool_mode,
                                   select_on=config.select_on,
                                   force_row_keep=config.force_row_keep)
        else:
            multi_head_sparse_attention(q, k, v, layout, config.sparsity,
                                        shared_head_mask=config.shared_head_mask,
                                        pool_mode=config.pool_mode,
                                        select_on=config.select_on,
                                        force_row_keep=config.force_row_keep)

    with threadpool_limits(limits=threads):
        dense_time = time_median(run_dense, repeats, warmup)
        sparse_time = time_median(run_sparse, repeats, warmup)

    details = draft_sparse_attention(q[0], k[0], v[0], layout, config.sparsity,
                                     pool_mode=config.pool_mode,
                                     select_on=config.select_on,
                                     force_row_keep=config.force_row_keep,
                                     return_details=True)
    speedup = dense_time / sparse_time
    record = BenchRecord(config=config, dense_time=dense_time, sparse_time=sparse_time,
                         speedup=speedup, flops=details.flops,
                         mask_stats=details.mask_stats, repeats=repeats, threads=threads)
    _warn_if_off_model(record)
    return record


def _warn_if_off_model(record: BenchRecord) -> None:
    """Flag measurements wildly off the FLOP-predicted ratio (warn, not fail)."""
    predicted = 1.0 / record.flops.total_ratio
    if record.speedup > 3.0 * predicted or record.speedup < predicted / 3.0:
        print(
            f"warning: measured speedup {record.speedup:.2f}x deviates from "
            f"FLOP-predicted {predicted:.2f}x by more than 3x "
            f"(sparsity {record.config.sparsity}, n {record.config.layout().num_tokens})",
            file=sys.stderr,
        )


def bench_grid(
    configs: list[RunConfig],
    repeats: int = 5,
    threads: int | None = None,
) -> list[BenchRecord]:
    return [bench_config(cfg, repeats=repeats, threads=threads) for cfg in configs]


def write_csv(records: list[BenchRecord], path) -> None:
    rows = [r.as_dict() for r in records]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_json(records: list[BenchRecord], path) -> None:
    Path(path).write_text(json.dumps([r.as_dict() for r in records], indent=2) + "\n")
