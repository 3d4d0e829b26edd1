"""Run configuration: one flat record driving generation, execution, and benchmarks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .layout import LatentLayout
from .masking import SELECT_MODES
from .pooling import POOL_MODES
from .synth import DATA_MODES

PRECISIONS = ("single", "double")

# named latent-grid presets (height, width); both divide cleanly by the
# default 8 x 16 patch, giving 128-token regions
PRESETS = {
    "512p": (32, 48),
    "768p": (48, 80),
}
DEFAULT_PATCH_H = 8
DEFAULT_PATCH_W = 16


@dataclass
class RunConfig:
    """Everything a run needs, serializable as flat key=value text."""

    frames: int = 1
    height: int = 32
    width: int = 48
    patch_h: int = DEFAULT_PATCH_H
    patch_w: int = DEFAULT_PATCH_W
    head_dim: int = 64
    heads: int = 1
    sparsity: float = 0.9
    pool_mode: str = "average"
    select_on: str = "logits"
    force_row_keep: bool = True
    shared_head_mask: bool = False
    precision: str = "single"
    seed: int = 0
    data_mode: str = "gaussian"

    def validate(self) -> "RunConfig":
        if not 0.0 <= self.sparsity < 1.0:
            raise ValueError(f"sparsity must be in [0, 1), got {self.sparsity}")
        if self.pool_mode not in POOL_MODES:
            raise ValueError(f"pool_mode must be one of {POOL_MODES}")
        if self.select_on not in SELECT_MODES:
            raise ValueError(f"select_on must be one of {SELECT_MODES}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}")
        if self.data_mode not in DATA_MODES + ("file",):
            raise ValueError(f"data_mode must be one of {DATA_MODES + ('file',)}")
        if min(self.frames, self.height, self.width, self.patch_h, self.patch_w,
               self.head_dim, self.heads) < 1:
            raise ValueError("grid dimensions, head_dim, and heads must be positive")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        return self

    @property
    def dtype(self):
        return np.float32 if self.precision == "single" else np.float64

    @property
    def needs_padding(self) -> bool:
        return self.height % self.patch_h != 0 or self.width % self.patch_w != 0

    def layout(self) -> LatentLayout:
        """The token-grid geometry; rejects non-divisible grids (pad first)."""
        return LatentLayout(self.frames, self.height, self.width,
                            self.patch_h, self.patch_w)

    def to_text(self) -> str:
        lines = [f"{f.name}={getattr(self, f.name)}" for f in dataclasses.fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        """Parse key=value lines; unknown keys are errors, comments allowed."""
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in fields:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = _parse_field(key, fields[key], value)
        return cls(**kwargs).validate()


def _parse_field(key: str, typ: str, value: str):
    if typ == "int":
        return int(value)
    if typ == "float":
        return float(value)
    if typ == "bool":
        lowered = value.lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"{key} must be true or false, got {value!r}")
        return lowered == "true"
    return value


def apply_preset(config: RunConfig, name: str) -> RunConfig:
    """Set height and width from a named preset, leaving everything else."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    height, width = PRESETS[name]
    return dataclasses.replace(config, height=height, width=width)
