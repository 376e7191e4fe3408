"""Run configuration: model, training, data, and evaluation settings."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class ModelConfig:
    image_size: int = 64
    patch_size: int = 8
    embed_dim: int = 64
    projected_dim: int = 32      # split in half between detection and segmentation
    num_queries: int = 10
    num_encoder_layers: int = 2
    num_decoder_layers: int = 2
    num_scales: int = 4
    num_heads: int = 4
    vocab_size: int = 32
    max_tokens: int = 6
    seed: int = 0
    dtype: str = "float32"
    use_crs: bool = True
    use_mtd: bool = True
    tas_k: int = 250

    def validate(self):
        if self.image_size % self.patch_size:
            raise ValueError("image_size must be divisible by patch_size")
        if self.projected_dim % 2:
            raise ValueError("projected_dim must be even (channels split in half)")
        if self.num_queries < 1:
            raise ValueError("num_queries must be >= 1")
        if self.num_scales not in SCALE_FACTORS:
            raise ValueError(f"num_scales must be one of {sorted(SCALE_FACTORS)}")
        grid = self.image_size // self.patch_size
        coarsest = min(SCALE_FACTORS[self.num_scales])
        if int(grid * coarsest) < 2:
            raise ValueError(
                f"coarsest scale collapses below 2x2 for grid {grid} at factor {coarsest}"
            )


# Relative resolutions of the feature hierarchy, finest first, keyed by scale
# count. The identity scale is always present.
SCALE_FACTORS: dict[int, tuple[float, ...]] = {
    1: (1.0,),
    2: (2.0, 1.0),
    3: (4.0, 2.0, 1.0),
    4: (4.0, 2.0, 1.0, 0.5),
}


@dataclass
class TrainConfig:
    epochs: int = 12
    batch_size: int = 16
    base_lr: float = 5e-5        # encoder group; other parameters train at 10x
    lr_decay: float = 0.1
    decay_fractions: tuple[float, float] = (7 / 12, 11 / 12)
    weight_det: float = 0.1
    weight_exist: float = 0.2
    weight_ref: float = 1.0
    cost_class: float = 1.0
    cost_l1: float = 5.0
    cost_giou: float = 2.0
    foreground_supervision: bool = True
    aux_decoder_losses: bool = False
    seed: int = 0


@dataclass
class DataConfig:
    num_train: int = 1750
    num_val: int = 350
    min_objects: int = 2
    max_objects: int = 4
    zero_target_fraction: float = 0.25
    multi_target_fraction: float = 0.35
    seed: int = 0
    r_low: float = 0.05
    r_high: float = 0.8
    min_abs_area: int = 100


@dataclass
class EvalConfig:
    strategy: str = "refer_only"   # refer_only | refer_times_det | average
    thr_p: float = 0.9
    thr_m: float = 0.5
    nms_iou: float | None = None
    existence_gate: bool = True
    dump_masks: bool = False


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0
    out_dir: str = "runs/default"

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        cfg = cls()
        for section, value in raw.items():
            if not hasattr(cfg, section):
                raise KeyError(
                    f"unknown config section '{section}'; valid: {[f.name for f in dataclasses.fields(cls)]}"
                )
            current = getattr(cfg, section)
            if dataclasses.is_dataclass(current):
                valid = {f.name for f in dataclasses.fields(current)}
                for k, v in value.items():
                    if k not in valid:
                        raise KeyError(f"unknown config key '{section}.{k}'; valid: {sorted(valid)}")
                    if isinstance(getattr(current, k), tuple) and isinstance(v, list):
                        v = tuple(v)
                    setattr(current, k, v)
            else:
                setattr(cfg, section, value)
        return cfg

    def apply_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        """Apply dotted-path overrides like {'model.seed': 3}; flags win over files."""
        for path, value in overrides.items():
            obj = self
            *head, last = path.split(".")
            for part in head:
                if not hasattr(obj, part):
                    raise KeyError(f"unknown config section '{part}' in '{path}'")
                obj = getattr(obj, part)
            if not hasattr(obj, last):
                valid = [f.name for f in dataclasses.fields(obj)]
                raise KeyError(f"unknown config key '{path}'; valid keys: {sorted(valid)}")
            setattr(obj, last, value)
        return self

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a key=value config file; values are JSON literals when possible.

    Keys use dotted paths (``model.num_queries=12``). Blank lines and ``#``
    comments are ignored.
    """
    overrides: dict[str, Any] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        try:
            value = json.loads(raw.strip())
        except json.JSONDecodeError:
            value = raw.strip()
        overrides[key.strip()] = value
    return overrides
