"""Flat key=value configuration with presets for desk- and full-scale runs."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass


@dataclass
class TrainingConfig:
    """Every knob of the pipeline; defaults are the full-scale values."""

    # run control
    seed: int = 0
    batch_size: int = 4
    log_interval: int = 50

    # optimization
    lr_adversarial: float = 1e-4   # discriminator and generator branch
    lr_auxiliary: float = 1e-5     # writer classifier and recognizer
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    label_smoothing: float = 0.0

    # data geometry
    style_set_size: int = 5
    max_text_length: int = 88
    max_image_width: int = 2160

    # curriculum (comma lists, one entry per stage)
    stage_iterations: str = "40000,10000,10000"
    stage_max_chars: str = "24,48,88"
    stage_max_widths: str = "600,1200,2160"
    eval_interval: int = 0         # 0 disables the stage-1 plateau stop
    plateau_patience: int = 10

    # content encoder
    embed_dim: int = 64
    content_hidden: int = 1024

    # style encoder
    style_backbone: str = "resnet34"
    style_width: int = 64

    # generator
    adain_dim: int = 256

    # critics
    critic_width: int = 32

    # recognizer
    rec_d_model: int = 512
    rec_heads: int = 8
    rec_ff: int = 1024
    rec_dropout: float = 0.1
    rec_trunk_width: int = 64

    def stages(self, field: str) -> list:
        return [int(v) for v in getattr(self, field).split(",") if v != ""]

    def replace(self, **kwargs) -> "TrainingConfig":
        return dataclasses.replace(self, **kwargs)


def desk_config(**overrides) -> TrainingConfig:
    """Small dimensions sized for CPU smoke runs on the toy dataset."""
    base = dict(
        style_width=16,
        critic_width=12,
        adain_dim=64,
        embed_dim=32,
        content_hidden=256,
        rec_d_model=128,
        rec_heads=4,
        rec_ff=256,
        rec_trunk_width=12,
        max_text_length=16,
        max_image_width=320,
        stage_iterations="2000,400,400",
        stage_max_chars="12,14,16",
        stage_max_widths="320,320,320",
        lr_auxiliary=1e-4,
    )
    base.update(overrides)
    return TrainingConfig(**base)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainingConfig)}


def _coerce(name: str, value: str):
    kind = _FIELD_TYPES[name]
    if kind in ("int", int):
        return int(value)
    if kind in ("float", float):
        return float(value)
    return value


def config_to_text(config: TrainingConfig) -> str:
    items = sorted(dataclasses.asdict(config).items())
    return "\n".join(f"{k}={v}" for k, v in items) + "\n"


def config_from_text(text: str, base: TrainingConfig | None = None) -> TrainingConfig:
    """Parse key=value lines; unknown keys are rejected."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        values[key] = _coerce(key, value)
    config = base or TrainingConfig()
    return config.replace(**values)


def apply_overrides(config: TrainingConfig, pairs) -> TrainingConfig:
    """Apply key=value strings from the command line."""
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not of the form key=value")
        key, _, value = pair.partition("=")
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown configuration key {key!r}")
        updates[key] = _coerce(key, value)
    return config.replace(**updates)


def config_hash(config: TrainingConfig) -> str:
    return hashlib.sha256(config_to_text(config).encode()).hexdigest()[:16]


def load_config(path: str, base: TrainingConfig | None = None) -> TrainingConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_text(fh.read(), base=base)


def save_config(config: TrainingConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(config))
