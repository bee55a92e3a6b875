"""Run configuration: one flat key = value file with per-module sections.

Defaults mirror the single-series training recipe (MSE loss, batch 30,
learning rates 9e-2 / 5e-2 / 9e-2, one encoder layer with four heads and
32 coordinate functions) and the published generic N-BEATS shape (30
stacks of one 4-layer block, hidden width 128). CLI flags override file
values; files override these defaults.
"""

import configparser
import dataclasses
from dataclasses import dataclass

from .errors import InvalidConfig
from .windowing import default_window, plan

VARIANTS = ("base", "top", "attn", "topattn")
BACKBONES = ("linear", "nbeats")
LOSSES = ("mse", "smape")


@dataclass
class ForecastConfig:
    # windowing
    window: int = None
    window_count: int = None
    # vectorize
    coordinate_functions: int = 32
    # attention
    heads: int = 4
    encoder_layers: int = 1
    hidden_dim: int = 128
    # model
    backbone: str = "linear"
    variant: str = "topattn"
    lookback: int = None
    horizon: int = 1
    # nbeats
    nbeats_stacks: int = 30
    nbeats_blocks_per_stack: int = 1
    nbeats_block_layers: int = 4
    nbeats_block_hidden: int = 128
    # train
    iterations: int = 1500
    batch_size: int = 30
    loss: str = "mse"
    lr_topvec: float = 9e-2
    lr_encoder: float = 5e-2
    lr_mlp: float = 9e-2
    lr_backbone: float = 9e-2
    # split
    test_fraction: float = 0.20
    validation_fraction: float = 0.05

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ForecastConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - fields
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# (section, key) -> dataclass field
_FILE_KEYS = {
    ("windowing", "window"): "window",
    ("windowing", "window_count"): "window_count",
    ("vectorize", "coordinate_functions"): "coordinate_functions",
    ("attention", "heads"): "heads",
    ("attention", "encoder_layers"): "encoder_layers",
    ("attention", "hidden_dim"): "hidden_dim",
    ("model", "backbone"): "backbone",
    ("model", "variant"): "variant",
    ("model", "lookback"): "lookback",
    ("model", "horizon"): "horizon",
    ("nbeats", "stacks"): "nbeats_stacks",
    ("nbeats", "blocks_per_stack"): "nbeats_blocks_per_stack",
    ("nbeats", "block_layers"): "nbeats_block_layers",
    ("nbeats", "block_hidden"): "nbeats_block_hidden",
    ("train", "iterations"): "iterations",
    ("train", "batch_size"): "batch_size",
    ("train", "loss"): "loss",
    ("train", "lr_topvec"): "lr_topvec",
    ("train", "lr_encoder"): "lr_encoder",
    ("train", "lr_mlp"): "lr_mlp",
    ("train", "lr_backbone"): "lr_backbone",
    ("split", "test_fraction"): "test_fraction",
    ("split", "validation_fraction"): "validation_fraction",
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ForecastConfig)}


def _coerce(field: str, raw: str):
    raw = raw.strip()
    if field in ("backbone", "variant", "loss"):
        return raw
    if field.startswith("lr_") or field.endswith("_fraction"):
        return float(raw)
    return int(raw)


def load_config_file(path) -> ForecastConfig:
    """Parse a sectioned key = value file into a config, applying defaults."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise InvalidConfig(f"cannot read config file {path}")
    cfg = ForecastConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            field = _FILE_KEYS.get((section, key))
            if field is None:
                raise InvalidConfig(f"unknown config entry [{section}] {key}")
            try:
                setattr(cfg, field, _coerce(field, raw))
            except ValueError as exc:
                raise InvalidConfig(f"bad value for [{section}] {key}: {raw!r}") from exc
    return cfg


def apply_overrides(cfg: ForecastConfig, overrides: dict) -> ForecastConfig:
    """Return a copy of `cfg` with non-None override values applied."""
    out = dataclasses.replace(cfg)
    fields = {f.name for f in dataclasses.fields(ForecastConfig)}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in fields:
            raise InvalidConfig(f"unknown config override {key}")
        setattr(out, key, value)
    return out


def resolve_plan(cfg: ForecastConfig):
    """Derive the (T, n, W) window plan from whichever fields are set.

    With only a lookback, the window defaults to 70% of it. An explicit
    (window_count, window) pair determines the lookback instead, and all
    three together must satisfy T = W + n - 1.
    """
    lookback = cfg.lookback
    if lookback is None:
        if cfg.window is None or cfg.window_count is None:
            raise InvalidConfig("need lookback, or both window and window_count")
        lookback = cfg.window_count + cfg.window - 1
    window = cfg.window if cfg.window is not None else default_window(lookback)
    p = plan(lookback, window)
    if cfg.window_count is not None and p.count != cfg.window_count:
        raise InvalidConfig(
            f"window arithmetic mismatch: lookback {lookback} and window {window} "
            f"give {p.count} windows, config says {cfg.window_count}"
        )
    return p


def validate(cfg: ForecastConfig) -> None:
    """Reject inconsistent configurations before any model is built."""
    if cfg.variant not in VARIANTS:
        raise InvalidConfig(f"variant must be one of {VARIANTS}, got {cfg.variant!r}")
    if cfg.backbone not in BACKBONES:
        raise InvalidConfig(f"backbone must be one of {BACKBONES}, got {cfg.backbone!r}")
    if cfg.loss not in LOSSES:
        raise InvalidConfig(f"loss must be one of {LOSSES}, got {cfg.loss!r}")
    if cfg.test_fraction + cfg.validation_fraction >= 1.0:
        raise InvalidConfig("split fractions must sum to less than 1")
    if cfg.horizon < 1:
        raise InvalidConfig("horizon must be at least 1")
    if cfg.backbone == "linear" and cfg.horizon != 1:
        raise InvalidConfig("the linear backbone yields one-step forecasts only")
    if cfg.iterations < 1 or cfg.batch_size < 1:
        raise InvalidConfig("iterations and batch size must be positive")
    if cfg.heads < 1 or cfg.encoder_layers < 0 or cfg.hidden_dim < 1:
        raise InvalidConfig("attention sizes must be positive (encoder_layers may be 0)")
    if cfg.coordinate_functions < 1:
        raise InvalidConfig("need at least one coordinate function")
    p = resolve_plan(cfg)
    if cfg.variant in ("top", "topattn") and cfg.encoder_layers > 0:
        width = 2 * cfg.coordinate_functions
        if width % cfg.heads != 0:
            raise InvalidConfig(
                f"head count {cfg.heads} must divide embedding width {width}"
            )
    if cfg.variant == "attn" and cfg.encoder_layers > 0 and p.window % cfg.heads != 0:
        raise InvalidConfig(
            f"head count {cfg.heads} must divide window length {p.window}"
        )
