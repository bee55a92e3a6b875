"""Forecasting backbones and variant wiring.

Two backbones consume the raw lookback window, optionally augmented with
the length-T attention signal: a single affine map for one-step forecasts,
and a generic N-BEATS stack of double-residual MLP blocks. The attention
signal is concatenated (never backcast-subtracted) and re-attached fresh
at every N-BEATS block.
"""

import json
import struct

import numpy as np

from . import autodiff as ad
from .attention import (OutputMlp, RawWindowAttentionHead,
                        TopologicalAttentionHead, xavier_uniform)
from .autodiff import Tensor
from .config import ForecastConfig, resolve_plan, validate
from .errors import InvalidConfig, ShapeMismatch
from .vectorize import CoordinateFunctionBank, kmeanspp_init
from .windowing import (SlidingBarcodeCache, window_matrix, windowed_barcodes)


class LinearModel:
    """Affine one-step forecaster over the (possibly augmented) input."""

    def __init__(self, input_len: int, rng):
        self.input_len = input_len
        self.w = Tensor(xavier_uniform(rng, input_len, 1, shape=(input_len,)),
                        requires_grad=True)
        self.b = Tensor(0.0, requires_grad=True)

    def forward(self, features: Tensor) -> Tensor:
        if features.shape != (self.input_len,):
            raise ShapeMismatch(
                f"linear model expects ({self.input_len},), got {features.shape}"
            )
        dot = ad.matmul(ad.reshape(features, (1, self.input_len)),
                        ad.reshape(self.w, (self.input_len, 1)))
        return ad.add(ad.reshape(dot, (1,)), self.b)

    def named_parameters(self, prefix: str = "linear"):
        return [(f"{prefix}.w", self.w), (f"{prefix}.b", self.b)]


class NBeatsBlock:
    """One double-residual block: MLP trunk, backcast head, forecast head."""

    def __init__(self, in_dim: int, hidden: int, backcast_dim: int, horizon: int,
                 trunk_layers: int, rng):
        dims = [in_dim] + [hidden] * trunk_layers
        self.trunk = [
            (Tensor(xavier_uniform(rng, dims[i], dims[i + 1]), requires_grad=True),
             Tensor(np.zeros(dims[i + 1]), requires_grad=True))
            for i in range(trunk_layers)
        ]
        self.u_w = Tensor(xavier_uniform(rng, hidden, backcast_dim), requires_grad=True)
        self.u_b = Tensor(np.zeros(backcast_dim), requires_grad=True)
        self.v_w = Tensor(xavier_uniform(rng, hidden, horizon), requires_grad=True)
        self.v_b = Tensor(np.zeros(horizon), requires_grad=True)

    def __call__(self, inp: Tensor):
        h = inp
        for w, b in self.trunk:
            h = ad.relu(ad.add(ad.matmul(h, w), b))
        backcast = ad.add(ad.matmul(h, self.u_w), self.u_b)
        forecast = ad.add(ad.matmul(h, self.v_w), self.v_b)
        return backcast, forecast

    def named_parameters(self, prefix: str):
        out = []
        for i, (w, b) in enumerate(self.trunk):
            out.append((f"{prefix}.trunk{i}.w", w))
            out.append((f"{prefix}.trunk{i}.b", b))
        out.extend([(f"{prefix}.u_w", self.u_w), (f"{prefix}.u_b", self.u_b),
                    (f"{prefix}.v_w", self.v_w), (f"{prefix}.v_b", self.v_b)])
        return out


class NBeatsStack:
    """L blocks; the forecast is the sum of per-block partial forecasts.

    Backcast subtraction applies to the raw-series channel only; an
    auxiliary signal, when present, is concatenated to every block input.
    """

    def __init__(self, lookback: int, horizon: int, hidden: int, blocks: int,
                 trunk_layers: int, rng, aux_len: int = 0):
        self.lookback = lookback
        self.horizon = horizon
        self.aux_len = aux_len
        in_dim = lookback + aux_len
        self.blocks = [
            NBeatsBlock(in_dim, hidden, lookback, horizon, trunk_layers, rng)
            for _ in range(blocks)
        ]

    def forward(self, x: np.ndarray, aux: Tensor = None, return_trace: bool = False):
        if aux is None and self.aux_len:
            raise ShapeMismatch("stack was built with an auxiliary input")
        if aux is not None and aux.shape != (self.aux_len,):
            raise ShapeMismatch(f"auxiliary signal must be ({self.aux_len},)")
        residual = ad.reshape(Tensor(x), (1, self.lookback))
        aux_row = ad.reshape(aux, (1, self.aux_len)) if aux is not None else None
        total = None
        trace = []
        for block in self.blocks:
            inp = residual if aux_row is None else ad.concat([residual, aux_row], axis=1)
            backcast, forecast = block(inp)
            residual = ad.sub(residual, backcast)
            total = forecast if total is None else ad.add(total, forecast)
            if return_trace:
                trace.append((backcast, residual, forecast))
        out = ad.reshape(total, (self.horizon,))
        return (out, trace) if return_trace else out

    def named_parameters(self, prefix: str = "nbeats"):
        out = []
        for i, block in enumerate(self.blocks):
            out.extend(block.named_parameters(f"{prefix}.block{i}"))
        return out


class ForecastModel:
    """A backbone plus an optional auxiliary attention head.

    `forward` accepts the raw length-T input; the auxiliary representation
    is built on the fly unless a `prepared` value (from `prepare` or
    `prepare_range`) is passed in.
    """

    def __init__(self, cfg: ForecastConfig, rng, banks=None):
        validate(cfg)
        self.cfg = cfg
        self.plan = resolve_plan(cfg)
        self.lookback = self.plan.length
        self.horizon = cfg.horizon
        self.variant = cfg.variant
        self.backbone_kind = cfg.backbone

        self.aux = None
        if cfg.variant in ("top", "topattn"):
            if banks is None:
                raise InvalidConfig(
                    "barcode-based variants need coordinate-function banks; "
                    "pass banks= or use make_variant with training data"
                )
            bank_sub, bank_sup = banks
            layers = cfg.encoder_layers if cfg.variant == "topattn" else 0
            self.aux = TopologicalAttentionHead(
                self.plan, bank_sub, bank_sup, layers, cfg.heads,
                cfg.hidden_dim, self.lookback, rng)
        elif cfg.variant == "attn":
            self.aux = RawWindowAttentionHead(
                self.plan, cfg.encoder_layers, cfg.heads, cfg.hidden_dim,
                self.lookback, rng)

        aux_len = self.lookback if self.aux is not None else 0
        if cfg.backbone == "linear":
            self.backbone = LinearModel(self.lookback + aux_len, rng)
        else:
            self.backbone = NBeatsStack(
                self.lookback, cfg.horizon, cfg.nbeats_block_hidden,
                cfg.nbeats_stacks * cfg.nbeats_blocks_per_stack,
                cfg.nbeats_block_layers, rng, aux_len=aux_len)

    # -- input preparation -------------------------------------------------

    def prepare(self, x: np.ndarray):
        """Compute whatever the auxiliary head needs for the input window."""
        if self.variant in ("top", "topattn"):
            return windowed_barcodes(x, self.plan)
        if self.variant == "attn":
            return window_matrix(x, self.plan)
        return None

    def prepare_range(self, values: np.ndarray, start: int,
                      cache: SlidingBarcodeCache = None):
        """Like `prepare` for values[start:start+T], reusing a barcode cache."""
        if self.variant in ("top", "topattn"):
            if cache is None:
                cache = SlidingBarcodeCache(values, self.plan.window)
            return cache.barcodes(start, self.plan.count)
        if self.variant == "attn":
            return window_matrix(values[start:start + self.lookback], self.plan)
        return None

    def make_cache(self, values: np.ndarray) -> SlidingBarcodeCache:
        if self.variant in ("top", "topattn"):
            return SlidingBarcodeCache(values, self.plan.window)
        return None

    # -- forward -----------------------------------------------------------

    def aux_signal(self, x: np.ndarray, prepared=None) -> Tensor:
        if self.aux is None:
            raise InvalidConfig("base variant has no auxiliary signal")
        if prepared is None:
            prepared = self.prepare(x)
        return self.aux.forward(prepared)

    def forward(self, x: np.ndarray, prepared=None) -> Tensor:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.lookback:
            raise ShapeMismatch(f"expected input of length {self.lookback}, got {x.size}")
        aux = self.aux_signal(x, prepared) if self.aux is not None else None
        if self.backbone_kind == "linear":
            features = Tensor(x) if aux is None else ad.concat([Tensor(x), aux])
            return self.backbone.forward(features)
        return self.backbone.forward(x, aux)

    def predict(self, x: np.ndarray, prepared=None) -> np.ndarray:
        return self.forward(x, prepared).data.copy()

    # -- parameters ----------------------------------------------------------

    def named_parameters(self):
        out = []
        if self.aux is not None:
            out.extend(self.aux.named_parameters())
        out.extend(self.backbone.named_parameters("backbone"))
        return out

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def parameter_groups(self) -> dict:
        groups = {"topvec": [], "encoder": [], "mlp": [], "backbone": []}
        if self.aux is not None:
            for name, tensors in self.aux.parameter_groups().items():
                groups[name].extend(tensors)
        groups["backbone"].extend(t for _, t in self.backbone.named_parameters("b"))
        return {k: v for k, v in groups.items() if v}

    def parameter_count(self) -> int:
        return sum(t.size for t in self.parameters())

    def parameter_count_by_group(self) -> dict:
        return {name: sum(t.size for t in tensors)
                for name, tensors in self.parameter_groups().items()}


def build_banks(training_values, window: int, e: int, rng):
    """Initialize both banks from every sliding window of the training region."""
    cache = SlidingBarcodeCache(training_values, window)
    n_windows = len(cache.values) - window + 1
    if n_windows < 1:
        raise InvalidConfig(
            f"training region of length {len(cache.values)} has no window of size {window}"
        )
    pairs = [cache.pair(o) for o in range(n_windows)]
    bank_sub = kmeanspp_init([p[0] for p in pairs], e, rng)
    bank_sup = kmeanspp_init([p[1] for p in pairs], e, rng)
    return bank_sub, bank_sup


def make_variant(kind: str, cfg: ForecastConfig, rng, training_values=None,
                 banks=None) -> ForecastModel:
    """Build one ablation variant, initializing banks from training data."""
    if kind not in ("base", "top", "attn", "topattn"):
        raise InvalidConfig(f"unknown variant {kind!r}")
    cfg = ForecastConfig.from_dict({**cfg.to_dict(), "variant": kind})
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if kind in ("top", "topattn") and banks is None:
        if training_values is None:
            raise InvalidConfig("need training_values (or banks) for barcode variants")
        p = resolve_plan(cfg)
        banks = build_banks(training_values, p.window, cfg.coordinate_functions, rng)
    return ForecastModel(cfg, rng, banks=banks)


# -- checkpoint format -------------------------------------------------------
#
# magic, 4-byte big-endian header length, UTF-8 JSON header, then the raw
# little-endian float64 buffers in header order. Fully deterministic bytes.

_CKPT_MAGIC = b"TOPOFC01"


def save_checkpoint(path, model: ForecastModel) -> None:
    named = model.named_parameters()
    header = {
        "format_version": 1,
        "variant": model.variant,
        "backbone": model.backbone_kind,
        "config": model.cfg.to_dict(),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in named],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack(">I", len(blob)))
        fh.write(blob)
        for _, t in named:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> ForecastModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise InvalidConfig(f"{path} is not a checkpoint file")
        (hlen,) = struct.unpack(">I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != 1:
            raise InvalidConfig(f"unsupported checkpoint version {header.get('format_version')}")
        cfg = ForecastConfig.from_dict(header["config"])
        banks = None
        if cfg.variant in ("top", "topattn"):
            e = cfg.coordinate_functions
            banks = (CoordinateFunctionBank(np.zeros((e, 2)), np.ones(e)),
                     CoordinateFunctionBank(np.zeros((e, 2)), np.ones(e)))
        model = ForecastModel(cfg, np.random.default_rng(0), banks=banks)
        by_name = dict(model.named_parameters())
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            n_items = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n_items)
            tensor = by_name.get(entry["name"])
            if tensor is None:
                raise InvalidConfig(f"checkpoint names unknown tensor {entry['name']!r}")
            if tensor.shape != shape:
                raise ShapeMismatch(
                    f"checkpoint tensor {entry['name']} has shape {shape}, model wants {tensor.shape}"
                )
            tensor.data = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return model
