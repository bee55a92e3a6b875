"""Optimization loop, losses, lookback cross-validation, and ensembling.

Models train with ADAM (0.9 / 0.999 / 1e-8) under a cosine-annealed
learning rate, with separate base rates per parameter group (embedding
banks, encoder, output MLP, backbone). Batches are random consecutive
slices of the training region; everything is deterministic given a seed.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import ForecastConfig, resolve_plan
from .errors import (DivergenceDetected, EmptyEnsemble, InsufficientHistory,
                     LengthMismatch, SeriesTooShort)
from .metrics import smape
from .models import ForecastModel, make_variant


def cosine_lr(base: float, step: int, total: int) -> float:
    """Cosine annealing from `base` at step 0 to 0 at step `total`."""
    return base * 0.5 * (1.0 + np.cos(np.pi * step / total))


class Adam:
    """ADAM with bias correction and one base learning rate per group."""

    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    def __init__(self, param_groups: dict, base_lrs: dict):
        self.groups = []
        for name, tensors in param_groups.items():
            for t in tensors:
                self.groups.append((base_lrs[name], t, np.zeros_like(t.data),
                                    np.zeros_like(t.data)))
        self.step_count = 0

    def zero_grad(self):
        for _, t, _, _ in self.groups:
            t.zero_grad()

    def step(self, lr_scale: float = 1.0):
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for base_lr, t, m, v in self.groups:
            g = t.grad
            if g is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            t.data = t.data - (base_lr * lr_scale) * (m / c1) / (np.sqrt(v / c2) + self.eps)


def sample_batch(values, lookback: int, horizon: int, batch_size: int, rng):
    """Random (input, target) slices of `values`: consecutive T + H windows."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    span = lookback + horizon
    if values.size < span:
        raise SeriesTooShort(
            f"need at least {span} observations to draw a training sample, have {values.size}"
        )
    starts = rng.integers(0, values.size - span + 1, size=batch_size)
    inputs = np.stack([values[s:s + lookback] for s in starts])
    targets = np.stack([values[s + lookback:s + span] for s in starts])
    return inputs, targets, starts


def loss_mse(pred: Tensor, target) -> Tensor:
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.shape != target.shape:
        raise LengthMismatch(f"prediction {pred.shape} vs target {target.shape}")
    err = ad.sub(pred, target)
    return ad.mean(ad.mul(err, err))


def loss_smape(pred: Tensor, target) -> Tensor:
    """Differentiable sMAPE (in percent); zero-denominator terms contribute 0."""
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.shape != target.shape:
        raise LengthMismatch(f"prediction {pred.shape} vs target {target.shape}")
    num = ad.abs_(ad.sub(pred, target))
    den = ad.add(ad.abs_(pred), np.abs(target))
    return ad.mul(ad.mean(ad.safe_div(num, den)), 200.0)


_LOSSES = {"mse": loss_mse, "smape": loss_smape}


@dataclass
class TrainResult:
    model: ForecastModel
    losses: np.ndarray


def train_model(model: ForecastModel, values, cfg: ForecastConfig = None,
                seed=None, rng=None) -> TrainResult:
    """Run the configured iteration budget over the training region `values`.

    Loss is recorded every iteration; a non-finite batch loss aborts with
    DivergenceDetected. Identical seeds give bitwise-identical parameters.
    """
    cfg = cfg if cfg is not None else model.cfg
    if rng is None:
        rng = np.random.default_rng(seed)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    loss_fn = _LOSSES[cfg.loss]
    lrs = {"topvec": cfg.lr_topvec, "encoder": cfg.lr_encoder,
           "mlp": cfg.lr_mlp, "backbone": cfg.lr_backbone}
    optimizer = Adam(model.parameter_groups(), lrs)
    cache = model.make_cache(values)

    losses = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        inputs, targets, starts = sample_batch(
            values, model.lookback, model.horizon, cfg.batch_size, rng)
        optimizer.zero_grad()
        total = None
        for x, y, s in zip(inputs, targets, starts):
            prepared = model.prepare_range(values, int(s), cache)
            sample_loss = loss_fn(model.forward(x, prepared), y)
            total = sample_loss if total is None else ad.add(total, sample_loss)
        batch_loss = ad.mul(total, 1.0 / cfg.batch_size)
        value = batch_loss.item()
        if not np.isfinite(value):
            raise DivergenceDetected(
                f"loss became non-finite at iteration {it} (value {value})"
            )
        losses[it] = value
        batch_loss.backward()
        optimizer.step(cosine_lr(1.0, it, cfg.iterations))
    return TrainResult(model=model, losses=losses)


def rolling_forecast(model: ForecastModel, values, lookback: int,
                     start: int = None, count: int = None) -> np.ndarray:
    """One-step forecasts over values[start:start+count] from true history.

    Each forecast at index i uses the actual observations i-T..i-1, so
    errors never compound.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if start is None:
        start = lookback
    if count is None:
        count = values.size - start
    if start < lookback:
        raise InsufficientHistory(
            f"first forecast index {start} has only {start} observations, needs {lookback}"
        )
    if start + count > values.size:
        raise InsufficientHistory("forecast range runs past the end of the series")
    cache = model.make_cache(values)
    out = np.empty(count)
    for i in range(count):
        idx = start + i
        x = values[idx - lookback:idx]
        prepared = model.prepare_range(values, idx - lookback, cache)
        out[i] = model.predict(x, prepared)[0]
    return out


def ensemble_forecast(members) -> np.ndarray:
    """Element-wise median over aligned member forecasts."""
    members = [np.asarray(m, dtype=np.float64).reshape(-1) for m in members]
    if not members:
        raise EmptyEnsemble("no member forecasts supplied")
    lengths = {m.size for m in members}
    if len(lengths) != 1:
        raise LengthMismatch(f"member forecasts differ in length: {sorted(lengths)}")
    return np.median(np.stack(members), axis=0)


@dataclass
class CrossValidationResult:
    lookback: int
    window: int
    model: ForecastModel
    validation_smape: float
    scores: dict   # lookback -> validation sMAPE


def cross_validate_lookback(values, train_len: int, val_len: int,
                            candidates, cfg: ForecastConfig, seed: int,
                            variant: str = None) -> CrossValidationResult:
    """Pick the lookback with minimal validation sMAPE over a (W, n) grid.

    `candidates` is an iterable of (window_count, window) pairs, each
    determining T = W + n - 1. One model per candidate is trained on the
    first `train_len` observations and scored by rolling one-step forecasts
    over the following `val_len` observations.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    variant = variant if variant is not None else cfg.variant
    best = None
    scores = {}
    for window_count, window in candidates:
        lookback = window_count + window - 1
        cand_cfg = ForecastConfig.from_dict({
            **cfg.to_dict(),
            "lookback": lookback, "window": window, "window_count": window_count,
        })
        model = make_variant(variant, cand_cfg, np.random.default_rng(seed),
                             training_values=values[:train_len])
        train_model(model, values[:train_len], cand_cfg, rng=np.random.default_rng(seed))
        forecasts = rolling_forecast(model, values[:train_len + val_len],
                                     lookback, start=train_len, count=val_len)
        score = smape(values[train_len:train_len + val_len], forecasts)
        scores[lookback] = score
        if best is None or score < best.validation_smape:
            best = CrossValidationResult(lookback, window, model, score, scores)
    best.scores = scores
    return best
