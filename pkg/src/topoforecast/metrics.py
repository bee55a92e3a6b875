"""Point-forecast evaluation: sMAPE, MASE, OWA, naive baselines, rank tables.

Conventions follow M4 practice: sMAPE terms with zero denominator count as
0, MASE scales by the in-sample seasonal-naive error with per-frequency
seasonality m, and OWA averages both measures relative to the seasonally
adjusted naive baseline.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import (EmptyHorizon, InsufficientSeasons, LengthMismatch,
                     ZeroBaseline, ZeroScale)

SEASONALITY = {
    "yearly": 1,
    "quarterly": 4,
    "monthly": 12,
    "weekly": 1,
    "daily": 1,
    "hourly": 24,
}


@dataclass(frozen=True)
class EvalContext:
    """History, seasonality, and horizon for scaled-error evaluation."""

    history: np.ndarray
    seasonality: int = 1
    horizon: int = 1

    def __post_init__(self):
        object.__setattr__(self, "history",
                           np.asarray(self.history, dtype=np.float64).reshape(-1))
        if self.seasonality < 1:
            raise ZeroScale("seasonality must be a positive integer")
        if self.seasonality >= self.history.size:
            raise InsufficientSeasons(
                f"history of length {self.history.size} is too short for seasonality "
                f"{self.seasonality}"
            )


def _pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise EmptyHorizon("no observations to score")
    if y.size != y_hat.size:
        raise LengthMismatch(f"actuals ({y.size}) and forecasts ({y_hat.size}) differ")
    return y, y_hat


def smape(y, y_hat) -> float:
    """Symmetric MAPE in percent, in [0, 200]; 0/0 terms contribute 0."""
    y, y_hat = _pair(y, y_hat)
    num = np.abs(y - y_hat)
    den = np.abs(y) + np.abs(y_hat)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return float(200.0 / y.size * terms.sum())


def mase(y, y_hat, ctx: EvalContext) -> float:
    """Mean absolute error scaled by the in-sample seasonal-naive error."""
    y, y_hat = _pair(y, y_hat)
    m = ctx.seasonality
    x = ctx.history
    scale = np.abs(x[m:] - x[:-m]).mean()
    if scale == 0:
        raise ZeroScale("history is constant within its season; MASE undefined")
    return float(np.abs(y - y_hat).mean() / scale)


def owa(smape_method: float, mase_method: float,
        smape_naive2: float, mase_naive2: float) -> float:
    """Average of the sMAPE and MASE ratios against the Naive2 baseline."""
    if smape_naive2 <= 0 or mase_naive2 <= 0:
        raise ZeroBaseline("baseline sMAPE and MASE must be positive")
    return 0.5 * (smape_method / smape_naive2 + mase_method / mase_naive2)


def naive_forecast(ctx: EvalContext) -> np.ndarray:
    """Repeat the last observation over the horizon."""
    if ctx.history.size == 0:
        raise EmptyHorizon("empty history")
    return np.full(ctx.horizon, ctx.history[-1])


def seasonal_indices(x: np.ndarray, m: int) -> np.ndarray:
    """Multiplicative seasonal indices via centered moving average, mean 1.

    For even m the moving average is the standard 2 x m variant. Positions
    with no usable ratio (e.g. a zero moving average) default to 1 before
    normalization.
    """
    n = x.size
    if n < 2 * m:
        raise InsufficientSeasons(f"need at least two full seasons ({2 * m}), have {n}")
    cma = np.full(n, np.nan)
    if m % 2 == 0:
        half = m // 2
        kernel = np.ones(m + 1)
        kernel[0] = kernel[-1] = 0.5
        kernel /= m
        for t in range(half, n - half):
            cma[t] = kernel @ x[t - half:t + half + 1]
    else:
        half = (m - 1) // 2
        for t in range(half, n - half):
            cma[t] = x[t - half:t + half + 1].mean()

    indices = np.ones(m)
    for pos in range(m):
        t = np.arange(pos, n, m)
        usable = t[np.isfinite(cma[t]) & (cma[t] != 0)]
        if usable.size:
            indices[pos] = (x[usable] / cma[usable]).mean()
    indices *= m / indices.sum()
    return indices


def naive2_forecast(ctx: EvalContext) -> np.ndarray:
    """Naive forecast after multiplicative seasonal adjustment.

    With seasonality 1 this is exactly the naive forecast. Otherwise the
    history is deseasonalized by classical decomposition, continued with
    its last adjusted value, and reseasonalized per horizon position.
    """
    m = ctx.seasonality
    if m == 1:
        return naive_forecast(ctx)
    x = ctx.history
    idx = seasonal_indices(x, m)
    positions = np.arange(x.size) % m
    adjusted = x / idx[positions]
    future = (np.arange(ctx.horizon) + x.size) % m
    return adjusted[-1] * idx[future]


def rank_and_diff(scores) -> tuple:
    """Average rank and average percentage gap to the per-series best.

    `scores` is a (methods x series) matrix of sMAPE values, lower better.
    Ties share the mean rank. The gap of method v on series s is
    (1 - best_s / v_s) * 100.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.size == 0:
        raise LengthMismatch("expected a non-empty methods x series matrix")
    if not np.all(np.isfinite(scores)):
        raise ZeroScale("scores must be finite")
    ranks = np.stack([rankdata(scores[:, s], method="average")
                      for s in range(scores.shape[1])], axis=1)
    best = scores.min(axis=0)
    diffs = (1.0 - best / scores) * 100.0
    return ranks.mean(axis=1), diffs.mean(axis=1)


@dataclass
class ScoreReport:
    """Per-series scores plus aggregates for a cohort of methods."""

    methods: list
    series_ids: list
    smape_table: np.ndarray     # methods x series
    mase_table: np.ndarray      # methods x series
    smape_mean: np.ndarray      # per method
    mase_mean: np.ndarray       # per method
    owa: dict = field(default_factory=dict)          # method -> OWA vs Naive2
    avg_rank: np.ndarray = None
    avg_pct_diff: np.ndarray = None

    def to_json(self) -> str:
        payload = {
            "methods": list(self.methods),
            "series": list(self.series_ids),
            "smape_mean": {m: float(v) for m, v in zip(self.methods, self.smape_mean)},
            "mase_mean": {m: float(v) for m, v in zip(self.methods, self.mase_mean)},
            "owa": {m: float(v) for m, v in self.owa.items()},
        }
        if self.avg_rank is not None:
            payload["avg_rank"] = {m: float(v) for m, v in zip(self.methods, self.avg_rank)}
            payload["avg_pct_diff"] = {
                m: float(v) for m, v in zip(self.methods, self.avg_pct_diff)}
        return json.dumps(payload, sort_keys=True, indent=2)


def score_methods(methods: dict, actuals: dict, contexts: dict) -> ScoreReport:
    """Score every method on every series and attach OWA / rank statistics.

    `methods` maps method name -> {series_id -> forecast vector}; `actuals`
    maps series_id -> truth vector; `contexts` maps series_id ->
    EvalContext. OWA uses an internally computed Naive2 baseline.
    """
    names = list(methods)
    series_ids = list(actuals)
    smape_t = np.zeros((len(names), len(series_ids)))
    mase_t = np.zeros_like(smape_t)
    for i, name in enumerate(names):
        for j, sid in enumerate(series_ids):
            smape_t[i, j] = smape(actuals[sid], methods[name][sid])
            mase_t[i, j] = mase(actuals[sid], methods[name][sid], contexts[sid])

    naive2_smape = np.zeros(len(series_ids))
    naive2_mase = np.zeros(len(series_ids))
    for j, sid in enumerate(series_ids):
        ctx = contexts[sid]
        baseline = naive2_forecast(
            EvalContext(ctx.history, ctx.seasonality, len(np.atleast_1d(actuals[sid]))))
        naive2_smape[j] = smape(actuals[sid], baseline)
        naive2_mase[j] = mase(actuals[sid], baseline, ctx)

    report = ScoreReport(
        methods=names, series_ids=series_ids,
        smape_table=smape_t, mase_table=mase_t,
        smape_mean=smape_t.mean(axis=1), mase_mean=mase_t.mean(axis=1),
    )
    base_smape = naive2_smape.mean()
    base_mase = naive2_mase.mean()
    if base_smape > 0 and base_mase > 0:
        for i, name in enumerate(names):
            report.owa[name] = owa(report.smape_mean[i], report.mase_mean[i],
                                   base_smape, base_mase)
    if len(names) >= 1:
        report.avg_rank, report.avg_pct_diff = rank_and_diff(smape_t)
    return report
