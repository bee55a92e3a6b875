"""Topological-attention forecasting for univariate time series.

Sliding windows of the input are summarized by 0-dimensional persistence
barcodes (from below and above), embedded through learnable coordinate
functions, attended over by a transformer encoder, and fed as an auxiliary
signal into a linear or N-BEATS forecaster.
"""

from .config import ForecastConfig, load_config_file, resolve_plan
from .data import SeriesRecord, SplitSpec, load_csv, split, synth_lumpy, synth_seasonal, write_csv
from .metrics import EvalContext, mase, naive2_forecast, naive_forecast, owa, smape
from .models import ForecastModel, load_checkpoint, make_variant, save_checkpoint
from .persistence import Bar, Barcode, bruteforce_barcode, lower_star_barcode, superlevel_barcode
from .train import (cross_validate_lookback, ensemble_forecast, rolling_forecast,
                    train_model)
from .vectorize import CoordinateFunctionBank, kmeanspp_init, topvec, vectorize_barcode
from .windowing import WindowPlan, WindowedBarcodes, plan, windowed_barcodes

__version__ = "0.1.0"

__all__ = [
    "Bar", "Barcode", "CoordinateFunctionBank", "EvalContext", "ForecastConfig",
    "ForecastModel", "SeriesRecord", "SplitSpec", "WindowPlan", "WindowedBarcodes",
    "bruteforce_barcode", "cross_validate_lookback", "ensemble_forecast",
    "kmeanspp_init", "load_checkpoint", "load_config_file", "load_csv",
    "lower_star_barcode", "make_variant", "mase", "naive2_forecast",
    "naive_forecast", "owa", "plan", "resolve_plan", "rolling_forecast",
    "save_checkpoint", "smape", "split", "superlevel_barcode", "synth_lumpy",
    "synth_seasonal", "topvec", "train_model", "vectorize_barcode",
    "windowed_barcodes", "write_csv", "__version__",
]
