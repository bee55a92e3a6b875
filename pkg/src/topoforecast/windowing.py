"""Decomposition of a series into overlapping sub-windows with barcode pairs.

A length-T input yields W = T - n + 1 windows of length n, stepped by one
observation. Each window is summarized from below and from above, giving a
(sublevel, superlevel) barcode pair per window.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, WindowTooLong, WindowTooShort
from .persistence import Barcode, lower_star_barcode, superlevel_barcode


@dataclass(frozen=True)
class WindowPlan:
    """Window arithmetic for one decomposition: length = count + window - 1."""

    length: int   # T, full input length
    window: int   # n, observations per window
    count: int    # W, number of windows
    step: int = 1


def plan(length: int, window: int) -> WindowPlan:
    """Build the window plan for input length `length` and window size `window`."""
    if window < 2:
        raise WindowTooShort(f"window must cover at least 2 observations, got {window}")
    if window > length:
        raise WindowTooLong(f"window {window} exceeds input length {length}")
    return WindowPlan(length=length, window=window, count=length - window + 1)


def default_window(length: int) -> int:
    """Default window size: 70% of the input length, floored."""
    return int(0.7 * length)


@dataclass(frozen=True)
class WindowedBarcodes:
    """Per-window barcode pairs; sub/sup are index-aligned, one per window."""

    sub: tuple
    sup: tuple

    def __post_init__(self):
        if len(self.sub) != len(self.sup):
            raise LengthMismatch("sublevel/superlevel barcode counts differ")

    @property
    def count(self) -> int:
        return len(self.sub)


def windowed_barcodes(x, window_plan: WindowPlan) -> WindowedBarcodes:
    """Compute both barcodes for every sliding window of `x`."""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size != window_plan.length:
        raise LengthMismatch(
            f"input length {arr.size} does not match plan length {window_plan.length}"
        )
    n = window_plan.window
    sub = []
    sup = []
    for j in range(window_plan.count):
        chunk = arr[j:j + n]
        sub.append(lower_star_barcode(chunk))
        sup.append(superlevel_barcode(chunk))
    return WindowedBarcodes(sub=tuple(sub), sup=tuple(sup))


def window_matrix(x, window_plan: WindowPlan) -> np.ndarray:
    """Raw W x n matrix of the sliding windows themselves."""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size != window_plan.length:
        raise LengthMismatch(
            f"input length {arr.size} does not match plan length {window_plan.length}"
        )
    n = window_plan.window
    return np.stack([arr[j:j + n] for j in range(window_plan.count)])


class SlidingBarcodeCache:
    """Memoized barcode pairs for every window offset of a fixed region.

    Training repeatedly revisits the same absolute window offsets; caching
    the (sub, sup) bar arrays makes the persistence cost a one-off.
    """

    def __init__(self, values, window: int):
        self.values = np.asarray(values, dtype=np.float64).reshape(-1)
        self.window = window
        self._pairs = {}

    def pair(self, offset: int):
        """(sublevel Barcode, superlevel Barcode) of the window at `offset`."""
        hit = self._pairs.get(offset)
        if hit is None:
            chunk = self.values[offset:offset + self.window]
            if chunk.size != self.window:
                raise LengthMismatch(f"window at offset {offset} runs past the region end")
            hit = (lower_star_barcode(chunk), superlevel_barcode(chunk))
            self._pairs[offset] = hit
        return hit

    def barcodes(self, start: int, count: int) -> WindowedBarcodes:
        """Windowed barcodes of the length T = count + window - 1 slice at `start`."""
        pairs = [self.pair(start + j) for j in range(count)]
        return WindowedBarcodes(
            sub=tuple(p[0] for p in pairs),
            sup=tuple(p[1] for p in pairs),
        )
