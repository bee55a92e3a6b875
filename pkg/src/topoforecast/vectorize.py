"""Learnable vectorization of barcodes via rational-hat coordinate functions.

A coordinate function with center c in the birth-death plane and radius r
scores a point p as

    s(p) = 1 / (1 + ||p - c||_1) - 1 / (1 + | |r| - ||p - c||_1 |)

and a barcode maps to the sum of scores over its bars. A bank of e such
functions yields an e-dimensional embedding per barcode; window rows
concatenate the sublevel-bank and superlevel-bank embeddings into 2e
columns.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import BankMismatch, NoBars
from .windowing import WindowedBarcodes


def rational_hat(point, center, radius) -> float:
    """Closed-form score of a single (birth, death) point, plain floats."""
    u = abs(point[0] - center[0]) + abs(point[1] - center[1])
    return 1.0 / (1.0 + u) - 1.0 / (1.0 + abs(abs(radius) - u))


@dataclass(frozen=True)
class CoordinateFunction:
    """One hat: a center in the plane and an (unconstrained) radius."""

    center: tuple
    radius: float

    def __call__(self, bar) -> float:
        return rational_hat((bar[0], bar[1]), self.center, self.radius)


def eval_coordinate(f: CoordinateFunction, bar) -> float:
    """Score one bar with one coordinate function."""
    return f(bar)


class CoordinateFunctionBank:
    """e coordinate functions with trainable centers (e, 2) and radii (e,)."""

    def __init__(self, centers, radii):
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
        radii = np.asarray(radii, dtype=np.float64).reshape(-1)
        if centers.shape[0] != radii.shape[0] or centers.shape[0] == 0:
            raise BankMismatch("bank needs matching, non-empty centers and radii")
        self.centers = Tensor(centers, requires_grad=True)
        self.radii = Tensor(radii, requires_grad=True)

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    def functions(self):
        c = self.centers.data
        r = self.radii.data
        return [CoordinateFunction((c[k, 0], c[k, 1]), r[k]) for k in range(self.size)]

    def parameters(self):
        return [self.centers, self.radii]

    def named_parameters(self, prefix: str = "bank"):
        return [(f"{prefix}.centers", self.centers), (f"{prefix}.radii", self.radii)]

    def scores(self, points: np.ndarray) -> Tensor:
        """Differentiable (e, N) score matrix for N diagram points."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        c = ad.reshape(self.centers, (self.size, 1, 2))
        u = ad.sum_(ad.abs_(ad.sub(points[np.newaxis, :, :], c)), axis=2)  # (e, N)
        r = ad.reshape(ad.abs_(self.radii), (self.size, 1))
        near = ad.pow_scalar(ad.add(u, 1.0), -1.0)
        rim = ad.pow_scalar(ad.add(ad.abs_(ad.sub(r, u)), 1.0), -1.0)
        return ad.sub(near, rim)

    def to_triples(self):
        c = self.centers.data
        r = self.radii.data
        return [[float(c[k, 0]), float(c[k, 1]), float(r[k])] for k in range(self.size)]

    def to_json(self) -> str:
        return json.dumps(self.to_triples())

    @classmethod
    def from_triples(cls, triples):
        arr = np.asarray(list(triples), dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise BankMismatch("expected a list of (cx, cy, r) triples")
        return cls(arr[:, :2], arr[:, 2])

    @classmethod
    def from_json(cls, text: str):
        return cls.from_triples(json.loads(text))


def vectorize_barcode(barcode, bank: CoordinateFunctionBank) -> Tensor:
    """Sum the bank's scores over all bars (essential included): an (e,) vector."""
    return ad.sum_(bank.scores(barcode.as_array()), axis=1)


def _bank_rows(bank: CoordinateFunctionBank, barcodes) -> Tensor:
    """(W, e) matrix whose row j embeds barcode j.

    All bars are scored in one pass; a constant 0/1 segment matrix then sums
    scores back per barcode, keeping the graph small for any window count.
    """
    arrays = [b.as_array() for b in barcodes]
    counts = [a.shape[0] for a in arrays]
    points = np.vstack(arrays)
    segments = np.zeros((len(arrays), points.shape[0]))
    lo = 0
    for j, c in enumerate(counts):
        segments[j, lo:lo + c] = 1.0
        lo += c
    return ad.matmul(segments, ad.transpose(bank.scores(points)))


def topvec(wb: WindowedBarcodes, bank_sub: CoordinateFunctionBank,
           bank_sup: CoordinateFunctionBank) -> Tensor:
    """Assemble the W x 2e attention input: sublevel columns, then superlevel."""
    if bank_sub.size != bank_sup.size:
        raise BankMismatch(
            f"banks disagree on size: {bank_sub.size} vs {bank_sup.size}"
        )
    return ad.concat(
        [_bank_rows(bank_sub, wb.sub), _bank_rows(bank_sup, wb.sup)], axis=1
    )


def topvec_matrix(wb, bank_sub, bank_sup) -> np.ndarray:
    """Forward-only variant of `topvec`."""
    return topvec(wb, bank_sub, bank_sup).data


def _kmeans_lloyd(points, centers, tol=1e-6, max_iter=100):
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        moved = 0.0
        new_centers = centers.copy()
        for k in range(centers.shape[0]):
            members = points[labels == k]
            if members.shape[0]:
                new_centers[k] = members.mean(axis=0)
                moved = max(moved, float(np.linalg.norm(new_centers[k] - centers[k])))
        centers = new_centers
        if moved <= tol:
            break
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return centers, d2.argmin(axis=1)


def _kmeanspp_seed(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, 2))
    centers[0] = points[rng.integers(n)]
    for i in range(1, k):
        d2 = ((points[:, None, :] - centers[None, :i, :]) ** 2).sum(axis=2).min(axis=1)
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all points already covered; duplicates unavoidable
        centers[i] = points[idx]
    return centers


def kmeanspp_init(barcodes, e: int, rng) -> CoordinateFunctionBank:
    """Bank initialization by k-means++ over all bar endpoints.

    Pools every (birth, death) point of the supplied barcodes, seeds k = e
    centers with k-means++, runs Lloyd iterations to convergence, and sets
    each radius to the mean L1 distance of the cluster to its center. A
    degenerate cluster (single point, or all points on the center) falls
    back to radius 1.0.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    arrays = [b.as_array() for b in barcodes]
    if not arrays:
        raise NoBars("no barcodes supplied")
    points = np.vstack(arrays)
    if points.shape[0] == 0:
        raise NoBars("barcode pool contains no bars")

    centers = _kmeanspp_seed(points, e, rng)
    centers, labels = _kmeans_lloyd(points, centers)

    radii = np.empty(e)
    for k in range(e):
        members = points[labels == k]
        if members.shape[0]:
            spread = float(np.abs(members - centers[k]).sum(axis=1).mean())
        else:
            spread = 0.0
        radii[k] = spread if spread > 0 else 1.0
    return CoordinateFunctionBank(centers, radii)


def pool_barcodes(wb_list):
    """Flatten windowed barcode sets into one list (both filtration sides)."""
    pool = []
    for wb in wb_list:
        pool.extend(wb.sub)
        pool.extend(wb.sup)
    return pool
