"""0-dimensional persistent homology of a real sequence on the path complex.

A length-T sequence induces a sublevel-set filtration of the line graph on
vertices 1..T (edges between consecutive indices). Sweeping thresholds in
increasing value order, connected components are born at local minima and
merge at local maxima; the elder rule pairs each merge with the younger
component's birth. The surviving component is finitized as
(global minimum, global maximum) and flagged essential.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NonFiniteValue, OracleTooLarge


@dataclass(frozen=True, order=True)
class Bar:
    """One (birth, death) interval of a degree-0 barcode."""

    birth: float
    death: float
    essential: bool = False


@dataclass(frozen=True)
class Barcode:
    """Finite multiset of bars with exactly one essential bar.

    Bars are stored canonically sorted by (birth, death, essential), so two
    barcodes over the same multiset compare equal.
    """

    bars: tuple

    def __post_init__(self):
        ordered = tuple(sorted(self.bars))
        object.__setattr__(self, "bars", ordered)
        n_ess = sum(1 for b in ordered if b.essential)
        if n_ess != 1:
            raise ValueError(f"barcode must contain exactly one essential bar, got {n_ess}")
        for b in ordered:
            if b.death < b.birth:
                raise ValueError(f"bar death {b.death} precedes birth {b.birth}")

    def __len__(self):
        return len(self.bars)

    def __iter__(self):
        return iter(self.bars)

    @property
    def essential(self) -> Bar:
        for b in self.bars:
            if b.essential:
                return b
        raise AssertionError("unreachable: constructor enforces one essential bar")

    @property
    def finite(self) -> tuple:
        return tuple(b for b in self.bars if not b.essential)

    def as_array(self) -> np.ndarray:
        """All (birth, death) pairs, essential included, as a (k, 2) float array."""
        return np.array([(b.birth, b.death) for b in self.bars], dtype=np.float64)

    def to_csv(self) -> str:
        """Debug dump, one `birth,death,essential` line per bar, LF endings."""
        lines = [f"{b.birth!r},{b.death!r},{int(b.essential)}" for b in self.bars]
        return "\n".join(lines) + "\n"


def _check_values(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise EmptyInput("cannot compute a barcode of an empty sequence")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("sequence contains NaN or Inf")
    return arr


def _find(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def lower_star_barcode(values) -> Barcode:
    """Degree-0 barcode of the sublevel-set filtration of a sequence.

    Vertices activate in increasing (value, index) order; an edge activates
    once both endpoints are active. Merges follow the elder rule: the
    component with the smaller birth value survives (ties by smaller birth
    index) and the younger one emits (its birth, merge value). Bars with
    birth == death are dropped. The last surviving component becomes the
    essential bar (min value, max value).

    Runs in near-linear time via union-find with path compression and
    union by rank.
    """
    x = _check_values(values)
    t = x.size
    order = np.lexsort((np.arange(t), x)).tolist()
    vals = x.tolist()

    parent = list(range(t))
    rank = [0] * t
    birth_val = vals[:]        # per-root component birth value
    birth_idx = list(range(t))  # per-root component birth index
    active = bytearray(t)
    bars = []

    for v in order:
        active[v] = 1
        merge_val = vals[v]
        for nb in (v - 1, v + 1):
            if nb < 0 or nb >= t or not active[nb]:
                continue
            ra = _find(parent, v)
            rb = _find(parent, nb)
            if ra == rb:
                continue
            # elder rule: keep the component with the smaller (birth value, index)
            if (birth_val[ra], birth_idx[ra]) <= (birth_val[rb], birth_idx[rb]):
                elder, younger = ra, rb
            else:
                elder, younger = rb, ra
            if birth_val[younger] != merge_val:
                bars.append(Bar(birth_val[younger], merge_val))
            # union by rank; the merged root inherits the elder birth record
            if rank[ra] < rank[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            if rank[ra] == rank[rb]:
                rank[ra] += 1
            birth_val[ra] = birth_val[elder]
            birth_idx[ra] = birth_idx[elder]

    root = _find(parent, order[-1])
    bars.append(Bar(birth_val[root], max(vals), essential=True))
    return Barcode(tuple(bars))


def superlevel_barcode(values) -> Barcode:
    """Barcode of the negated sequence, analyzing the signal from above."""
    x = _check_values(values)
    return lower_star_barcode(-x)


def bruteforce_barcode(values, max_length: int = 20) -> Barcode:
    """Reference barcode by explicit threshold sweep; test oracle only.

    At every threshold the sublevel complex is materialized and connected
    components are recomputed from scratch; components that disappear
    between consecutive thresholds emit bars. Quadratic, so capped at
    `max_length` (raise the cap explicitly for larger sweeps).
    """
    x = _check_values(values)
    t = x.size
    if t > max_length:
        raise OracleTooLarge(f"oracle limited to length {max_length}, got {t}")
    vals = x.tolist()
    order = sorted(range(t), key=lambda i: (vals[i], i))

    active = [False] * t
    # activation rank per vertex, for picking a component's earliest vertex
    act_rank = [0] * t
    for r, v in enumerate(order):
        act_rank[v] = r

    prev_comps = set()
    bars = []
    for v in order:
        active[v] = True
        threshold = vals[v]
        comps = set()
        i = 0
        while i < t:
            if not active[i]:
                i += 1
                continue
            j = i
            oldest = i
            while j < t and active[j]:
                if act_rank[j] < act_rank[oldest]:
                    oldest = j
                j += 1
            comps.add(oldest)  # component identified by its earliest-activated vertex
            i = j
        for dead in prev_comps - comps:
            if vals[dead] != threshold:
                bars.append(Bar(vals[dead], threshold))
        prev_comps = comps

    (survivor,) = prev_comps
    bars.append(Bar(vals[survivor], max(vals), essential=True))
    return Barcode(tuple(bars))
