"""Series ingestion, synthetic generators, and chronological splits.

The CSV schema is one series per row: `id,frequency,horizon,v1,v2,...`
with values oldest first; rows may have different lengths and trailing
empty fields are ignored. Proprietary demand data is stood in for by two
generators covering the smooth / lumpy taxonomy.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EmptySeries, InvalidConfig, ParseError
from .metrics import SEASONALITY


@dataclass
class SeriesRecord:
    """One univariate series with its frequency tag and forecast horizon."""

    id: str
    frequency: str
    values: np.ndarray
    horizon: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size == 0:
            raise EmptySeries(f"series {self.id!r} has no observations")
        if self.horizon < 1:
            raise InvalidConfig(f"series {self.id!r} has horizon {self.horizon}")
        self.seasonality  # validate the tag eagerly

    @property
    def seasonality(self) -> int:
        tag = self.frequency
        if tag in SEASONALITY:
            return SEASONALITY[tag]
        if tag.startswith("custom:"):
            try:
                m = int(tag.split(":", 1)[1])
            except ValueError:
                raise InvalidConfig(f"bad custom frequency tag {tag!r}") from None
            if m < 1:
                raise InvalidConfig(f"custom seasonality must be positive, got {m}")
            return m
        raise InvalidConfig(f"unknown frequency tag {tag!r}")


@dataclass(frozen=True)
class SplitSpec:
    """Trailing contiguous held-out blocks: validation, then test, at the end."""

    test_fraction: float = 0.20
    validation_fraction: float = 0.05

    def __post_init__(self):
        if self.test_fraction < 0 or self.validation_fraction < 0:
            raise InvalidConfig("split fractions must be non-negative")
        if self.test_fraction + self.validation_fraction >= 1.0:
            raise InvalidConfig("split fractions must sum to less than 1")


def split(record: SeriesRecord, spec: SplitSpec = SplitSpec()):
    """(train, validation, test) index ranges partitioning the series in time.

    Held-out counts are floored; training takes the remainder at the front.
    """
    n = record.values.size
    test = int(n * spec.test_fraction)
    val = int(n * spec.validation_fraction)
    train = n - val - test
    if train < 1:
        raise EmptySeries(f"series {record.id!r} too short to split")
    return range(0, train), range(train, train + val), range(train + val, n)


def load_csv(path):
    """Parse a series CSV into records, reporting malformed cells precisely."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", line=1) from None
        if [c.strip() for c in header[:3]] != ["id", "frequency", "horizon"]:
            raise ParseError("header must start with id,frequency,horizon", line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 4:
                raise ParseError("row needs id,frequency,horizon and at least one value",
                                 line=line_no)
            sid = row[0].strip()
            freq = row[1].strip()
            try:
                horizon = int(row[2])
            except ValueError:
                raise ParseError(f"bad horizon {row[2]!r}", line=line_no, column=3) from None
            values = []
            for col, cell in enumerate(row[3:], start=4):
                cell = cell.strip()
                if cell == "":
                    continue  # ragged rows: trailing empties are padding
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"bad numeric value {cell!r}",
                                     line=line_no, column=col) from None
            if not values:
                raise EmptySeries(f"series {sid!r} has no observations (line {line_no})")
            records.append(SeriesRecord(sid, freq, np.array(values), horizon))
    return records


def write_csv(path, records) -> None:
    """Write records in canonical form (no padding, repr-exact floats)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "frequency", "horizon"])
        for rec in records:
            writer.writerow([rec.id, rec.frequency, rec.horizon]
                            + [repr(float(v)) for v in rec.values])


def select_series(records, series_id=None) -> SeriesRecord:
    """The record with `series_id`, or the only record when the file has one."""
    if series_id is not None:
        for rec in records:
            if rec.id == series_id:
                return rec
        raise EmptySeries(f"no series with id {series_id!r}")
    if len(records) != 1:
        raise InvalidConfig(
            f"file holds {len(records)} series; pick one with --series-id"
        )
    return records[0]


def synth_seasonal(length: int, period: int, amplitude: float, trend: float,
                   noise_sd: float, seed: int, level: float = 0.0,
                   series_id: str = None, frequency: str = None,
                   horizon: int = 1) -> SeriesRecord:
    """Smooth seasonal generator: sinusoid plus linear trend plus noise.

    The optional `level` shifts the whole series, handy for keeping values
    positive when percentage-based metrics are involved.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    values = (level + amplitude * np.sin(2.0 * np.pi * t / period) + trend * t
              + rng.normal(0.0, noise_sd, size=length))
    return SeriesRecord(
        id=series_id or f"seasonal-{seed}",
        frequency=frequency or f"custom:{period}",
        values=values,
        horizon=horizon,
    )


def synth_lumpy(length: int, demand_prob: float, qty_log_mean: float = 1.0,
                qty_log_sd: float = 1.0, seed: int = 0,
                series_id: str = None, horizon: int = 1) -> SeriesRecord:
    """Lumpy demand generator: zero-inflated lognormal quantities.

    Occurrence is Bernoulli(demand_prob) per step; quantity variation is
    high by construction (lognormal). All observations are non-negative.
    """
    if not 0.0 <= demand_prob <= 1.0:
        raise InvalidConfig(f"demand_prob must be in [0, 1], got {demand_prob}")
    rng = np.random.default_rng(seed)
    occurs = rng.random(length) < demand_prob
    quantities = rng.lognormal(qty_log_mean, qty_log_sd, size=length)
    return SeriesRecord(
        id=series_id or f"lumpy-{seed}",
        frequency="daily",
        values=np.where(occurs, quantities, 0.0),
        horizon=horizon,
    )
