"""Day-index arithmetic, day-of-year keys and month-third sectors.

Day indices are 1-based: ``j = 1`` is the epoch date (1973-01-01 by default),
so with the default epoch ``j = 14975`` is 2013-12-31.
"""

from __future__ import annotations

import datetime as dt
from typing import NamedTuple

import numpy as np

from analogcast.errors import DataError

DEFAULT_EPOCH = dt.date(1973, 1, 1)
DEFAULT_END = dt.date(2013, 12, 31)

DayIndex = int


class DoyKey(NamedTuple):
    month: int
    day: int


class Sector(NamedTuple):
    """One third of a calendar month: days 1-10, 11-20 or 21-end."""

    year: int
    month: int
    third: int

    @property
    def ordinal(self) -> int:
        return (self.year * 12 + self.month - 1) * 3 + self.third - 1

    @classmethod
    def from_ordinal(cls, k: int) -> "Sector":
        months, third = divmod(k, 3)
        year, month0 = divmod(months, 12)
        return cls(year, month0 + 1, third + 1)

    def first_day(self) -> dt.date:
        return dt.date(self.year, self.month, (1, 11, 21)[self.third - 1])

    def last_day(self) -> dt.date:
        if self.third < 3:
            return dt.date(self.year, self.month, (10, 20)[self.third - 1])
        nxt = Sector.from_ordinal(self.ordinal + 1).first_day()
        return nxt - dt.timedelta(days=1)

    def label(self) -> str:
        part = ("beginning", "middle", "end")[self.third - 1]
        return f"The {part} of {dt.date(self.year, self.month, 1):%b %Y}"

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}/{self.third}"


def index_to_date(j: DayIndex, epoch: dt.date = DEFAULT_EPOCH) -> dt.date:
    if j < 1:
        raise DataError(f"day index must be >= 1, got {j}")
    return epoch + dt.timedelta(days=j - 1)


def date_to_index(d: dt.date, epoch: dt.date = DEFAULT_EPOCH) -> DayIndex:
    if d < epoch:
        raise DataError(f"date {d.isoformat()} precedes epoch {epoch.isoformat()}")
    return (d - epoch).days + 1


def epoch_length(start: dt.date = DEFAULT_EPOCH, end: dt.date = DEFAULT_END) -> int:
    """Number of days in ``[start, end]``; 14975 for the default epoch."""
    return date_to_index(end, start)


def sector_of(d: dt.date) -> Sector:
    third = 1 if d.day <= 10 else 2 if d.day <= 20 else 3
    return Sector(d.year, d.month, third)


def sector_count(start: dt.date, end: dt.date) -> int:
    """Number of distinct sectors intersecting ``[start, end]``."""
    if start > end:
        raise DataError(f"start {start.isoformat()} is after end {end.isoformat()}")
    return sector_of(end).ordinal - sector_of(start).ordinal + 1


def parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def month_day_arrays(epoch: dt.date, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Month (1..12) and day-of-month (1..31) for every position of an epoch."""
    days = np.datetime64(epoch.isoformat(), "D") + np.arange(length)
    months = days.astype("datetime64[M]")
    month = (months.astype(np.int64) % 12 + 1).astype(np.int8)
    day = ((days - months).astype(np.int64) + 1).astype(np.int8)
    return month, day
