"""Day-of-year climatology, anomalies and 2-SD extreme detection."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from analogcast.calendar import DoyKey, index_to_date, month_day_arrays
from analogcast.errors import DataError
from analogcast.ingest import AlignedSeries

log = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"
SIGNS = (POSITIVE, NEGATIVE)

# Feb 29 keeps its own statistics only with at least this many samples;
# otherwise it borrows the average of Feb 28 and Mar 1.
FEB29_MIN_SAMPLES = 5


def sign_value(sign: str) -> int:
    if sign == POSITIVE:
        return 1
    if sign == NEGATIVE:
        return -1
    raise ValueError(f"sign must be {POSITIVE!r} or {NEGATIVE!r}, got {sign!r}")


@dataclass
class Climatology:
    """Per (month, day) mean, standard deviation and sample count.

    Tables are indexed ``[month, day]`` with shape (13, 32); row 0 and
    column 0 are unused. Undefined entries are NaN.
    """

    mean: np.ndarray
    sd: np.ndarray
    count: np.ndarray
    period: tuple[dt.date, dt.date]
    ddof: int = 0
    feb29_borrowed: bool = False

    def __getitem__(self, key: DoyKey) -> tuple[float, float, int]:
        m, d = key
        return float(self.mean[m, d]), float(self.sd[m, d]), int(self.count[m, d])

    def keys(self) -> list[DoyKey]:
        ms, ds = np.nonzero(np.isfinite(self.mean))
        return [DoyKey(int(m), int(d)) for m, d in zip(ms, ds)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["month", "day", "mean", "sd", "n"])
        for m, d in self.keys():
            sd = self.sd[m, d]
            w.writerow([m, d, repr(float(self.mean[m, d])), "" if np.isnan(sd) else repr(float(sd)), int(self.count[m, d])])
        return buf.getvalue()


@dataclass
class AnomalySeries:
    id: int
    values: np.ndarray
    present: np.ndarray
    epoch: dt.date = field(default=None)  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.values)


class ExtremeEvent(NamedTuple):
    j: int
    sign: str
    anomaly: float
    z: float


@dataclass
class ExtremeSet:
    """Result of :func:`detect_extremes`.

    ``flags`` holds +1/-1 for extremes, 0 for ordinary days and is only
    meaningful where ``known`` is True (present value and a positive SD).
    """

    positives: list[ExtremeEvent]
    negatives: list[ExtremeEvent]
    degenerate: list[int]
    flags: np.ndarray
    known: np.ndarray

    def of_sign(self, sign: str) -> list[ExtremeEvent]:
        return self.positives if sign_value(sign) > 0 else self.negatives


def compute_climatology(
    series: AlignedSeries,
    period: tuple[dt.date, dt.date],
    epoch: dt.date,
    ddof: int = 0,
    feb29_min_samples: int = FEB29_MIN_SAMPLES,
) -> Climatology:
    """Mean and SD of present values per calendar day over ``period``.

    ``ddof=0`` gives the population SD, ``ddof=1`` the sample SD.
    """
    start, end = period
    lo = (start - epoch).days
    hi = (end - epoch).days + 1
    if lo < 0 or hi > len(series) or lo >= hi:
        raise DataError(f"climatology period {start}..{end} is outside the series epoch")
    month, day = month_day_arrays(start, hi - lo)
    vals = series.values[lo:hi]
    ok = series.present[lo:hi]
    if not ok.any():
        raise DataError(f"series {series.id} has no present values in {start}..{end}")

    key = month[ok].astype(np.int64) * 32 + day[ok]
    x = vals[ok]
    count = np.bincount(key, minlength=13 * 32).astype(np.int64)
    total = np.bincount(key, weights=x, minlength=13 * 32)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
        dev2 = np.bincount(key, weights=(x - mean[key]) ** 2, minlength=13 * 32)
        sd = np.where(count >= max(2, ddof + 1), np.sqrt(dev2 / np.maximum(count - ddof, 1)), np.nan)
    mean = mean.reshape(13, 32)
    sd = sd.reshape(13, 32)
    count = count.reshape(13, 32)

    borrowed = False
    if count[2, 29] < feb29_min_samples and count[2, 28] > 0 and count[3, 1] > 0:
        mean[2, 29] = 0.5 * (mean[2, 28] + mean[3, 1])
        sd[2, 29] = 0.5 * (sd[2, 28] + sd[3, 1])
        borrowed = True
    return Climatology(mean, sd, count, (start, end), ddof, borrowed)


def anomalies(series: AlignedSeries, clim: Climatology, epoch: dt.date) -> AnomalySeries:
    month, day = month_day_arrays(epoch, len(series))
    base = clim.mean[month, day]
    bad = series.present & ~np.isfinite(base)
    if bad.any():
        t = int(np.argmax(bad))
        raise DataError(
            f"series {series.id}: no climatology for key ({month[t]}, {day[t]}) "
            f"needed on {index_to_date(t + 1, epoch).isoformat()}"
        )
    values = np.where(series.present, series.values - np.where(series.present, base, 0.0), np.nan)
    return AnomalySeries(series.id, values, series.present.copy(), epoch)


def detect_extremes(anom: AnomalySeries, clim: Climatology, threshold_sd: float = 2.0) -> ExtremeSet:
    """Days whose anomaly lies strictly beyond ``threshold_sd`` SDs."""
    if threshold_sd <= 0:
        raise ValueError("threshold_sd must be positive")
    month, day = month_day_arrays(anom.epoch, len(anom))
    sd = clim.sd[month, day]
    usable = anom.present & np.isfinite(sd) & (sd > 0)
    degenerate = np.flatnonzero(anom.present & ~usable) + 1
    if len(degenerate):
        log.info("series %d: %d days without a usable SD skipped", anom.id, len(degenerate))

    x = np.where(usable, anom.values, 0.0)
    limit = threshold_sd * np.where(usable, sd, 1.0)
    flags = np.zeros(len(anom), dtype=np.int8)
    flags[usable & (x > limit)] = 1
    flags[usable & (x < -limit)] = -1

    def events(sign: str) -> list[ExtremeEvent]:
        idx = np.flatnonzero(flags == sign_value(sign))
        return [ExtremeEvent(int(t) + 1, sign, float(x[t]), float(x[t] / sd[t])) for t in idx]

    return ExtremeSet(events(POSITIVE), events(NEGATIVE), degenerate.tolist(), flags, usable)


def group_extremes(events: Sequence[ExtremeEvent], group_gap: int = 3) -> list[list[ExtremeEvent]]:
    """Chain events whose consecutive day gap is at most ``group_gap``."""
    groups: list[list[ExtremeEvent]] = []
    for ev in events:
        if groups and ev.j - groups[-1][-1].j <= group_gap:
            groups[-1].append(ev)
        else:
            groups.append([ev])
    return groups


def extremes_csv(events: Sequence[ExtremeEvent], epoch: dt.date) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "sign", "anomaly", "z"])
    for ev in sorted(events, key=lambda e: e.j):
        w.writerow([index_to_date(ev.j, epoch).isoformat(), ev.sign, repr(ev.anomaly), repr(ev.z)])
    return buf.getvalue()


@dataclass
class AnomalyTable:
    """Climatologies and anomalies for every dataset of a store."""

    epoch: dt.date
    climatologies: dict[int, Climatology]
    anomalies: dict[int, AnomalySeries]


def anomaly_table(
    series: Mapping[int, AlignedSeries],
    epoch: dt.date,
    period: tuple[dt.date, dt.date],
    ddof: int = 0,
) -> AnomalyTable:
    clims, anoms = {}, {}
    for ds_id in sorted(series):
        clim = compute_climatology(series[ds_id], period, epoch, ddof)
        clims[ds_id] = clim
        anoms[ds_id] = anomalies(series[ds_id], clim, epoch)
    return AnomalyTable(epoch, clims, anoms)
