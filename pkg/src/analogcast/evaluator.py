"""Sector-level verification of forecasts and null-hypothesis significance."""

from __future__ import annotations

import datetime as dt
import enum
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from analogcast.calendar import Sector, sector_count, sector_of
from analogcast.climatology import Climatology, ExtremeEvent, sign_value
from analogcast.errors import DataError
from analogcast.forecaster import Forecast
from analogcast.ingest import AlignedSeries

EXTREME_Z = 2.0
CLOSE_Z = 1.7
ONE_SD = 1.0


class OutcomeClass(str, enum.Enum):
    EXTREME_HIT = "ExtremeHit"
    CLOSE_TO_EXTREME = "CloseToExtreme"
    SAME_SIGN_GE_1SD = "SameSignGE1SD"
    SAME_SIGN_LT_1SD = "SameSignLT1SD"
    WRONG_SIGN = "WrongSign"

    @property
    def sign_correct(self) -> bool:
        return self is not OutcomeClass.WRONG_SIGN


class Outcome(NamedTuple):
    cls: OutcomeClass
    z: float


def observed_extremal(series: AlignedSeries, sector: Sector, sign: str, epoch: dt.date) -> tuple[float, dt.date]:
    """Maximum (positive sign) or minimum (negative) present value in a sector.

    Ties resolve to the earliest date.
    """
    first = max(sector.first_day(), epoch)
    last = min(sector.last_day(), epoch + dt.timedelta(days=len(series) - 1))
    if first > last:
        raise DataError(f"series {series.id}: sector {sector} is outside the epoch")
    lo, hi = (first - epoch).days, (last - epoch).days + 1
    vals = series.values[lo:hi]
    present = series.present[lo:hi]
    if not present.any():
        raise DataError(f"series {series.id}: no data in sector {sector}")
    if sign_value(sign) > 0:
        t = int(np.argmax(np.where(present, vals, -np.inf)))
    else:
        t = int(np.argmin(np.where(present, vals, np.inf)))
    return float(vals[t]), first + dt.timedelta(days=t)


def classify(observed: float, baseline: float, sd: float, predicted_sign: str) -> Outcome:
    if not sd > 0:
        raise DataError(f"standard deviation must be positive, got {sd}")
    z = (observed - baseline) / sd
    if z == 0 or (z > 0) != (sign_value(predicted_sign) > 0):
        return Outcome(OutcomeClass.WRONG_SIGN, z)
    a = abs(z)
    if a > EXTREME_Z:
        cls = OutcomeClass.EXTREME_HIT
    elif a > CLOSE_Z:
        cls = OutcomeClass.CLOSE_TO_EXTREME
    elif a >= ONE_SD:
        cls = OutcomeClass.SAME_SIGN_GE_1SD
    else:
        cls = OutcomeClass.SAME_SIGN_LT_1SD
    return Outcome(cls, z)


def base_rate(wave_count: int, sector_count: int) -> float:
    if sector_count <= 0 or not 0 <= wave_count <= sector_count:
        raise DataError(f"need 0 <= waves <= sectors and sectors > 0, got {wave_count}/{sector_count}")
    return wave_count / sector_count


def null_probability(p: float, m: int, sign_correct_others: int = 0) -> float:
    """Chance that ``m`` random sector picks include at least one wave, and
    that ``sign_correct_others`` further invocations also guess the sign."""
    if not 0.0 <= p <= 1.0 or m < 1 or sign_correct_others < 0:
        raise DataError(f"invalid arguments p={p}, m={m}, sign_correct_others={sign_correct_others}")
    return (1.0 - (1.0 - p) ** m) / 2.0**sign_correct_others


def wave_base_rate(groups: Sequence[Sequence[ExtremeEvent]], start: dt.date, end: dt.date) -> tuple[int, int, float]:
    """Wave count, sector count and base rate over ``[start, end]``.

    Each extreme group counts once, in the sector of its first day.
    """
    n_sectors = sector_count(start, end)
    return len(groups), n_sectors, base_rate(len(groups), n_sectors)


@dataclass
class Invocation:
    sector: Sector
    sign: str
    rule_ids: tuple[int, ...]
    fire_dates: tuple[dt.date, ...]
    observed: float
    observed_date: dt.date
    baseline: float
    sd: float
    z: float
    outcome: OutcomeClass

    def to_dict(self) -> dict:
        return {
            "sector": str(self.sector),
            "sector_label": self.sector.label(),
            "sign": self.sign,
            "rules": list(self.rule_ids),
            "fire_dates": [d.isoformat() for d in self.fire_dates],
            "observed": self.observed,
            "observed_date": self.observed_date.isoformat(),
            "baseline": self.baseline,
            "sd": self.sd,
            "z": self.z,
            "class": self.outcome.value,
        }


@dataclass
class EvaluationReport:
    invocations: list[Invocation]
    extreme_groups: int
    predicted_groups: int
    extremes_recall: float
    forecast_precision: float | None
    forecast_precision_lenient: float | None
    sign_accuracy: float | None
    significance: dict | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "invocations": [inv.to_dict() for inv in self.invocations],
            "extreme_groups": self.extreme_groups,
            "predicted_groups": self.predicted_groups,
            "extremes_recall": self.extremes_recall,
            "forecast_precision": self.forecast_precision,
            "forecast_precision_lenient": self.forecast_precision_lenient,
            "sign_accuracy": self.sign_accuracy,
            "significance": self.significance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self, units: str = "") -> str:
        u = f", {units}" if units else ""
        head = ["Rule No.", "Forecast dates", "Forecasted sector", f"Observed{u}", f"Baseline{u}", f"SD{u}", "z", "Analysis"]
        rows = [
            [
                ", ".join(map(str, inv.rule_ids)),
                _date_runs(inv.fire_dates),
                inv.sector.label(),
                f"{inv.observed:.1f} ({inv.observed_date:%b %d, %Y})",
                f"{inv.baseline:.1f}",
                f"{inv.sd:.1f}",
                f"{inv.z:+.2f}",
                inv.outcome.value,
            ]
            for inv in self.invocations
        ]
        widths = [max(len(r[k]) for r in [head] + rows) for k in range(len(head))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [head] + rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        pct = lambda v: "n/a" if v is None else f"{100 * v:.1f} %"
        lines.append("")
        lines.append(f"recall {pct(self.extremes_recall)} ({self.predicted_groups}/{self.extreme_groups} groups), "
                     f"precision {pct(self.forecast_precision)} (lenient {pct(self.forecast_precision_lenient)}), "
                     f"sign accuracy {pct(self.sign_accuracy)}")
        if self.significance:
            s = self.significance
            lines.append(f"null probability {s['probability']:.4f} (p={s['base_rate']:.4f}, m={s['invocations']}, "
                         f"sign-correct others={s['sign_correct_others']})")
        return "\n".join(lines) + "\n"


def _date_runs(dates: Sequence[dt.date]) -> str:
    runs: list[list[dt.date]] = []
    for d in sorted(dates):
        if runs and (d - runs[-1][1]).days == 1:
            runs[-1][1] = d
        else:
            runs.append([d, d])
    return ", ".join(f"{a:%b %d}" if a == b else f"{a:%b %d}-{b:%d}" for a, b in runs) + (
        f", {dates[0]:%Y}" if dates else ""
    )


def evaluate(
    forecasts: Sequence[Forecast],
    series: AlignedSeries,
    clim: Climatology,
    extreme_groups: Sequence[Sequence[ExtremeEvent]],
    validation: tuple[dt.date, dt.date],
    epoch: dt.date,
    rate: float | None = None,
) -> EvaluationReport:
    """Score forecasts over ``validation``.

    Forecasts sharing a target sector and sign form one invocation. An
    extreme group counts as predicted when one of its days falls in an
    invoked sector of the same sign. ``rate`` (the wave base rate) enables
    the significance figure.
    """
    start, end = validation
    if start > end:
        raise DataError(f"empty validation range {start}..{end}")
    by_sector: dict[tuple[Sector, str], list[Forecast]] = {}
    for f in forecasts:
        if start <= f.target_date <= end:
            by_sector.setdefault((f.target_sector, f.predicted_sign), []).append(f)

    invocations = []
    for (sector, sign), fs in sorted(by_sector.items(), key=lambda kv: (kv[0][0].ordinal, kv[0][1])):
        value, when = observed_extremal(series, sector, sign, epoch)
        base, sd, _ = clim[(when.month, when.day)]
        outcome = classify(value, base, sd, sign)
        invocations.append(
            Invocation(
                sector=sector,
                sign=sign,
                rule_ids=tuple(sorted({f.rule_id for f in fs})),
                fire_dates=tuple(sorted({f.target_date for f in fs})),
                observed=value,
                observed_date=when,
                baseline=base,
                sd=sd,
                z=outcome.z,
                outcome=outcome.cls,
            )
        )

    invoked = {(inv.sector, inv.sign) for inv in invocations}
    groups = [
        g for g in extreme_groups
        if any(start <= epoch + dt.timedelta(days=ev.j - 1) <= end for ev in g)
    ]
    predicted = sum(
        any((sector_of(epoch + dt.timedelta(days=ev.j - 1)), ev.sign) in invoked for ev in g) for g in groups
    )
    m = len(invocations)
    hits = sum(inv.outcome is OutcomeClass.EXTREME_HIT for inv in invocations)
    close = sum(inv.outcome is OutcomeClass.CLOSE_TO_EXTREME for inv in invocations)
    signs = sum(inv.outcome.sign_correct for inv in invocations)

    significance = None
    if rate is not None and m:
        others = signs - hits if hits else signs
        significance = {
            "base_rate": rate,
            "invocations": m,
            "sign_correct_others": others,
            "at_least_one": null_probability(rate, m, 0),
            "probability": null_probability(rate, m, others),
        }
    return EvaluationReport(
        invocations=invocations,
        extreme_groups=len(groups),
        predicted_groups=predicted,
        extremes_recall=predicted / len(groups) if groups else 0.0,
        forecast_precision=hits / m if m else None,
        forecast_precision_lenient=(hits + close) / m if m else None,
        sign_accuracy=signs / m if m else None,
        significance=significance,
    )


def significance_from_counts(waves: int, sectors: int, m: int, sign_others: int) -> tuple[float, float, float]:
    """``(p, raw, adjusted)`` for the CLI ``signif`` command."""
    p = base_rate(waves, sectors)
    return p, null_probability(p, m, 0), null_probability(p, m, sign_others)

