"""Apply mined rules to produce nonanticipative extreme forecasts."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from analogcast.calendar import Sector, index_to_date, sector_of
from analogcast.climatology import AnomalySeries
from analogcast.errors import DataError
from analogcast.miner import Rule, pair_prefix

ABOVE_MAX = "above_max"
BELOW_MIN = "below_min"

CSV_FIELDS = [
    "rule_id", "i1", "i2", "n", "l", "trigger_start", "trigger_end",
    "target_date", "sector", "sign", "sum", "breach_side",
]


@dataclass(frozen=True)
class Forecast:
    rule_id: int
    rule: Rule
    trigger_start: dt.date
    trigger_end: dt.date
    target_date: dt.date
    target_sector: Sector
    predicted_sign: str
    sum_value: float
    breach_side: str

    @property
    def lead(self) -> int:
        return (self.target_date - self.trigger_end).days


def apply_rule(
    rule: Rule,
    anomalies: Mapping[int, AnomalySeries],
    day_range: tuple[int, int],
    epoch: dt.date,
    rule_id: int = 0,
) -> list[Forecast]:
    """Forecasts for every target day in ``day_range`` whose precursor sum escapes the envelope.

    The sum for target ``j`` reads only days ``[j-l-n+1, j-l]``.
    """
    for ds in (rule.i1, rule.i2):
        if ds not in anomalies:
            raise DataError(f"rule {rule_id}: dataset {ds} is not available")
    a1, a2 = anomalies[rule.i1], anomalies[rule.i2]
    start, end = day_range
    first = start - rule.l - rule.n + 1
    if first < 1 or end > len(a1) or start > end:
        raise DataError(
            f"rule {rule_id}: target range {start}..{end} needs data from day {first}, "
            f"outside the {len(a1)}-day epoch"
        )
    sums = pair_prefix(a1, a2).window_sums(rule.n)
    targets = np.arange(start, end + 1)
    x = sums[targets - rule.l - 1]
    with np.errstate(invalid="ignore"):
        above = x > rule.max_sum
        below = x < rule.min_sum
    out = []
    for k in np.flatnonzero(above | below):
        j = int(targets[k])
        target = index_to_date(j, epoch)
        out.append(
            Forecast(
                rule_id=rule_id,
                rule=rule,
                trigger_start=index_to_date(j - rule.l - rule.n + 1, epoch),
                trigger_end=index_to_date(j - rule.l, epoch),
                target_date=target,
                target_sector=sector_of(target),
                predicted_sign=rule.sign,
                sum_value=float(x[k]),
                breach_side=ABOVE_MAX if above[k] else BELOW_MIN,
            )
        )
    return out


def forecast_all(
    rules: Sequence[Rule],
    anomalies: Mapping[int, AnomalySeries],
    day_range: tuple[int, int],
    epoch: dt.date,
) -> list[Forecast]:
    """Forecasts of every rule, sorted by target date then rule id (1-based)."""
    out = []
    for k, rule in enumerate(rules, start=1):
        out.extend(apply_rule(rule, anomalies, day_range, epoch, rule_id=k))
    out.sort(key=lambda f: (f.target_date, f.rule_id))
    return out


def fire_runs(forecasts: Sequence[Forecast]) -> list[tuple[int, dt.date, dt.date]]:
    """Consecutive firing days per rule as ``(rule_id, first, last)``."""
    runs: list[list] = []
    for f in sorted(forecasts, key=lambda f: (f.rule_id, f.target_date)):
        if runs and runs[-1][0] == f.rule_id and (f.target_date - runs[-1][2]).days == 1:
            runs[-1][2] = f.target_date
        else:
            runs.append([f.rule_id, f.target_date, f.target_date])
    return [tuple(r) for r in runs]


def forecasts_to_csv(forecasts: Sequence[Forecast]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for f in forecasts:
        r = f.rule
        w.writerow([
            f.rule_id, r.i1, r.i2, r.n, r.l,
            f.trigger_start.isoformat(), f.trigger_end.isoformat(), f.target_date.isoformat(),
            str(f.target_sector), f.predicted_sign, repr(f.sum_value), f.breach_side,
        ])
    return buf.getvalue()


def forecasts_from_csv(text: str, rules: Sequence[Rule] | None = None) -> list[Forecast]:
    """Inverse of :func:`forecasts_to_csv`.

    Without ``rules`` the rule is rebuilt from the row's tuple and carries no
    envelope (NaN bounds).
    """
    out = []
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_FIELDS:
        raise DataError(f"forecast CSV header must be {','.join(CSV_FIELDS)}")
    for lineno, row in enumerate(reader, start=2):
        try:
            rule_id = int(row["rule_id"])
            if rules is not None:
                rule = rules[rule_id - 1]
            else:
                rule = Rule(0, row["sign"], int(row["i1"]), int(row["i2"]), int(row["n"]), int(row["l"]),
                            float("nan"), float("nan"), (), 0)
            target = dt.date.fromisoformat(row["target_date"])
            out.append(
                Forecast(
                    rule_id=rule_id,
                    rule=rule,
                    trigger_start=dt.date.fromisoformat(row["trigger_start"]),
                    trigger_end=dt.date.fromisoformat(row["trigger_end"]),
                    target_date=target,
                    target_sector=sector_of(target),
                    predicted_sign=row["sign"],
                    sum_value=float(row["sum"]),
                    breach_side=row["breach_side"],
                )
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DataError(f"forecast CSV line {lineno}: {exc}") from exc
    return out
