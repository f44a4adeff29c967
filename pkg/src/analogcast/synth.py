"""Synthetic multi-dataset worlds with optional planted precursor rules.

Background: every dataset is a day-of-year seasonal cycle plus i.i.d.
Gaussian noise. A planted rule ``(i1, i2, n, l)`` with target dates ``d``
raises the anomalies of ``i1`` and ``i2`` over each window
``[d-l-n+1, d-l]`` until the pair sum there exceeds every other window sum
of the pair by ``precursor_boost``, and pushes the target anomaly on ``d`` to
``target_z`` noise SDs.

Random numbers come from Philox4x64-10 keyed by ``(seed, dataset id)``,
mapped to normals with the cosine branch of Box-Muller on 53-bit uniforms,
so a world can be regenerated outside numpy from the recorded algorithm id.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from analogcast.calendar import DEFAULT_EPOCH, date_to_index, index_to_date, month_day_arrays
from analogcast.climatology import (
    AnomalySeries,
    Climatology,
    ExtremeSet,
    detect_extremes,
    sign_value,
)
from analogcast.errors import ConfigError
from analogcast.ingest import AlignedSeries, DatasetDescriptor, Store
from analogcast.miner import pair_prefix

RNG_ALGORITHM = "philox4x64-10/key=(seed,dataset)/box-muller-cos/u53"


@dataclass(frozen=True)
class PlantedRule:
    i1: int
    i2: int
    n: int
    l: int
    extreme_dates: tuple[dt.date, ...]
    precursor_boost: float
    sign: str = "positive"
    target_z: float = 5.0

    def __post_init__(self):
        dates = tuple(d if isinstance(d, dt.date) else dt.date.fromisoformat(d) for d in self.extreme_dates)
        object.__setattr__(self, "extreme_dates", tuple(sorted(dates)))
        sign_value(self.sign)


@dataclass(frozen=True)
class SynthSpec:
    dataset_count: int
    years: int
    seed: int
    seasonal_amplitude: float = 10.0
    noise_sd: float = 5.0
    planted: tuple[PlantedRule, ...] = ()
    target_id: int = 1
    epoch: dt.date = DEFAULT_EPOCH

    def __post_init__(self):
        object.__setattr__(
            self, "planted", tuple(p if isinstance(p, PlantedRule) else PlantedRule(**p) for p in self.planted)
        )
        if isinstance(self.epoch, str):
            object.__setattr__(self, "epoch", dt.date.fromisoformat(self.epoch))

    @property
    def length(self) -> int:
        end = dt.date(self.epoch.year + self.years, self.epoch.month, self.epoch.day)
        return (end - self.epoch).days

    def validate(self) -> None:
        if self.dataset_count < 1 or self.years < 1:
            raise ConfigError("dataset_count and years must be positive")
        if not 1 <= self.target_id <= self.dataset_count:
            raise ConfigError(f"target_id {self.target_id} outside 1..{self.dataset_count}")
        if self.noise_sd <= 0:
            raise ConfigError("noise_sd must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for p in self.planted:
            ids = (p.i1, p.i2)
            if not all(1 <= i <= self.dataset_count for i in ids) or self.target_id in ids:
                raise ConfigError(f"planted pair {ids}: ids must exist and differ from the target")
            if p.precursor_boost <= 0 or p.n < 1 or p.l < 1:
                raise ConfigError("planted n, l and precursor_boost must be positive")
            for d in p.extreme_dates:
                j = (d - self.epoch).days + 1
                if j - p.l - p.n + 1 < 1 or j > self.length:
                    raise ConfigError(f"planted window for {d.isoformat()} (n={p.n}, l={p.l}) falls outside the epoch")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "SynthSpec":
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"synth spec: {exc}") from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epoch"] = self.epoch.isoformat()
        for p in d["planted"]:
            p["extreme_dates"] = [x.isoformat() for x in p["extreme_dates"]]
        return d


def standard_normals(seed: int, stream: int, size: int) -> np.ndarray:
    bits = np.random.Philox(key=[seed, stream]).random_raw(2 * size).reshape(size, 2)
    u1 = ((bits[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (bits[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _seasonal_table(amplitude: float, level: float) -> np.ndarray:
    table = np.full((13, 32), np.nan)
    for k in range(366):
        d = dt.date(2000, 1, 1) + dt.timedelta(days=k)
        table[d.month, d.day] = level + amplitude * np.sin(2.0 * np.pi * (k - 108) / 366.0)
    return table


@dataclass
class SyntheticWorld:
    spec: SynthSpec
    values: dict[int, np.ndarray]
    true_anomalies: dict[int, np.ndarray]
    seasonal: dict[int, np.ndarray]
    planted_report: list[dict] = field(default_factory=list)

    @property
    def epoch(self) -> dt.date:
        return self.spec.epoch

    @property
    def length(self) -> int:
        return self.spec.length

    def store(self) -> Store:
        st = Store(self.epoch, self.length)
        for i in sorted(self.values):
            desc = DatasetDescriptor(id=i, name=f"synthetic-{i:02d}", units="synthetic", path="")
            st.add(desc, AlignedSeries(i, self.values[i]))
        return st

    def true_climatology(self, ds_id: int) -> Climatology:
        """The generating climatology: seasonal mean and the noise SD."""
        mean = self.seasonal[ds_id]
        sd = np.where(np.isfinite(mean), self.spec.noise_sd, np.nan)
        count = np.where(np.isfinite(mean), self.spec.years, 0)
        end = index_to_date(self.length, self.epoch)
        return Climatology(mean.copy(), sd, count, (self.epoch, end))

    def anomalies(self) -> dict[int, AnomalySeries]:
        """Anomalies against the true climatology (noise plus planted boosts)."""
        return {
            i: AnomalySeries(i, a.copy(), np.isfinite(a), self.epoch) for i, a in sorted(self.true_anomalies.items())
        }

    def target_extremes(self, threshold_sd: float = 2.0) -> ExtremeSet:
        t = self.spec.target_id
        return detect_extremes(self.anomalies()[t], self.true_climatology(t), threshold_sd)

    def ground_truth(self) -> dict:
        return {
            "rng_algorithm": RNG_ALGORITHM,
            "spec": self.spec.to_dict(),
            "length": self.length,
            "planted": self.planted_report,
        }

    def ground_truth_json(self) -> str:
        return json.dumps(self.ground_truth(), indent=2, sort_keys=True) + "\n"


def generate(spec: SynthSpec) -> SyntheticWorld:
    spec.validate()
    T = spec.length
    month, day = month_day_arrays(spec.epoch, T)
    anoms, seasonal, values = {}, {}, {}
    for i in range(1, spec.dataset_count + 1):
        anoms[i] = spec.noise_sd * standard_normals(spec.seed, i, T)
        seasonal[i] = _seasonal_table(spec.seasonal_amplitude, 50.0 + 2.0 * i)
    background = {i: a.copy() for i, a in anoms.items()}

    report = []
    for p in spec.planted:
        ends = np.array([date_to_index(d, spec.epoch) - p.l - 1 for d in p.extreme_dates])  # 0-based window ends
        sums = _pair_window_sums(background[p.i1], background[p.i2], p.n)
        bg_max = float(np.nanmax(sums))
        for k, d in enumerate(p.extreme_dates):
            lo, hi = ends[k] - p.n + 1, ends[k] + 1
            delta = max(bg_max - sums[ends[k]], 0.0) + p.precursor_boost
            _boost(anoms, p, lo, hi, delta)
            anoms[spec.target_id][ends[k] + p.l] = sign_value(p.sign) * p.target_z * spec.noise_sd
        # Windows overlapping a planted one inherit part of its boost; raise the
        # plants until they clear every other window by the requested margin.
        for _ in range(100):
            sums = _pair_window_sums(anoms[p.i1], anoms[p.i2], p.n)
            others = sums.copy()
            others[ends] = np.nan
            other_max = float(np.nanmax(others))
            short = other_max + p.precursor_boost - sums[ends]
            if (short <= 0).all():
                break
            for k in np.flatnonzero(short > 0):
                _boost(anoms, p, ends[k] - p.n + 1, ends[k] + 1, p.n * short[k] + 1e-9 * p.precursor_boost)
        report.append({
            "i1": p.i1, "i2": p.i2, "n": p.n, "l": p.l, "sign": p.sign,
            "dates": [d.isoformat() for d in p.extreme_dates],
            "background_max": bg_max,
            "other_window_max": other_max,
            "planted_sums": [float(x) for x in sums[ends]],
            "margin_ok": bool((sums[ends] >= other_max + p.precursor_boost / 2).all()),
        })

    for i in anoms:
        values[i] = seasonal[i][month, day] + anoms[i]
    return SyntheticWorld(spec, values, anoms, seasonal, report)


def _boost(anoms: dict, p: PlantedRule, lo: int, hi: int, delta: float) -> None:
    """Spread ``delta`` evenly over both precursors on 0-based days ``[lo, hi)``."""
    anoms[p.i1][lo:hi] += delta / (2 * p.n)
    anoms[p.i2][lo:hi] += delta / (2 * p.n)


def _pair_window_sums(a1: np.ndarray, a2: np.ndarray, n: int) -> np.ndarray:
    s1 = AnomalySeries(0, a1, np.ones(len(a1), dtype=bool))
    s2 = AnomalySeries(0, a2, np.ones(len(a2), dtype=bool))
    return pair_prefix(s1, s2).window_sums(n)


def spaced_dates(epoch: dt.date, first: int, count: int, spacing: int) -> tuple[dt.date, ...]:
    """``count`` dates from day index ``first``, ``spacing`` days apart."""
    return tuple(index_to_date(first + k * spacing, epoch) for k in range(count))


def world_to_csv(world: SyntheticWorld, ds_id: int) -> str:
    lines = ["date,value"]
    vals = world.values[ds_id]
    for t in range(world.length):
        d = world.epoch + dt.timedelta(days=t)
        lines.append(f"{d.isoformat()},{vals[t]:.3f}")
    return "\n".join(lines) + "\n"


def manifest_entries(world: SyntheticWorld, dir_prefix: str = "") -> list[dict]:
    return [
        {"id": i, "name": f"synthetic-{i:02d}", "cadence": "daily", "units": "synthetic",
         "path": f"{dir_prefix}series_{i:02d}.csv", "sentinels": [9999.9]}
        for i in sorted(world.values)
    ]

