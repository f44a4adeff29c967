"""Glue shared by the CLI: climatology options, run configs and atomic output."""

from __future__ import annotations

import datetime as dt
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from analogcast.calendar import index_to_date
from analogcast.climatology import AnomalyTable, ExtremeSet, anomaly_table, detect_extremes
from analogcast.errors import ConfigError
from analogcast.ingest import Store
from analogcast.miner import SearchConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class ClimatologyOptions:
    """``period`` is ``"full"`` (whole store), ``"learning"`` (strictly
    nonanticipative baselines) or an explicit ``(start, end)`` date pair."""

    period: object = "full"
    ddof: int = 0
    threshold_sd: float = 2.0

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "ClimatologyOptions":
        raw = dict(raw or {})
        unknown = set(raw) - {"period", "ddof", "threshold_sd"}
        if unknown:
            raise ConfigError(f"unknown climatology option(s): {', '.join(sorted(unknown))}")
        period = raw.get("period", "full")
        if isinstance(period, (list, tuple)):
            try:
                period = tuple(dt.date.fromisoformat(str(p)) for p in period)
            except ValueError as exc:
                raise ConfigError(f"climatology period: {exc}") from exc
            if len(period) != 2 or period[0] > period[1]:
                raise ConfigError("climatology period must be [start, end]")
        elif period not in ("full", "learning"):
            raise ConfigError(f"climatology period must be 'full', 'learning' or [start, end], got {period!r}")
        ddof = raw.get("ddof", 0)
        if ddof not in (0, 1):
            raise ConfigError("climatology ddof must be 0 (population) or 1 (sample)")
        threshold = float(raw.get("threshold_sd", 2.0))
        if threshold <= 0:
            raise ConfigError("threshold_sd must be positive")
        return cls(period, ddof, threshold)

    def resolve(self, store: Store, learning_range: tuple[int, int] | None = None) -> tuple[dt.date, dt.date]:
        if self.period == "full":
            return store.epoch, store.end
        if self.period == "learning":
            if learning_range is None:
                raise ConfigError("climatology period 'learning' needs a learning range")
            return index_to_date(learning_range[0], store.epoch), index_to_date(learning_range[1], store.epoch)
        start, end = self.period
        if start < store.epoch or end > store.end:
            raise ConfigError(f"climatology period {start}..{end} lies outside the store epoch")
        return start, end


@dataclass(frozen=True)
class RunConfig:
    search: SearchConfig
    climatology: ClimatologyOptions


def read_mapping(path) -> dict:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror or exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text.decode())
        else:
            data = json.loads(text)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a table/object")
    return data


def load_run_config(path, epoch: dt.date) -> RunConfig:
    raw = read_mapping(path)
    clim = ClimatologyOptions.from_dict(raw.pop("climatology", None))
    return RunConfig(SearchConfig.from_dict(raw, epoch), clim)


def prepare(
    store: Store,
    target_id: int,
    options: ClimatologyOptions = ClimatologyOptions(),
    learning_range: tuple[int, int] | None = None,
) -> tuple[AnomalyTable, ExtremeSet]:
    period = options.resolve(store, learning_range)
    table = anomaly_table(store.series, store.epoch, period, options.ddof)
    if target_id not in table.anomalies:
        raise ConfigError(f"target dataset {target_id} is not in the store")
    ext = detect_extremes(table.anomalies[target_id], table.climatologies[target_id], options.threshold_sd)
    return table, ext


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
