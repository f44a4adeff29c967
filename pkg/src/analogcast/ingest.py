"""Dataset manifest, series parsing, epoch alignment and the on-disk store.

Series files are CSV with a ``date,value`` header, ISO dates and optional
``#`` comment lines. Monthly series use ``YYYY-MM`` dates and are expanded to
a daily step function before alignment.

Store layout (format version 1)::

    <store>/store.json          epoch, length, descriptors, per-file sha256
    <store>/series/0001.npy     float64 values, NaN where missing
    ...

The presence mask is ``isfinite(values)``, so a single array per series is
enough for a lossless roundtrip.
"""

from __future__ import annotations

import calendar as _cal
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from analogcast.calendar import DEFAULT_EPOCH, date_to_index, epoch_length, index_to_date
from analogcast.errors import ParseError, StoreError

log = logging.getLogger(__name__)

CADENCES = ("daily", "monthly")
DEFAULT_SENTINELS = (9999.9, 999.9)
STORE_FORMAT = "analogcast-store"
STORE_VERSION = 1

Record = tuple[dt.date, "float | None"]


@dataclass(frozen=True)
class DatasetDescriptor:
    id: int
    name: str
    cadence: str = "daily"
    units: str = ""
    path: str = ""
    sentinels: tuple[float, ...] = DEFAULT_SENTINELS

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "cadence": self.cadence,
            "units": self.units,
            "path": self.path,
            "sentinels": list(self.sentinels),
        }


@dataclass
class AlignedSeries:
    """Values of one dataset on the global day index.

    ``values[t]`` holds day ``j = t + 1``; missing days are NaN and
    ``present`` is False there.
    """

    id: int
    values: np.ndarray
    present: np.ndarray = field(default=None)  # type: ignore[assignment]
    dropped: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.present is None:
            self.present = np.isfinite(self.values)
        else:
            self.present = np.asarray(self.present, dtype=bool)
            if self.present.shape != self.values.shape:
                raise ValueError("values and present mask differ in shape")
            if not np.all(np.isfinite(self.values[self.present])):
                raise ValueError(f"series {self.id}: non-finite value marked present")
            self.values = np.where(self.present, self.values, np.nan)

    def __len__(self) -> int:
        return len(self.values)


# --------------------------------------------------------------------------
# Manifest


def _manifest_error(path, where: str, msg: str) -> ParseError:
    return ParseError(f"{path}: {where}: {msg}")


def load_manifest(path) -> list[DatasetDescriptor]:
    """Read a JSON manifest array; relative series paths resolve against it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read manifest: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, list):
        raise ParseError(f"{path}: manifest must be a JSON array of dataset entries")

    out: dict[int, DatasetDescriptor] = {}
    for k, entry in enumerate(raw):
        where = f"entry {k}"
        if not isinstance(entry, dict):
            raise _manifest_error(path, where, "expected an object")
        ds_id = entry.get("id")
        if not isinstance(ds_id, int) or isinstance(ds_id, bool) or ds_id < 1:
            raise _manifest_error(path, where, f"field 'id' must be a positive integer, got {ds_id!r}")
        where = f"entry {k} (id={ds_id})"
        if ds_id in out:
            raise _manifest_error(path, where, f"duplicate id {ds_id}")
        cadence = entry.get("cadence", "daily")
        if cadence not in CADENCES:
            raise _manifest_error(path, where, f"field 'cadence': unknown cadence {cadence!r}")
        name = entry.get("name", f"dataset-{ds_id}")
        if not isinstance(name, str):
            raise _manifest_error(path, where, "field 'name' must be a string")
        series_path = entry.get("path")
        if not isinstance(series_path, str) or not series_path:
            raise _manifest_error(path, where, "field 'path' is required")
        if not os.path.isabs(series_path):
            series_path = str(path.parent / series_path)
        sentinels = entry.get("sentinels", list(DEFAULT_SENTINELS))
        if not isinstance(sentinels, list) or not all(
            isinstance(s, (int, float)) and not isinstance(s, bool) for s in sentinels
        ):
            raise _manifest_error(path, where, "field 'sentinels' must be a list of numbers")
        out[ds_id] = DatasetDescriptor(
            id=ds_id,
            name=name,
            cadence=cadence,
            units=str(entry.get("units", "")),
            path=series_path,
            sentinels=tuple(float(s) for s in sentinels),
        )

    ids = sorted(out)
    if ids != list(range(1, len(ids) + 1)):
        missing = sorted(set(range(1, max(ids) + 1)) - set(ids))
        raise ParseError(f"{path}: ids must be contiguous from 1; missing id {missing[0]}")
    return [out[i] for i in ids]


# --------------------------------------------------------------------------
# Series files


def _parse_value(text: str, sentinels: Sequence[float]):
    text = text.strip()
    if text == "" or text.lower() in ("na", "nan"):
        return None
    value = float(text)
    if not math.isfinite(value) or value in sentinels:
        return None
    return value


def _parse_month(text: str) -> tuple[int, int]:
    parts = text.strip().split("-")
    if len(parts) not in (2, 3) or len(parts[0]) != 4:
        raise ValueError(f"invalid month {text!r}")
    year, month = int(parts[0]), int(parts[1])
    if len(parts) == 3:
        dt.date(year, month, int(parts[2]))
    if not 1 <= month <= 12:
        raise ValueError(f"invalid month {text!r}")
    return year, month


def _read_rows(lines: Iterable[str], source) -> Iterable[tuple[int, str, str]]:
    header_seen = False
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if not header_seen:
            header = [c.strip().lower() for c in row]
            if header[:2] != ["date", "value"]:
                raise ParseError(f"{source}: line {lineno}: expected header 'date,value', got {row!r}")
            header_seen = True
            continue
        if len(row) != 2:
            raise ParseError(f"{source}: row {lineno}: expected 2 fields, got {len(row)}")
        yield lineno, row[0], row[1]


def parse_series(descriptor: DatasetDescriptor, text: str | None = None) -> list[Record]:
    """Chronologically sorted ``(date, value)`` records, ``None`` marking missing.

    Monthly datasets are expanded by repetition over the days of each month.
    """
    source = descriptor.path
    if text is None:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"{source}: cannot read series: {exc.strerror or exc}") from exc

    rows = _read_rows(io.StringIO(text), source)
    if descriptor.cadence == "monthly":
        monthly = {}
        for lineno, d, v in rows:
            try:
                key = _parse_month(d)
                value = _parse_value(v, descriptor.sentinels)
            except ValueError as exc:
                raise ParseError(f"{source}: row {lineno}: {exc}") from exc
            if key in monthly:
                raise ParseError(f"{source}: row {lineno}: duplicate month {key[0]:04d}-{key[1]:02d}")
            monthly[key] = value
        return expand_monthly(sorted(monthly.items()))

    records: dict[dt.date, float | None] = {}
    for lineno, d, v in rows:
        try:
            day = dt.date.fromisoformat(d.strip())
            value = _parse_value(v, descriptor.sentinels)
        except ValueError as exc:
            raise ParseError(f"{source}: row {lineno}: {exc}") from exc
        if day in records:
            raise ParseError(f"{source}: row {lineno}: duplicate date {day.isoformat()}")
        records[day] = value
    return sorted(records.items())


def expand_monthly(records: Iterable[tuple[tuple[int, int], "float | None"]]) -> list[Record]:
    out: list[Record] = []
    for (year, month), value in records:
        ndays = _cal.monthrange(year, month)[1]
        out.extend((dt.date(year, month, d), value) for d in range(1, ndays + 1))
    out.sort(key=lambda r: r[0])
    return out


def align(records: Sequence[Record], ds_id: int, epoch: dt.date, length: int) -> AlignedSeries:
    """Dense series over ``length`` days from ``epoch``; out-of-epoch records are dropped."""
    values = np.full(length, np.nan)
    dropped = 0
    for day, value in records:
        t = (day - epoch).days
        if not 0 <= t < length:
            dropped += 1
            continue
        if value is not None:
            values[t] = value
    if dropped:
        log.info("dataset %d: dropped %d out-of-epoch records", ds_id, dropped)
    return AlignedSeries(ds_id, values, dropped=dropped)


# --------------------------------------------------------------------------
# Store


@dataclass
class Store:
    epoch: dt.date
    length: int
    descriptors: dict[int, DatasetDescriptor] = field(default_factory=dict)
    series: dict[int, AlignedSeries] = field(default_factory=dict)

    @property
    def ids(self) -> list[int]:
        return sorted(self.series)

    @property
    def end(self) -> dt.date:
        return index_to_date(self.length, self.epoch)

    def add(self, descriptor: DatasetDescriptor, series: AlignedSeries) -> None:
        if len(series) != self.length:
            raise StoreError(f"series {series.id} has length {len(series)}, store expects {self.length}")
        self.descriptors[descriptor.id] = descriptor
        self.series[descriptor.id] = series

    def index(self, d: dt.date) -> int:
        return date_to_index(d, self.epoch)

    def date(self, j: int) -> dt.date:
        return index_to_date(j, self.epoch)

    def __getitem__(self, ds_id: int) -> AlignedSeries:
        try:
            return self.series[ds_id]
        except KeyError:
            raise StoreError(f"dataset {ds_id} is not in the store") from None


def ingest_manifest(manifest_path, epoch: dt.date = DEFAULT_EPOCH, length: int | None = None) -> Store:
    if length is None:
        length = epoch_length(epoch)
    store = Store(epoch, length)
    for desc in load_manifest(manifest_path):
        store.add(desc, align(parse_series(desc), desc.id, epoch, length))
    return store


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr, dtype="<f8"), allow_pickle=False)
    return buf.getvalue()


def save_store(path, store: Store) -> None:
    """Write the store atomically: build beside the target, then swap it in."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        (tmp / "series").mkdir()
        entries = []
        for ds_id in store.ids:
            data = _npy_bytes(store.series[ds_id].values)
            rel = f"series/{ds_id:04d}.npy"
            (tmp / rel).write_bytes(data)
            entry = store.descriptors[ds_id].to_dict()
            entry.update(file=rel, sha256=_sha256(data))
            entries.append(entry)
        meta = {
            "format": STORE_FORMAT,
            "version": STORE_VERSION,
            "epoch": store.epoch.isoformat(),
            "length": store.length,
            "datasets": entries,
        }
        (tmp / "store.json").write_text(json.dumps(meta, indent=2) + "\n")
        if path.exists():
            old = path.with_name(f".{path.name}.old")
            if old.exists():
                shutil.rmtree(old)
            os.replace(path, old)
            os.replace(tmp, path)
            shutil.rmtree(old)
        else:
            os.replace(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def load_store(path) -> Store:
    path = Path(path)
    meta_path = path / "store.json"
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError:
        raise StoreError(f"{path}: not a store (missing store.json)") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise StoreError(f"{meta_path}: corrupt store metadata: {exc}") from exc
    if not isinstance(meta, dict) or meta.get("format") != STORE_FORMAT:
        raise StoreError(f"{meta_path}: not an {STORE_FORMAT} file")
    if meta.get("version") != STORE_VERSION:
        raise StoreError(f"{meta_path}: unsupported store version {meta.get('version')!r} (expected {STORE_VERSION})")

    try:
        store = Store(dt.date.fromisoformat(meta["epoch"]), int(meta["length"]))
        entries = list(meta["datasets"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StoreError(f"{meta_path}: corrupt store metadata: {exc}") from exc

    for entry in entries:
        try:
            file = path / entry["file"]
            data = file.read_bytes()
        except (KeyError, TypeError) as exc:
            raise StoreError(f"{meta_path}: corrupt dataset entry {entry!r}") from exc
        except OSError as exc:
            raise StoreError(f"{path}: cannot read {entry['file']}: {exc.strerror or exc}") from exc
        if _sha256(data) != entry.get("sha256"):
            raise StoreError(f"{file}: checksum mismatch (truncated or corrupt)")
        try:
            values = np.load(io.BytesIO(data), allow_pickle=False)
        except ValueError as exc:
            raise StoreError(f"{file}: corrupt series array: {exc}") from exc
        desc = DatasetDescriptor(
            id=int(entry["id"]),
            name=entry["name"],
            cadence=entry["cadence"],
            units=entry["units"],
            path=entry["path"],
            sentinels=tuple(entry["sentinels"]),
        )
        store.add(desc, AlignedSeries(desc.id, values))
    return store
