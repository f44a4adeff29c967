"""Precursor-rule search over dataset pairs, window lengths and lead times.

For a target day ``j'`` and a candidate ``(i1, i2, n, l)`` the precursor sum is

    S(j') = sum_{k=0}^{n-1} (a_i1[j' - k - l] + a_i2[j' - k - l])

over anomalies ``a``. The envelope ``[Min, Max]`` is the range of ``S`` over
learning days that are not extremes of either sign. A candidate becomes a
rule when target-sign extreme days with ``S`` strictly outside the envelope
form at least ``min_clusters`` clusters (hits more than ``cluster_gap_days``
apart start a new cluster).

Search cost per pair: for each ``n`` the window sums are one O(T) pass over
compensated prefix sums. Non-extreme learning days form a few hundred runs
between extreme days, and shifting a run by ``l`` maps it onto a contiguous
range of window ends, so every envelope is a handful of sparse-table range
queries instead of a scan over all learning days.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations, combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

from analogcast.calendar import date_to_index, index_to_date
from analogcast.climatology import SIGNS, AnomalySeries, ExtremeSet, sign_value
from analogcast.errors import ConfigError, DataError

log = logging.getLogger(__name__)

DEFAULT_LEARNING_RANGE = (731, 13879)
MIN_LEAD = 14
MAX_LEAD = 365
MAX_WINDOW = 365


# --------------------------------------------------------------------------
# Configuration


def _parse_int_set(value, name: str) -> tuple[int, ...]:
    """Accept a list of ints and/or ``"a-b"`` inclusive range strings."""
    items = value if isinstance(value, (list, tuple, set, frozenset, range)) else [value]
    out: set[int] = set()
    for item in items:
        if isinstance(item, bool):
            raise ConfigError(f"{name}: invalid entry {item!r}")
        if isinstance(item, int):
            out.add(item)
            continue
        m = re.fullmatch(r"\s*(\d+)\s*(?:-|\.\.)\s*(\d+)\s*", str(item))
        if not m:
            raise ConfigError(f"{name}: invalid entry {item!r} (expected int or 'a-b')")
        a, b = int(m.group(1)), int(m.group(2))
        if a > b:
            raise ConfigError(f"{name}: empty range {item!r}")
        out.update(range(a, b + 1))
    return tuple(sorted(out))


@dataclass(frozen=True)
class SearchConfig:
    target_id: int
    sign: str
    dataset_ids: tuple[int, ...]
    n_set: tuple[int, ...]
    l_set: tuple[int, ...]
    learning_range: tuple[int, int] = DEFAULT_LEARNING_RANGE
    min_clusters: int = 4
    cluster_gap_days: int = 30
    allow_equal_pair: bool = False

    def __post_init__(self):
        for name in ("dataset_ids", "n_set", "l_set"):
            object.__setattr__(self, name, _parse_int_set(getattr(self, name), name))
        object.__setattr__(self, "learning_range", tuple(int(v) for v in self.learning_range))
        self.validate()

    def validate(self) -> None:
        if self.sign not in SIGNS:
            raise ConfigError(f"sign must be one of {SIGNS}, got {self.sign!r}")
        for name in ("dataset_ids", "n_set", "l_set"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if min(self.dataset_ids) < 1:
            raise ConfigError("dataset ids start at 1")
        if min(self.n_set) < 1 or max(self.n_set) > MAX_WINDOW:
            raise ConfigError(f"n_set must lie within [1, {MAX_WINDOW}]")
        if min(self.l_set) < MIN_LEAD or max(self.l_set) > MAX_LEAD:
            raise ConfigError(f"l_set must lie within [{MIN_LEAD}, {MAX_LEAD}]")
        if len(self.learning_range) != 2:
            raise ConfigError("learning_range must be a [start, end] pair of day indices")
        start, end = self.learning_range
        if start > end:
            raise ConfigError(f"learning_range start {start} is after end {end}")
        need = 1 + max(self.l_set) + max(self.n_set)
        if start < need:
            raise ConfigError(
                f"learning_range starts at day {start}; windows need it to start at day >= {need} "
                f"(1 + max lead + max window)"
            )
        if self.min_clusters < 1 or self.cluster_gap_days < 0:
            raise ConfigError("min_clusters must be >= 1 and cluster_gap_days >= 0")
        if not self.allow_equal_pair and len(self.dataset_ids) < 2:
            raise ConfigError("at least two datasets are needed unless allow_equal_pair is set")

    def pairs(self) -> list[tuple[int, int]]:
        gen = combinations_with_replacement if self.allow_equal_pair else combinations
        return list(gen(self.dataset_ids, 2))

    @classmethod
    def from_dict(cls, raw: Mapping, epoch: dt.date | None = None) -> "SearchConfig":
        """Build from a parsed JSON/TOML mapping.

        ``learning_range`` entries may be day indices or ISO dates (the latter
        need ``epoch``).
        """
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown search config field(s): {', '.join(sorted(unknown))}")
        kw = dict(raw)
        if "learning_range" in kw:
            kw["learning_range"] = tuple(day_ref(v, epoch) for v in kw["learning_range"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("dataset_ids", "n_set", "l_set", "learning_range"):
            d[k] = list(d[k])
        return d


def day_ref(value, epoch: dt.date | None) -> int:
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, str) and epoch is not None:
        try:
            return date_to_index(dt.date.fromisoformat(value), epoch)
        except ValueError as exc:
            raise ConfigError(f"learning_range: {exc}") from exc
    raise ConfigError(f"learning_range: cannot interpret {value!r}")


# --------------------------------------------------------------------------
# Pair prefix sums


def _compensated_cumsum(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Neumaier running sums: ``hi[m] + lo[m]`` is the sum of ``x[:m]``."""
    hi = np.zeros(len(x) + 1)
    lo = np.zeros(len(x) + 1)
    s = c = 0.0
    for m, v in enumerate(x.tolist(), start=1):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        hi[m] = s
        lo[m] = c
    return hi, lo


def _two_diff(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = a - b
    bv = s - a
    av = s - bv
    return s, (a - av) - (b + bv)


@dataclass
class PairPrefix:
    """Running sums of ``a1 + a2`` with a validity mask.

    Position ``t`` (0-based, day ``t + 1``) is invalid when either anomaly is
    missing; invalid positions contribute 0 and poison every window touching
    them.
    """

    i1: int
    i2: int
    hi: np.ndarray
    lo: np.ndarray
    valid: np.ndarray
    invalid_prefix: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.valid)

    @property
    def prefix(self) -> np.ndarray:
        return self.hi + self.lo

    def window_sums(self, n: int) -> np.ndarray:
        """Sum over ``[t - n + 1, t]`` for every end position ``t``; NaN if skipped."""
        T = len(self)
        out = np.full(T, np.nan)
        if n > T:
            return out
        a = slice(n, T + 1)
        b = slice(0, T + 1 - n)
        s, err = _two_diff(self.hi[a], self.hi[b])
        sums = s + (err + (self.lo[a] - self.lo[b]))
        ok = (self.invalid_prefix[a] - self.invalid_prefix[b]) == 0
        out[n - 1 :] = np.where(ok, sums, np.nan)
        return out


def pair_prefix(a1: AnomalySeries, a2: AnomalySeries) -> PairPrefix:
    if len(a1) != len(a2):
        raise DataError(f"series {a1.id} and {a2.id} differ in length ({len(a1)} vs {len(a2)})")
    valid = a1.present & a2.present
    s = np.where(valid, np.where(valid, a1.values, 0.0) + np.where(valid, a2.values, 0.0), 0.0)
    hi, lo = _compensated_cumsum(s)
    bad = np.concatenate(([0], np.cumsum(~valid, dtype=np.int64)))
    return PairPrefix(a1.id, a2.id, hi, lo, valid, bad)


def _window_end(j: int, n: int, l: int, length: int) -> int:
    end = j - l - 1
    if end - n + 1 < 0 or end >= length:
        raise DataError(f"window of length {n} ending {l} days before day {j} is outside the epoch")
    return end


def window_sum(p: PairPrefix, j: int, n: int, l: int) -> float | None:
    """Pair-anomaly sum over days ``[j-l-n+1, j-l]``; None when skipped."""
    end = _window_end(j, n, l, len(p))
    if p.invalid_prefix[end + 1] - p.invalid_prefix[end + 1 - n]:
        return None
    s, err = _two_diff(p.hi[end + 1 : end + 2], p.hi[end + 1 - n : end + 2 - n])
    return float((s + (err + (p.lo[end + 1] - p.lo[end + 1 - n])))[0])


def envelope(p: PairPrefix, n: int, l: int, non_extreme_days: Iterable[int]) -> tuple[float, float]:
    days = np.asarray(sorted(non_extreme_days), dtype=np.int64)
    if len(days):
        _window_end(int(days[0]), n, l, len(p))
        _window_end(int(days[-1]), n, l, len(p))
    sums = p.window_sums(n)[days - l - 1] if len(days) else np.empty(0)
    sums = sums[~np.isnan(sums)]
    if not len(sums):
        raise DataError(f"pair ({p.i1}, {p.i2}), n={n}, l={l}: every envelope window is skipped")
    return float(sums.min()), float(sums.max())


def support(p: PairPrefix, n: int, l: int, extreme_days: Iterable[int], env: tuple[float, float]) -> list[int]:
    lo, hi = env
    sums = p.window_sums(n)
    hits = []
    for j in sorted(extreme_days):
        s = sums[_window_end(j, n, l, len(p))]
        if s > hi or s < lo:
            hits.append(int(j))
    return hits


def cluster_count(hits: Sequence[int], gap: int = 30) -> int:
    """Number of runs of sorted hits whose consecutive differences are <= gap."""
    count = 0
    prev = None
    for h in hits:
        if prev is None or h - prev > gap:
            count += 1
        prev = h
    return count


# --------------------------------------------------------------------------
# Rules


@dataclass(frozen=True)
class Rule:
    target_id: int
    sign: str
    i1: int
    i2: int
    n: int
    l: int
    min_sum: float
    max_sum: float
    hits: tuple[int, ...]
    cluster_count: int

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.i1, self.i2, self.n, self.l)

    def tuple6(self) -> tuple:
        return (self.i1, self.i2, self.n, self.l, self.min_sum, self.max_sum)

    def to_json(self, epoch: dt.date) -> str:
        return json.dumps(
            {
                "target_id": self.target_id,
                "sign": self.sign,
                "i1": self.i1,
                "i2": self.i2,
                "n": self.n,
                "l": self.l,
                "min_sum": self.min_sum,
                "max_sum": self.max_sum,
                "hits": [index_to_date(j, epoch).isoformat() for j in self.hits],
                "hit_count": len(self.hits),
                "clusters": self.cluster_count,
            }
        )

    @classmethod
    def from_json(cls, line: str, epoch: dt.date) -> "Rule":
        d = json.loads(line)
        return cls(
            target_id=int(d["target_id"]),
            sign=d["sign"],
            i1=int(d["i1"]),
            i2=int(d["i2"]),
            n=int(d["n"]),
            l=int(d["l"]),
            min_sum=float(d["min_sum"]),
            max_sum=float(d["max_sum"]),
            hits=tuple(date_to_index(dt.date.fromisoformat(h), epoch) for h in d["hits"]),
            cluster_count=int(d["clusters"]),
        )


def rules_to_jsonl(rules: Iterable[Rule], epoch: dt.date) -> str:
    return "".join(r.to_json(epoch) + "\n" for r in rules)


def rules_from_jsonl(text: str, epoch: dt.date) -> list[Rule]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(Rule.from_json(line, epoch))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"rules line {lineno}: {exc}") from exc
    return out


# --------------------------------------------------------------------------
# Search


def _sparse_table(a: np.ndarray, op) -> np.ndarray:
    """Level ``k`` row holds ``op`` over ``a[t : t + 2**k]``."""
    levels = [a]
    width = 1
    while 2 * width <= len(a):
        prev = levels[-1]
        nxt = prev.copy()
        nxt[: len(a) - width] = op(prev[: len(a) - width], prev[width:])
        levels.append(nxt)
        width *= 2
    return np.stack(levels)


def _range_query(table: np.ndarray, lo: np.ndarray, hi: np.ndarray, op) -> np.ndarray:
    """``op`` over the inclusive ranges ``[lo, hi]`` (elementwise arrays)."""
    length = hi - lo + 1
    k = np.frexp(length.astype(np.float64))[1] - 1  # floor(log2(length))
    return op(table[k, lo], table[k, hi - (1 << k) + 1])


def _runs(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive [start, end] positions of the True runs of ``mask``."""
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return np.flatnonzero(edges == 1), np.flatnonzero(edges == -1) - 1


def _cluster_counts(hit: np.ndarray, days: np.ndarray, gap: int) -> np.ndarray:
    """Row-wise :func:`cluster_count` for a boolean hit matrix over sorted days."""
    far = np.int64(-(10**12))
    last = np.maximum.accumulate(np.where(hit, days[None, :], far), axis=1)
    prev = np.concatenate((np.full((hit.shape[0], 1), far), last[:, :-1]), axis=1)
    return (hit & (days[None, :] - prev > gap)).sum(axis=1)


@dataclass
class _SearchContext:
    config: SearchConfig
    leads: np.ndarray
    seg_lo: np.ndarray
    seg_hi: np.ndarray
    ext_pos: np.ndarray

    @classmethod
    def build(cls, target: ExtremeSet, config: SearchConfig, length: int) -> "_SearchContext":
        start, end = config.learning_range
        if end > length:
            raise ConfigError(f"learning_range ends at day {end}, beyond the {length}-day epoch")
        learn = np.zeros(length, dtype=bool)
        learn[start - 1 : end] = True
        known = target.known & learn
        seg_lo, seg_hi = _runs(known & (target.flags == 0))
        ext_pos = np.flatnonzero(known & (target.flags == sign_value(config.sign)))
        return cls(config, np.asarray(config.l_set, dtype=np.int64), seg_lo, seg_hi, ext_pos)


def _mine_pair(a1: AnomalySeries, a2: AnomalySeries, ctx: _SearchContext) -> list[Rule]:
    cfg = ctx.config
    if not len(ctx.seg_lo) or not len(ctx.ext_pos):
        return []
    p = pair_prefix(a1, a2)
    L = ctx.leads[:, None]
    lo = ctx.seg_lo[None, :] - L
    hi = ctx.seg_hi[None, :] - L
    ext_end = ctx.ext_pos[None, :] - L
    ext_days = ctx.ext_pos + 1
    rules = []
    for n in cfg.n_set:
        sums = p.window_sums(n)
        ok = ~np.isnan(sums)
        top = _range_query(_sparse_table(np.where(ok, sums, -np.inf), np.maximum), lo, hi, np.maximum).max(axis=1)
        bottom = _range_query(_sparse_table(np.where(ok, sums, np.inf), np.minimum), lo, hi, np.minimum).min(axis=1)
        defined = np.isfinite(top)
        x = sums[ext_end]
        with np.errstate(invalid="ignore"):
            hit = ((x > top[:, None]) | (x < bottom[:, None])) & defined[:, None]
        counts = _cluster_counts(hit, ext_days, cfg.cluster_gap_days)
        for row in np.flatnonzero(counts >= cfg.min_clusters):
            rules.append(
                Rule(
                    target_id=cfg.target_id,
                    sign=cfg.sign,
                    i1=a1.id,
                    i2=a2.id,
                    n=int(n),
                    l=int(ctx.leads[row]),
                    min_sum=float(bottom[row]),
                    max_sum=float(top[row]),
                    hits=tuple(int(d) for d in ext_days[hit[row]]),
                    cluster_count=int(counts[row]),
                )
            )
    return rules


def default_threads() -> int:
    return os.cpu_count() or 1


def mine(
    anomalies: Mapping[int, AnomalySeries],
    target: ExtremeSet,
    config: SearchConfig,
    threads: int | None = None,
) -> list[Rule]:
    """Every rule satisfying the criterion, sorted by ``(i1, i2, n, l)``.

    ``target`` are the target dataset's extremes over the same epoch. Work
    is split per dataset pair; the result does not depend on ``threads``.
    """
    missing = [i for i in config.dataset_ids if i not in anomalies]
    if missing:
        raise DataError(f"dataset(s) {missing} not available for mining")
    length = len(target.flags)
    for i in config.dataset_ids:
        if len(anomalies[i]) != length:
            raise DataError(f"dataset {i} length {len(anomalies[i])} differs from target length {length}")
    ctx = _SearchContext.build(target, config, length)
    pairs = config.pairs()
    threads = max(1, threads or default_threads())
    log.info("mining %d pairs x %d windows x %d leads on %d thread(s)",
             len(pairs), len(config.n_set), len(config.l_set), threads)

    def work(pair):
        return _mine_pair(anomalies[pair[0]], anomalies[pair[1]], ctx)

    if threads == 1:
        chunks = map(work, pairs)
        rules = [r for chunk in chunks for r in chunk]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rules = [r for chunk in pool.map(work, pairs) for r in chunk]
    rules.sort(key=lambda r: r.key)
    return rules
