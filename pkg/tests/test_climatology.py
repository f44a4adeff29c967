import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analogcast.climatology import (
    ExtremeEvent,
    anomalies,
    anomaly_table,
    compute_climatology,
    detect_extremes,
    extremes_csv,
    group_extremes,
    sign_value,
)
from analogcast.errors import DataError
from analogcast.ingest import AlignedSeries

from conftest import EPOCH


def yearly_series(per_year, epoch=EPOCH):
    """One value per calendar day repeated with ``per_year[y]`` added in year ``y``."""
    end = dt.date(epoch.year + len(per_year), 1, 1)
    length = (end - epoch).days
    years = np.array([(epoch + dt.timedelta(days=t)).year - epoch.year for t in range(length)])
    return AlignedSeries(1, np.asarray(per_year, dtype=float)[years]), (epoch, end - dt.timedelta(days=1))


def test_constant_series_zero_sd():
    s, period = yearly_series([7.0, 7.0, 7.0])
    clim = compute_climatology(s, period, EPOCH)
    mean, sd, n = clim[(6, 15)]
    assert mean == 7.0 and sd == 0.0 and n == 3
    ext = detect_extremes(anomalies(s, clim, EPOCH), clim)
    assert not ext.positives and not ext.negatives
    assert len(ext.degenerate) == len(s) and not ext.known.any()


def test_three_value_key_population_sd():
    s, period = yearly_series([10.0, 20.0, 30.0])
    clim = compute_climatology(s, period, EPOCH)
    mean, sd, n = clim[(3, 3)]
    assert mean == pytest.approx(20.0, abs=1e-12)
    assert sd == pytest.approx(8.165, abs=1e-3)
    assert n == 3
    sample = compute_climatology(s, period, EPOCH, ddof=1)
    assert sample[(3, 3)][1] == pytest.approx(10.0)


def test_single_sample_has_no_sd():
    s = AlignedSeries(1, np.arange(366.0))
    clim = compute_climatology(s, (EPOCH, dt.date(2000, 12, 31)), EPOCH)
    assert clim[(1, 1)][2] == 1 and np.isnan(clim[(1, 1)][1])


def test_anomaly_value():
    # baseline 57.8 for Apr 16, observed 75.0
    vals = np.full(366, 57.8)
    t = (dt.date(2000, 4, 16) - EPOCH).days
    s = AlignedSeries(1, vals)
    clim = compute_climatology(s, (EPOCH, dt.date(2000, 12, 31)), EPOCH)
    vals2 = vals.copy()
    vals2[t] = 75.0
    a = anomalies(AlignedSeries(1, vals2), clim, EPOCH)
    assert a.values[t] == pytest.approx(17.2, abs=1e-9)


def test_anomalies_missing_key_is_named():
    s = AlignedSeries(1, np.ones(400))
    clim = compute_climatology(s, (EPOCH, dt.date(2000, 1, 31)), EPOCH)
    with pytest.raises(DataError, match=r"key \(2, 1\)"):
        anomalies(s, clim, EPOCH)


def test_feb29_borrows_neighbours():
    rng = np.random.default_rng(3)
    length = (dt.date(2008, 1, 1) - EPOCH).days
    s = AlignedSeries(1, rng.normal(0, 1, length))
    clim = compute_climatology(s, (EPOCH, dt.date(2007, 12, 31)), EPOCH)
    assert clim.feb29_borrowed
    assert clim[(2, 29)][2] == 2
    assert clim.mean[2, 29] == pytest.approx(0.5 * (clim.mean[2, 28] + clim.mean[3, 1]))
    assert clim.sd[2, 29] == pytest.approx(0.5 * (clim.sd[2, 28] + clim.sd[3, 1]))
    keep = compute_climatology(s, (EPOCH, dt.date(2007, 12, 31)), EPOCH, feb29_min_samples=2)
    assert not keep.feb29_borrowed


def test_climatology_csv_header():
    s, period = yearly_series([1.0, 2.0])
    text = compute_climatology(s, period, EPOCH).to_csv()
    lines = text.splitlines()
    assert lines[0] == "month,day,mean,sd,n"
    assert len(lines) == 1 + 366


def test_period_outside_epoch():
    s = AlignedSeries(1, np.ones(10))
    with pytest.raises(DataError):
        compute_climatology(s, (EPOCH, dt.date(2001, 1, 1)), EPOCH)


def toy_world(extra):
    """10 years of +/-1 alternating anomalies on every key, plus overrides."""
    length = (dt.date(2010, 1, 1) - EPOCH).days
    years = np.array([(EPOCH + dt.timedelta(days=t)).year - 2000 for t in range(length)])
    vals = np.where(years % 2 == 0, 1.0, -1.0)
    for t, v in extra.items():
        vals[t] = v
    s = AlignedSeries(1, vals)
    clim = compute_climatology(s, (EPOCH, dt.date(2009, 12, 31)), EPOCH)
    return s, clim


def test_extreme_threshold_is_strict():
    # Every day sits exactly one SD from its key mean.
    s, clim = toy_world({})
    a = anomalies(s, clim, EPOCH)
    ext = detect_extremes(a, clim, threshold_sd=1.0)
    assert not ext.positives and not ext.negatives  # |z| == 1 everywhere, not beyond
    ext = detect_extremes(a, clim, threshold_sd=0.999)
    assert len(ext.positives) + len(ext.negatives) == len(s) - len(ext.degenerate)


def test_single_outlier_detected():
    t = (dt.date(2004, 7, 4) - EPOCH).days
    s, clim = toy_world({t: 30.0})
    ext = detect_extremes(anomalies(s, clim, EPOCH), clim)
    assert [e.j for e in ext.positives] == [t + 1]
    assert ext.flags[t] == 1 and ext.positives[0].z > 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 2.5), st.floats(0.0, 1.0))
def test_extremes_monotone_in_threshold(seed, k1, dk):
    rng = np.random.default_rng(seed)
    length = (dt.date(2006, 1, 1) - EPOCH).days
    s = AlignedSeries(1, rng.normal(0, 3, length))
    clim = compute_climatology(s, (EPOCH, dt.date(2005, 12, 31)), EPOCH)
    a = anomalies(s, clim, EPOCH)
    loose = detect_extremes(a, clim, k1)
    tight = detect_extremes(a, clim, k1 + dk)
    assert {e.j for e in tight.positives} <= {e.j for e in loose.positives}
    assert {e.j for e in tight.negatives} <= {e.j for e in loose.negatives}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.3))
def test_anomalies_mean_zero_per_key(seed, missing):
    rng = np.random.default_rng(seed)
    length = (dt.date(2004, 1, 1) - EPOCH).days
    vals = rng.normal(20, 5, length)
    vals[rng.random(length) < missing] = np.nan
    s = AlignedSeries(1, vals)
    clim = compute_climatology(s, (EPOCH, dt.date(2003, 12, 31)), EPOCH, feb29_min_samples=0)
    a = anomalies(s, clim, EPOCH)
    days = [EPOCH + dt.timedelta(days=t) for t in range(length)]
    keys = np.array([d.month * 32 + d.day for d in days])
    ok = a.present
    sums = np.bincount(keys[ok], weights=a.values[ok], minlength=13 * 32)
    assert np.allclose(sums, 0.0, atol=1e-9)


def test_group_extremes():
    evs = [ExtremeEvent(j, "positive", 1.0, 3.0) for j in (1, 2, 10, 11, 50)]
    groups = group_extremes(evs)
    assert [[e.j for e in g] for g in groups] == [[1, 2], [10, 11], [50]]
    assert len(group_extremes(evs, group_gap=8)) == 2


def test_group_adjacent_days():
    j = (dt.date(2012, 4, 27) - dt.date(1973, 1, 1)).days + 1
    evs = [ExtremeEvent(j, "positive", 1, 3), ExtremeEvent(j + 1, "positive", 1, 3)]
    assert len(group_extremes(evs)) == 1


def test_extremes_csv():
    text = extremes_csv([ExtremeEvent(3, "negative", -5.0, -2.5)], EPOCH)
    assert text.splitlines() == ["date,sign,anomaly,z", "2000-01-03,negative,-5.0,-2.5"]


def test_sign_value():
    assert sign_value("positive") == 1 and sign_value("negative") == -1
    with pytest.raises(ValueError):
        sign_value("up")


def test_anomaly_table_covers_all():
    series = {i: AlignedSeries(i, np.arange(800.0) * i) for i in (1, 2)}
    table = anomaly_table(series, EPOCH, (EPOCH, EPOCH + dt.timedelta(days=799)))
    assert sorted(table.anomalies) == [1, 2]
    assert len(table.anomalies[2]) == 800
