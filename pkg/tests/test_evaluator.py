import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from analogcast.calendar import Sector, sector_count, sector_of
from analogcast.climatology import ExtremeEvent, compute_climatology
from analogcast.errors import DataError
from analogcast.evaluator import (
    OutcomeClass,
    base_rate,
    classify,
    evaluate,
    null_probability,
    observed_extremal,
    significance_from_counts,
    wave_base_rate,
)
from analogcast.forecaster import Forecast
from analogcast.ingest import AlignedSeries
from analogcast.miner import Rule

from conftest import EPOCH

P_WAVES = 174 / 1476


@pytest.mark.parametrize(
    "obs,base,sd,sign,z,cls",
    [
        (75.0, 57.8, 8.0, "positive", 2.15, OutcomeClass.EXTREME_HIT),
        (62.1, 48.0, 7.6, "positive", 1.86, OutcomeClass.CLOSE_TO_EXTREME),
        (20.6, 34.8, 6.6, "negative", -2.15, OutcomeClass.EXTREME_HIT),
        (23.7, 34.9, 7.5, "negative", -1.49, OutcomeClass.SAME_SIGN_GE_1SD),
        (40.0, 34.9, 7.5, "negative", 0.68, OutcomeClass.WRONG_SIGN),
        (37.0, 34.9, 7.5, "positive", 0.28, OutcomeClass.SAME_SIGN_LT_1SD),
    ],
)
def test_classify_table(obs, base, sd, sign, z, cls):
    out = classify(obs, base, sd, sign)
    assert out.cls is cls
    assert out.z == pytest.approx(z, abs=0.01)


def test_classify_band_edges():
    assert classify(2.0, 0.0, 1.0, "positive").cls is OutcomeClass.CLOSE_TO_EXTREME
    assert classify(1.7, 0.0, 1.0, "positive").cls is OutcomeClass.SAME_SIGN_GE_1SD
    assert classify(1.0, 0.0, 1.0, "positive").cls is OutcomeClass.SAME_SIGN_GE_1SD
    assert classify(-1.0, 0.0, 1.0, "negative").cls is OutcomeClass.SAME_SIGN_GE_1SD
    assert classify(0.0, 0.0, 1.0, "positive").cls is OutcomeClass.WRONG_SIGN
    with pytest.raises(DataError):
        classify(1.0, 0.0, 0.0, "positive")


@given(st.floats(-10, 10), st.sampled_from(["positive", "negative"]))
def test_classify_sign_symmetry(z, sign):
    other = "negative" if sign == "positive" else "positive"
    a = classify(z, 0.0, 1.0, sign)
    b = classify(-z, 0.0, 1.0, other)
    assert a.cls is b.cls


def test_base_rates():
    assert base_rate(174, 1476) == pytest.approx(0.1179, abs=1e-4)
    assert base_rate(144, 1476) == pytest.approx(0.0976, abs=1e-4)
    with pytest.raises(DataError):
        base_rate(5, 0)
    with pytest.raises(DataError):
        base_rate(10, 5)


def test_null_probability_values():
    assert null_probability(P_WAVES, 4) == pytest.approx(0.3946, abs=1e-4)
    assert null_probability(P_WAVES, 4, 3) == pytest.approx(0.0493, abs=1e-4)
    assert null_probability(0.0, 5) == 0.0
    assert null_probability(1.0, 1) == 1.0
    for bad in [(-0.1, 1, 0), (1.1, 1, 0), (0.5, 0, 0), (0.5, 1, -1)]:
        with pytest.raises(DataError):
            null_probability(*bad)


@given(st.floats(0, 1), st.integers(1, 50), st.integers(0, 10))
def test_null_probability_properties(p, m, s):
    v = null_probability(p, m, s)
    assert 0.0 <= v <= 1.0
    assert null_probability(p, m + 1, s) >= v - 1e-15
    assert null_probability(p, m, s + 1) <= v


def test_null_probability_rounded_rate():
    # A rate quoted as 9.8 % rather than 144/1476 moves the result in the fourth decimal.
    assert null_probability(0.098, 4, 3) == pytest.approx(0.0423, abs=5e-5)
    assert null_probability(144 / 1476, 4, 3) == pytest.approx(0.0421, abs=5e-5)


def test_null_probability_monte_carlo():
    rng = np.random.default_rng(20240101)
    picks = rng.random((10**6, 4)) < P_WAVES
    assert picks.any(axis=1).mean() == pytest.approx(null_probability(P_WAVES, 4), abs=0.002)


def test_significance_from_counts():
    p, raw, adj = significance_from_counts(174, sector_count(dt.date(1973, 1, 1), dt.date(2013, 12, 31)), 4, 3)
    assert p == pytest.approx(0.11789, abs=1e-5)
    assert raw == pytest.approx(0.39452, abs=1e-5)
    assert adj == pytest.approx(0.049315, abs=1e-6)


def test_wave_base_rate():
    groups = [[ExtremeEvent(1, "positive", 1, 3)]] * 3
    assert wave_base_rate(groups, dt.date(2000, 1, 1), dt.date(2000, 1, 31)) == (3, 3, 1.0)


def sector_series():
    vals = np.zeros(400)
    vals[10:20] = np.arange(10.0)  # Jan 11-20, max 9 on Jan 20
    vals[12] = 9.0  # tie earlier on Jan 13
    vals[25] = np.nan
    vals[21:31] = -3.0
    vals[23] = -3.0
    return AlignedSeries(1, vals)


def test_observed_extremal_ties_and_missing():
    s = sector_series()
    assert observed_extremal(s, Sector(2000, 1, 2), "positive", EPOCH) == (9.0, dt.date(2000, 1, 13))
    assert observed_extremal(s, Sector(2000, 1, 3), "negative", EPOCH) == (-3.0, dt.date(2000, 1, 22))
    with pytest.raises(DataError, match="outside"):
        observed_extremal(s, Sector(1999, 12, 3), "positive", EPOCH)
    gap = AlignedSeries(1, np.where(np.arange(400) < 40, np.nan, 0.0))
    with pytest.raises(DataError, match="no data"):
        observed_extremal(gap, Sector(2000, 1, 1), "positive", EPOCH)


def fake_forecast(target, sign="positive", rule_id=1):
    r = Rule(1, sign, 2, 3, 1, 14, 0.0, 0.0, (), 4)
    return Forecast(rule_id, r, target, target, target, sector_of(target), sign, 1.0, "above_max")


def eval_world():
    rng = np.random.default_rng(5)
    length = (dt.date(2006, 1, 1) - EPOCH).days
    vals = rng.normal(0, 1, length)
    t_hot = (dt.date(2005, 7, 15) - EPOCH).days
    vals[t_hot] = 50.0
    s = AlignedSeries(1, vals)
    clim = compute_climatology(s, (EPOCH, dt.date(2005, 12, 31)), EPOCH)
    return s, clim, t_hot + 1


def test_evaluate_empty():
    s, clim, j = eval_world()
    groups = [[ExtremeEvent(j, "positive", 40.0, 3.0)]]
    rep = evaluate([], s, clim, groups, (dt.date(2005, 1, 1), dt.date(2005, 12, 31)), EPOCH, rate=0.1)
    assert rep.invocations == [] and rep.extremes_recall == 0.0
    assert rep.forecast_precision is None and rep.significance is None
    json.loads(rep.to_json())


def test_evaluate_hit_and_dedup():
    s, clim, j = eval_world()
    groups = [[ExtremeEvent(j, "positive", 40.0, 3.0)], [ExtremeEvent(j - 400, "positive", 40.0, 3.0)]]
    fs = [
        fake_forecast(dt.date(2005, 7, 12)),
        fake_forecast(dt.date(2005, 7, 13), rule_id=2),
        fake_forecast(dt.date(2005, 9, 2)),
    ]
    rep = evaluate(fs, s, clim, groups, (dt.date(2005, 1, 1), dt.date(2005, 12, 31)), EPOCH, rate=0.1)
    assert len(rep.invocations) == 2
    first = rep.invocations[0]
    assert first.sector == Sector(2005, 7, 2) and first.rule_ids == (1, 2)
    assert first.outcome is OutcomeClass.EXTREME_HIT
    assert rep.extreme_groups == 1 and rep.predicted_groups == 1 and rep.extremes_recall == 1.0
    assert rep.forecast_precision == 0.5
    sig = rep.significance
    assert sig["invocations"] == 2
    expected_others = (1 if rep.invocations[1].outcome.sign_correct else 0)
    assert sig["sign_correct_others"] == expected_others
    assert sig["probability"] == pytest.approx(null_probability(0.1, 2, expected_others))
    table = rep.to_table("F")
    assert "The middle of Jul 2005" in table and "ExtremeHit" in table


def test_evaluate_bad_range():
    s, clim, _ = eval_world()
    with pytest.raises(DataError):
        evaluate([], s, clim, [], (dt.date(2005, 2, 1), dt.date(2005, 1, 1)), EPOCH)
