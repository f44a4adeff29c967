import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from analogcast.climatology import AnomalySeries
from analogcast.synth import PlantedRule, SynthSpec, generate, spaced_dates

EPOCH = dt.date(2000, 1, 1)
FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "analogcast" / "fixtures" / "mini"

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line[1])


def planted_world(seed=7, clusters=4, n=3, l=20, pair=(2, 3), datasets=6, years=3, boost=60.0, spacing=90):
    plant = PlantedRule(pair[0], pair[1], n, l, spaced_dates(EPOCH, 200, clusters, spacing), precursor_boost=boost)
    return generate(SynthSpec(datasets, years, seed, planted=(plant,), epoch=EPOCH))


@pytest.fixture
def world():
    return planted_world()


def make_anomaly(values, ds_id=1, epoch=EPOCH):
    values = np.asarray(values, dtype=float)
    return AnomalySeries(ds_id, values, np.isfinite(values), epoch)
