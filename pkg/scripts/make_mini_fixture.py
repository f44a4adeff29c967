"""Regenerate the bundled 6-station x 10-year fixture under src/analogcast/fixtures/mini."""

import datetime as dt
import json
from pathlib import Path

from analogcast.synth import PlantedRule, SynthSpec, generate, manifest_entries, world_to_csv

OUT = Path(__file__).resolve().parents[1] / "src" / "analogcast" / "fixtures" / "mini"
EPOCH = dt.date(2000, 1, 1)


def main():
    d = dt.date.fromisoformat
    spec = SynthSpec(
        dataset_count=6,
        years=10,
        seed=20150222,
        seasonal_amplitude=18.0,
        noise_sd=6.0,
        epoch=EPOCH,
        planted=(
            PlantedRule(2, 3, 4, 60, [d(x) for x in ("2002-04-16", "2003-07-02", "2005-03-20",
                                                      "2006-10-05", "2007-05-11", "2009-04-26")],
                        precursor_boost=120.0, target_z=7.0),
            PlantedRule(4, 6, 2, 200, [d(x) for x in ("2002-12-04", "2004-01-20", "2005-11-28",
                                                       "2007-08-14", "2008-12-14")],
                        precursor_boost=80.0, target_z=7.0),
        ),
    )
    world = generate(spec)
    OUT.mkdir(parents=True, exist_ok=True)
    for i in sorted(world.values):
        text = world_to_csv(world, i)
        if i == 5:
            # a few sentinel-coded gaps to exercise missing-data handling
            lines = text.splitlines()
            for k in (400, 401, 1700, 2900):
                lines[k] = lines[k].split(",")[0] + ",9999.9"
            text = "\n".join(lines) + "\n"
        (OUT / f"series_{i:02d}.csv").write_text("# synthetic fixture, degrees F\n" + text)
    entries = manifest_entries(world)
    for e in entries:
        e["name"] = f"station-{e['id']}"
        e["units"] = "F"
    (OUT / "manifest.json").write_text(json.dumps(entries, indent=2) + "\n")
    (OUT / "ground_truth.json").write_text(world.ground_truth_json())
    config = {
        "target_id": 1,
        "sign": "positive",
        "dataset_ids": ["2-6"],
        "n_set": ["1-365"],
        "l_set": ["14-365"],
        "learning_range": ["2002-01-01", "2007-12-31"],
        "min_clusters": 4,
        "cluster_gap_days": 30,
        "climatology": {"period": "full", "ddof": 0, "threshold_sd": 2.0},
    }
    (OUT / "mine.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
