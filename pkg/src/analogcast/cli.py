"""Command-line entry point.

Exit codes: 0 success, 2 usage/config/parse errors, 3 runtime/data errors.
Progress goes to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
import time
from pathlib import Path

from analogcast.calendar import DEFAULT_END, DEFAULT_EPOCH, date_to_index, epoch_length
from analogcast.climatology import SIGNS, extremes_csv, group_extremes
from analogcast.errors import AnalogError, ConfigError, DataError, ParseError
from analogcast.evaluator import evaluate, null_probability, significance_from_counts, wave_base_rate
from analogcast.forecaster import forecast_all, forecasts_from_csv, forecasts_to_csv
from analogcast.ingest import ingest_manifest, load_store, save_store
from analogcast.miner import day_ref, default_threads, mine, rules_from_jsonl, rules_to_jsonl
from analogcast.pipeline import (
    ClimatologyOptions,
    atomic_write_text,
    load_run_config,
    prepare,
    read_mapping,
)
from analogcast.synth import SynthSpec, generate, manifest_entries, world_to_csv

log = logging.getLogger("analogcast")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid ISO date {text!r}") from None


def _need(args, name: str):
    value = getattr(args, name)
    if value is None:
        raise ConfigError(f"--{name.replace('_', '-')} is required for '{args.command}'")
    return value


def _clim_options(args, epoch: dt.date) -> tuple[ClimatologyOptions, tuple[int, int] | None]:
    if not args.config:
        return ClimatologyOptions(), None
    raw = read_mapping(args.config)
    opts = ClimatologyOptions.from_dict(raw.get("climatology"))
    if "learning_range" not in raw:
        return opts, None
    return opts, tuple(day_ref(v, epoch) for v in raw["learning_range"])


def _emit(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(path, text)


# --------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args) -> int:
    store = ingest_manifest(args.manifest, args.epoch, epoch_length(args.epoch, args.end))
    save_store(_need(args, "store"), store)
    log.info("ingested %d series into %s", len(store.ids), args.store)
    return EXIT_OK


def cmd_climatology(args) -> int:
    store = load_store(_need(args, "store"))
    opts, lr = _clim_options(args, store.epoch)
    table, _ = prepare(store, args.target, opts, lr)
    _emit(args.out, table.climatologies[args.target].to_csv())
    return EXIT_OK


def cmd_extremes(args) -> int:
    store = load_store(_need(args, "store"))
    opts, lr = _clim_options(args, store.epoch)
    _, ext = prepare(store, args.target, opts, lr)
    events = ext.positives + ext.negatives if args.sign is None else ext.of_sign(args.sign)
    _emit(args.out, extremes_csv(events, store.epoch))
    log.info("%d positive, %d negative extremes; %d days without usable SD",
             len(ext.positives), len(ext.negatives), len(ext.degenerate))
    return EXIT_OK


def cmd_mine(args) -> int:
    store = load_store(_need(args, "store"))
    run = load_run_config(_need(args, "config"), store.epoch)
    cfg = run.search
    t0 = time.perf_counter()
    table, ext = prepare(store, cfg.target_id, run.climatology, cfg.learning_range)
    rules = mine(table.anomalies, ext, cfg, threads=args.threads)
    _emit(args.out, rules_to_jsonl(rules, store.epoch))
    print(
        f"pairs scanned {len(cfg.pairs())}, rules found {len(rules)}, "
        f"wall time {time.perf_counter() - t0:.2f} s",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_forecast(args) -> int:
    store = load_store(_need(args, "store"))
    rules = rules_from_jsonl(Path(args.rules).read_text(), store.epoch)
    opts, lr = _clim_options(args, store.epoch)
    out = []
    if rules:
        table, _ = prepare(store, rules[0].target_id, opts, lr)
        rng = (date_to_index(args.start, store.epoch), date_to_index(args.end, store.epoch))
        out = forecast_all(rules, table.anomalies, rng, store.epoch)
    _emit(args.out, forecasts_to_csv(out))
    log.info("%d rules fired %d times", len(rules), len(out))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    store = load_store(_need(args, "store"))
    rules = rules_from_jsonl(Path(args.rules).read_text(), store.epoch) if args.rules else None
    forecasts = forecasts_from_csv(Path(args.forecasts).read_text(), rules)
    opts, lr = _clim_options(args, store.epoch)
    table, ext = prepare(store, args.target, opts, lr)
    groups = group_extremes(ext.of_sign(args.sign), args.group_gap)
    _, _, rate = wave_base_rate(groups, store.epoch, store.end)
    report = evaluate(
        [f for f in forecasts if f.predicted_sign == args.sign],
        store[args.target],
        table.climatologies[args.target],
        groups,
        (args.start, args.end),
        store.epoch,
        rate=rate,
    )
    _emit(args.out, report.to_json() + "\n")
    if args.table:
        atomic_write_text(args.table, report.to_table(store.descriptors[args.target].units))
    return EXIT_OK


def cmd_synth(args) -> int:
    raw = read_mapping(_need(args, "spec"))
    if args.seed is not None:
        raw["seed"] = args.seed
    world = generate(SynthSpec.from_dict(raw))
    if args.store:
        save_store(args.store, world.store())
    if args.csv_dir:
        out = Path(args.csv_dir)
        for i in sorted(world.values):
            atomic_write_text(out / f"series_{i:02d}.csv", world_to_csv(world, i))
        atomic_write_text(out / "manifest.json", json.dumps(manifest_entries(world), indent=2) + "\n")
    if args.ground_truth:
        atomic_write_text(args.ground_truth, world.ground_truth_json())
    return EXIT_OK


def cmd_signif(args) -> int:
    try:
        return _signif(args)
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def _signif(args) -> int:
    if args.p is not None:
        p = args.p
        raw = null_probability(p, args.m, 0)
        adjusted = null_probability(p, args.m, args.sign_others)
    elif args.waves is not None and args.sectors is not None:
        p, raw, adjusted = significance_from_counts(args.waves, args.sectors, args.m, args.sign_others)
    else:
        raise ConfigError("give either --p or both --waves and --sectors")
    print(f"base rate p = {p:.4f}")
    print(f"P(at least one hit in {args.m}) = {raw:.4f}")
    print(f"null probability (sign-correct others = {args.sign_others}) = {adjusted:.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", type=Path, help="aligned store directory")
    common.add_argument("--threads", type=int, default=default_threads(), help="worker threads for mining")
    common.add_argument("--config", type=Path, help="search/run config (JSON or TOML)")
    common.add_argument("--seed", type=int, help="override the synthetic world seed")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="analogcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse a manifest into a store")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--epoch", type=_date, default=DEFAULT_EPOCH)
    p.add_argument("--end", type=_date, default=DEFAULT_END)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("climatology", parents=[common], help="export a day-of-year climatology")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_climatology)

    p = sub.add_parser("extremes", parents=[common], help="export 2-SD extremes of a dataset")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--sign", choices=SIGNS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extremes)

    p = sub.add_parser("mine", parents=[common], help="search precursor rules")
    p.add_argument("--out", help="rules JSONL (default stdout)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("forecast", parents=[common], help="apply rules over a date range")
    p.add_argument("--rules", type=Path, required=True)
    p.add_argument("--start", type=_date, required=True)
    p.add_argument("--end", type=_date, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", parents=[common], help="score forecasts sector by sector")
    p.add_argument("--forecasts", type=Path, required=True)
    p.add_argument("--rules", type=Path)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--sign", choices=SIGNS, required=True)
    p.add_argument("--start", type=_date, required=True)
    p.add_argument("--end", type=_date, required=True)
    p.add_argument("--group-gap", type=int, default=3)
    p.add_argument("--out", help="report JSON (default stdout)")
    p.add_argument("--table", type=Path, help="also write a human-readable table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic world")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--csv-dir", type=Path, help="also write CSV series and a manifest")
    p.add_argument("--ground-truth", type=Path)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("signif", parents=[common], help="null-hypothesis probability")
    p.add_argument("--p", type=float)
    p.add_argument("--waves", type=int)
    p.add_argument("--sectors", type=int)
    p.add_argument("--m", type=int, required=True, help="number of invocations")
    p.add_argument("--sign-others", type=int, default=0)
    p.set_defaults(func=cmd_signif)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AnalogError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
