"""Command-line pipeline: ingest -> spells -> estimate / compare / report.

Subcommands: ingest, km, compare, report, generate, validate.  A JSON config
file supplies defaults (schema map, universe filter, window, size classes,
epochs, industry lists); flags override the config.  Every command writes
both machine-readable JSON (schema-versioned) and delimited text, with no
timestamps, so identical inputs give byte-identical outputs.

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 validation
failure.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from . import cohorts as co
from .errors import EmptyCohortError, EstimationError, IngestError, PanelsurvError
from .ingest import UniverseFilter, filter_universe, parse_records, write_records, \
    write_reject_log
from .km import conditional_quarterly_rates, km_estimate, median_lifetime, survival_at
from .lifecourse import ObservationWindow, apply_ownership_censoring, \
    build_spells, read_spells, write_spells
from .logrank import DEFAULT_TAIL_THRESHOLDS, logrank, permutation_null_check
from .quarters import format_quarter, parse_quarter
from .synth import HazardSpec, PanelSpec, generate_panel, write_truth

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_VALIDATION = 4


class ConfigError(PanelsurvError):
    pass


# ---------------------------------------------------------------------------
# configuration

DEFAULT_CONFIG = {
    "schema": {},
    "reject_threshold": 0.01,
    "workers": 1,
    "universe": {},
    "window": {"start": "1992Q1", "end": "2011Q3"},
    "size_classes": [
        {"label": "small", "min": 0, "max": 5},
        {"label": "medium", "min": 6, "max": 20},
        {"label": "large", "min": 21, "max": None},
    ],
    "epochs": [
        {"label": "1992-2000 Expansion", "first": "1992Q2", "last": "2000Q4"},
        {"label": "2001 Recession", "first": "2001Q1", "last": "2001Q4"},
        {"label": "2002-2007 Expansion", "first": "2002Q1", "last": "2007Q4"},
        {"label": "All birth years", "first": "1992Q2", "last": "2011Q3"},
    ],
    "baseline_naics": "722110",
    "industries": [list(pair) for pair in co.TOP_STARTUP_INDUSTRIES],
    "industries_selected": [list(pair) for pair in co.SELECTED_INDUSTRIES],
    "seed": 20110930,
    "generate": {
        "groups": [
            {"n": 10000, "naics": "722110", "hazard": {"kind": "constant",
                                                       "probs": [0.06]}},
        ],
    },
    "validate": {
        "replications": 10000,
        "thresholds": list(DEFAULT_TAIL_THRESHOLDS),
        "tail_tolerance": 0.005,
        "variance_range": [0.9, 1.1],
    },
}


def _deep_merge(base, override):
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=None):
    config = DEFAULT_CONFIG
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                config = _deep_merge(config, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        config = _deep_merge(config, overrides)
    return config


def window_from_config(config):
    spec = config["window"]
    return ObservationWindow(parse_quarter(str(spec["start"])),
                             parse_quarter(str(spec["end"])))


def universe_from_config(config):
    spec = config.get("universe") or {}
    kwargs = {}
    if "include_naics_prefixes" in spec:
        kwargs["include_naics_prefixes"] = tuple(spec["include_naics_prefixes"])
    if "exclude_naics" in spec:
        kwargs["exclude_naics"] = tuple(spec["exclude_naics"])
    if "exclude_public" in spec:
        kwargs["exclude_public"] = bool(spec["exclude_public"])
    if "exclude_multi_unit" in spec:
        kwargs["exclude_multi_unit"] = bool(spec["exclude_multi_unit"])
    return UniverseFilter(**kwargs)


def size_classes_from_config(config):
    return tuple(
        co.SizeClass(label=c["label"], min_size=int(c["min"]),
                     max_size=None if c.get("max") is None else int(c["max"]))
        for c in config["size_classes"]
    )


def epochs_from_config(config):
    return tuple(
        co.BirthEpoch(label=e["label"], first_quarter=parse_quarter(str(e["first"])),
                      last_quarter=parse_quarter(str(e["last"])))
        for e in config["epochs"]
    )


def cohort_spec_from_pairs(pairs, config):
    """Build a CohortSpec from repeatable key=value flags."""
    spec_kwargs = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"cohort predicate must be key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key == "naics":
            spec_kwargs["naics_prefix"] = value
        elif key == "size":
            classes = {c.label: c for c in size_classes_from_config(config)}
            if value not in classes:
                raise ConfigError(
                    f"unknown size class {value!r}; have {sorted(classes)}")
            spec_kwargs["size_class"] = classes[value]
        elif key == "epoch":
            epochs = {e.label: e for e in epochs_from_config(config)}
            if value not in epochs:
                raise ConfigError(
                    f"unknown epoch {value!r}; have {sorted(epochs)}")
            spec_kwargs["epoch"] = epochs[value]
        else:
            raise ConfigError(f"unknown cohort key {key!r} (use naics/size/epoch)")
    return co.CohortSpec(**spec_kwargs)


# ---------------------------------------------------------------------------
# output helpers


def _write_json(path, payload):
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _wants(config, kind):
    """Which report formats to emit; pipeline interchange files are unaffected."""
    chosen = config.get("format", "both")
    return chosen in ("both", kind)


def _curve_rows(curve):
    return [
        [int(curve.times[i]), int(curve.s[i]), int(curve.c[i]), int(curve.n[i]),
         int(curve.d[i]), repr(float(curve.survival[i])),
         repr(float(curve.variance[i]))]
        for i in range(len(curve))
    ]


CURVE_COLUMNS = ("t_quarters", "s", "c", "n", "d", "survival", "variance")


def _curve_payload(curve):
    return {
        "n0": curve.n0,
        "max_observed_age": curve.max_observed_age,
        "rows": [
            {"t_quarters": int(curve.times[i]), "s": int(curve.s[i]),
             "c": int(curve.c[i]), "n": int(curve.n[i]), "d": int(curve.d[i]),
             "survival": float(curve.survival[i]),
             "variance": float(curve.variance[i])}
            for i in range(len(curve))
        ],
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, config):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, rejects = parse_records(
        args.input,
        schema=config.get("schema") or None,
        reject_threshold=float(config["reject_threshold"]),
        workers=int(args.workers or config.get("workers", 1)),
    )
    universe = universe_from_config(config)
    window = window_from_config(config)
    kept = filter_universe(records, universe)
    spells, counts = build_spells(kept, window)
    spells = apply_ownership_censoring(spells, kept)

    write_spells(out / "spells.csv", spells)
    write_reject_log(out / "reject_log.csv", rejects)
    summary = counts.as_dict()
    summary.update({
        "records_parsed": len(records),
        "records_in_universe": len(kept),
        "records_rejected": len(rejects),
        "spells_written": len(spells),
        "window": {"start": format_quarter(window.start_quarter),
                   "end": format_quarter(window.end_quarter)},
    })
    _write_json(out / "ingest_summary.json", summary)

    for key, value in counts.as_dict().items():
        print(f"{key}: {value}")
    if not spells:
        print("warning: no spells emitted (no births after the window start)")
    return EXIT_OK


def _load_cohort(args, config, flag_values, label):
    spells = read_spells(args.input)
    spec = cohort_spec_from_pairs(flag_values, config)
    cohort = co.select_cohort(spells, spec)
    if not cohort:
        raise EmptyCohortError(f"{label} cohort is empty: {spec.describe()}")
    return cohort, spec


def cmd_km(args, config):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cohort, spec = _load_cohort(args, config, args.cohort, "km")
    curve = km_estimate(cohort)
    median = median_lifetime(curve)

    if _wants(config, "delimited"):
        _write_csv(out / "curve.csv", CURVE_COLUMNS, _curve_rows(curve))
    payload = _curve_payload(curve)
    payload.update({
        "cohort": spec.describe(),
        "one_year_survival": survival_at(curve, 4),
        "median_lifetime_quarters": median.quarters,
        "median_lifetime_years": median.render(),
        "conditional_quarterly_rates": [
            {"age": t, "rate": r} for t, r in conditional_quarterly_rates(curve)],
    })
    if _wants(config, "json"):
        _write_json(out / "curve.json", payload)

    print(f"cohort: {spec.describe()} (n={curve.n0})")
    print(f"1-year survival rate: {survival_at(curve, 4):.2f}")
    print(f"median lifetime (years): {median.render()}")
    return EXIT_OK


def cmd_compare(args, config):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    group_a, spec_a = _load_cohort(args, config, args.cohort_a, "A")
    group_b, spec_b = _load_cohort(args, config, args.cohort_b, "B")
    ids_a = {s.establishment_id for s in group_a}
    ids_b = {s.establishment_id for s in group_b}
    overlap = ids_a & ids_b
    if overlap:
        raise EstimationError(
            f"cohorts overlap in {len(overlap)} establishments; "
            "compare requires disjoint cohorts")

    result = logrank(group_a, group_b)
    payload = result.as_dict()
    payload.update({"cohort_a": spec_a.describe(), "cohort_b": spec_b.describe()})
    _write_json(out / "logrank.json", payload)

    print(f"z={co.render_z(result.z)} p={co.render_p(result.p_two_sided)} "
          f"(n={result.n1} vs {result.n2}, events={result.events1} vs {result.events2})")
    return EXIT_OK


def _report_rates(spells, config, out):
    series = co.birth_death_rate_series(spells)
    if _wants(config, "delimited"):
        _write_csv(out / "rates.csv",
                   ("quarter", "birth_rate", "death_rate", "n_active"),
                   [[format_quarter(p.quarter), repr(p.birth_rate),
                     repr(p.death_rate), p.n_active] for p in series])
    if not _wants(config, "json"):
        return
    _write_json(out / "rates.json", {
        "denominator": "active_spells",
        "rows": [{"quarter": format_quarter(p.quarter),
                  "birth_rate": p.birth_rate, "death_rate": p.death_rate,
                  "n_active": p.n_active} for p in series],
    })


def _report_median_diff(spells, config, out):
    size_classes = size_classes_from_config(config)
    epochs = epochs_from_config(config)
    focal = config["baseline_naics"]
    cells = co.median_diff_table(spells, size_classes, epochs, focal)
    epoch_labels = [e.label for e in epochs]

    by_row = {}
    for cell in cells:
        by_row.setdefault(cell.size_label, {})[cell.epoch_label] = cell
    rows = []
    for size_label, row_cells in by_row.items():
        rows.append([size_label] + [co.render_median_diff(row_cells[label])
                                    for label in epoch_labels])
    if _wants(config, "delimited"):
        _write_csv(out / "median_diff.csv", ["size_class"] + epoch_labels, rows)
    if not _wants(config, "json"):
        return
    _write_json(out / "median_diff.json", {
        "focal_naics": focal,
        "cells": [{
            "size_class": c.size_label, "epoch": c.epoch_label,
            "status": c.status, "diff_years": c.diff_years,
            "significant": c.significant, "z": c.z, "p": c.p,
            "focal_count": c.focal_count, "rest_count": c.rest_count,
        } for c in cells],
    })


def _report_industries(spells, industries, baseline, config, out, stem):
    rows = co.industry_report(spells, industries, baseline)
    if _wants(config, "delimited"):
        _write_csv(out / f"{stem}.csv", co.INDUSTRY_REPORT_COLUMNS,
                   co.industry_report_rendered_rows(rows))
    if not _wants(config, "json"):
        return
    _write_json(out / f"{stem}.json", {
        "baseline_naics": baseline,
        "rows": [{
            "name": r.name, "naics": r.naics_prefix, "count": r.count,
            "first_year_survival": r.first_year_survival,
            "median_quarters": r.median.quarters if r.median else None,
            "median_not_reached": (not r.median.reached) if r.median else None,
            "median_small_quarters":
                r.median_small.quarters if r.median_small else None,
            "median_small_not_reached":
                (not r.median_small.reached) if r.median_small else None,
            "z": r.z, "p": r.p, "is_baseline": r.is_baseline,
        } for r in rows],
    })


REPORT_KINDS = ("table1", "table2", "table3", "rates")


def cmd_report(args, config):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spells = read_spells(args.input)
    if not spells:
        raise EmptyCohortError("spell file is empty; nothing to report")
    baseline = config["baseline_naics"]
    if args.kind == "rates":
        _report_rates(spells, config, out)
    elif args.kind == "table1":
        _report_median_diff(spells, config, out)
    elif args.kind == "table2":
        _report_industries(spells, [tuple(x) for x in config["industries"]],
                           baseline, config, out, "table2")
    elif args.kind == "table3":
        _report_industries(spells, [tuple(x) for x in config["industries_selected"]],
                           baseline, config, out, "table3")
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown report kind {args.kind!r}")
    print(f"report {args.kind} written to {out}")
    return EXIT_OK


def _panel_spec_from_group(group, window, base_seed, index):
    hazard_cfg = group.get("hazard") or {"kind": "constant", "probs": [0.06]}
    hazard = HazardSpec(probs=tuple(float(p) for p in hazard_cfg["probs"]),
                        kind=hazard_cfg.get("kind", "piecewise_by_age"),
                        label=hazard_cfg.get("label", ""))
    entry = group.get("entry", "uniform")
    if entry != "uniform":
        entry = tuple(float(w) for w in entry)
    size_dist = group.get("size_dist")
    spec = PanelSpec(
        n_establishments=int(group["n"]),
        seed=int(group.get("seed", base_seed + index)),
        window=window,
        entry=entry,
        censor_prob=float(group.get("censor_prob", 0.0)),
        size_dist=tuple((int(s), float(p)) for s, p in size_dist)
        if size_dist else PanelSpec.__dataclass_fields__["size_dist"].default,
        naics=str(group.get("naics", "722110")),
        id_prefix=str(group.get("id_prefix", f"G{index}_")),
        first_birth_quarter=parse_quarter(str(group["first_birth"]))
        if "first_birth" in group else None,
        last_birth_quarter=parse_quarter(str(group["last_birth"]))
        if "last_birth" in group else None,
    )
    return spec, hazard


def cmd_generate(args, config):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    window = window_from_config(config)
    base_seed = int(args.seed if args.seed is not None else config["seed"])
    groups = config["generate"]["groups"]

    all_records = []
    all_truths = []
    for index, group in enumerate(groups):
        spec, hazard = _panel_spec_from_group(group, window, base_seed, index)
        records, truths = generate_panel(spec, hazard)
        all_records.extend(records)
        all_truths.extend(truths)

    write_records(out / "panel.csv", all_records)
    write_truth(out / "truth.csv", all_truths)
    print(f"generated {len(all_truths)} establishments, "
          f"{len(all_records)} quarterly records")
    return EXIT_OK


def cmd_validate(args, config):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spells = read_spells(args.input)
    if not spells:
        raise EmptyCohortError("spell file is empty; nothing to validate")
    vcfg = config["validate"]
    replications = int(args.replications or vcfg["replications"])
    seed = int(args.seed if args.seed is not None else config["seed"])
    group1_size = int(vcfg.get("group1_size") or len(spells) // 2)

    report = permutation_null_check(
        spells, group1_size=group1_size, replications=replications, seed=seed,
        thresholds=tuple(vcfg["thresholds"]))
    tolerance = float(vcfg["tail_tolerance"])
    var_lo, var_hi = (float(x) for x in vcfg["variance_range"])

    checks = [
        ("max_abs_disagreement <= tolerance",
         report.max_abs_disagreement <= tolerance,
         f"{report.max_abs_disagreement:.4f} vs {tolerance}"),
        ("z variance within range",
         var_lo <= report.z_var <= var_hi,
         f"{report.z_var:.4f} in [{var_lo}, {var_hi}]"),
    ]
    payload = report.as_dict()
    payload["checks"] = [
        {"name": name, "passed": passed, "detail": detail}
        for name, passed, detail in checks
    ]
    _write_json(out / "validation.json", payload)

    all_passed = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name} ({detail})")
        all_passed = all_passed and passed
    return EXIT_OK if all_passed else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="panelsurv",
        description="Survival analysis over longitudinal establishment panels.")
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--format", choices=("delimited", "json", "both"),
                        default=None,
                        help="which report formats to write (default: both)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse a panel file into spells")
    p_ingest.add_argument("--input", required=True)
    p_ingest.add_argument("--output-dir", required=True)
    p_ingest.add_argument("--workers", type=int, default=None)
    p_ingest.add_argument("--window", default=None,
                          help="observation window as YYYYQn:YYYYQn")
    p_ingest.set_defaults(func=cmd_ingest)

    p_km = sub.add_parser("km", help="survival curve for a cohort")
    p_km.add_argument("--input", required=True, help="spells file")
    p_km.add_argument("--output-dir", required=True)
    p_km.add_argument("--cohort", action="append", default=[],
                      metavar="KEY=VALUE", help="naics=/size=/epoch= predicates")
    p_km.set_defaults(func=cmd_km)

    p_cmp = sub.add_parser("compare", help="logrank test between two cohorts")
    p_cmp.add_argument("--input", required=True, help="spells file")
    p_cmp.add_argument("--output-dir", required=True)
    p_cmp.add_argument("--cohort-a", action="append", default=[],
                       metavar="KEY=VALUE")
    p_cmp.add_argument("--cohort-b", action="append", default=[],
                       metavar="KEY=VALUE")
    p_cmp.set_defaults(func=cmd_compare)

    p_rep = sub.add_parser("report", help="standard reports")
    p_rep.add_argument("--input", required=True, help="spells file")
    p_rep.add_argument("--output-dir", required=True)
    p_rep.add_argument("--kind", required=True, choices=REPORT_KINDS)
    p_rep.set_defaults(func=cmd_report)

    p_gen = sub.add_parser("generate", help="synthesize a panel with known hazards")
    p_gen.add_argument("--output-dir", required=True)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=cmd_generate)

    p_val = sub.add_parser("validate",
                           help="permutation check of the normal approximation")
    p_val.add_argument("--input", required=True, help="spells file")
    p_val.add_argument("--output-dir", required=True)
    p_val.add_argument("--replications", type=int, default=None)
    p_val.add_argument("--seed", type=int, default=None)
    p_val.set_defaults(func=cmd_validate)

    return parser


def _window_override(args):
    window_text = getattr(args, "window", None)
    if not window_text:
        return {}
    try:
        start, end = window_text.split(":")
    except ValueError:
        raise ConfigError(f"--window must be YYYYQn:YYYYQn, got {window_text!r}")
    return {"window": {"start": start, "end": end}}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = _window_override(args)
        if args.format:
            overrides["format"] = args.format
        config = load_config(args.config, overrides)
        return args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, EstimationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
