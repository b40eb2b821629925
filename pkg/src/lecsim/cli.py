"""Command-line entry point.

Commands: validate, run, sweep, compare, synth.  Data goes to files, logging
to stderr, and stdout carries a short human summary, so the tool pipelines
cleanly.  Exit codes: 0 success, 1 validation failure, 2 runtime/I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .c2v import settle_year_s2
from .config import (
    ConfigError,
    RunConfig,
    load_bundle,
    load_config,
    pick_scenario,
    scenario_series,
    validate_config,
)
from .ingestion import CsvFormatError, synth_ev_profile, synth_household, write_ev_csv, write_household_csv
from .metrics import annual_kwh
from .report import (
    build_scenario_report,
    emit_pv_split_csv,
    emit_report_json,
    emit_sweep_csv,
    emit_sweep_json,
    emit_trace_csv,
)
from .settlement import settle_year_s1
from .sweep import SweepSpec, classify_scenario, compare_s1_s2, run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _parse_thresholds(text: str) -> tuple[float, float]:
    try:
        low, high = (float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected two comma-separated numbers, got {text!r}") from None
    return low, high


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lecsim",
        description="Hourly settlement and EV-charging dispatch simulator "
                    "for local electricity communities.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, type=Path, help="TOML run configuration")
        p.add_argument("--out", type=Path, default=None, help="output directory override")

    p_validate = sub.add_parser("validate", help="check config, prices, and input series")
    p_validate.add_argument("--config", required=True, type=Path)
    p_validate.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="simulate one scenario and write report + trace")
    common(p_run)
    p_run.add_argument("--scenario", required=True, choices=("s1", "s2"),
                       help="settlement regime: separation (s1) or coordination (s2)")
    p_run.add_argument("--demand", default=None,
                       help="demand scenario label (default: first configured)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="EV-price sweep over scenarios and charger options")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1, help="worker cap for base simulations")
    p_sweep.add_argument("--thresholds", type=_parse_thresholds, default=None,
                         metavar="LOW,MED", help="classification boundaries override")
    p_sweep.set_defaults(func=cmd_sweep)

    p_compare = sub.add_parser("compare", help="paired s1/s2 run with per-metric deltas")
    common(p_compare)
    p_compare.add_argument("--demand", default=None)
    p_compare.add_argument("--thresholds", type=_parse_thresholds, default=None,
                           metavar="LOW,MED")
    p_compare.set_defaults(func=cmd_compare)

    p_synth = sub.add_parser("synth", help="generate deterministic CSV fixtures")
    common(p_synth)
    p_synth.add_argument("--seed", type=int, default=None, help="seed override")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def _out_dir(cfg: RunConfig, args) -> Path:
    out = args.out if args.out is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid: {exc}")
        return EXIT_VALIDATION
    problems = validate_config(cfg)
    for problem in problems:
        print(f"invalid: {problem}")
    if problems:
        print(f"{len(problems)} problem(s) found")
        return EXIT_VALIDATION
    print("configuration ok")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    bundle = load_bundle(cfg)
    out = _out_dir(cfg, args)
    dt = cfg.axis.dt_hours

    if args.scenario == "s1":
        lec, statements = settle_year_s1(bundle, cfg.prices,
                                         local_fee_on_top=cfg.local_fee_on_top)
        c2v = None
        chargers = None
        label = "s1"
    else:
        _, ev_demand = pick_scenario(cfg, bundle, args.demand)
        chargers = cfg.chargers
        lec, c2v, statements, _ = settle_year_s2(bundle, cfg.prices, chargers, ev_demand,
                                                 local_fee_on_top=cfg.local_fee_on_top)
        label = "s2"

    pv2ev_kwh = annual_kwh(c2v.pv2ev_kw, dt) if c2v is not None else 0.0
    classification = classify_scenario(pv2ev_kwh,
                                       annual_kwh(lec.surplus_after_sharing_kw, dt),
                                       cfg.thresholds)
    report = build_scenario_report(
        label=label, mode=args.scenario, bundle=bundle, prices=cfg.prices, lec=lec,
        statements=statements, c2v=c2v, chargers=chargers,
        classification=classification)

    _write(out / f"report_{args.scenario}.json", emit_report_json(report))
    _write(out / f"trace_{args.scenario}.csv", emit_trace_csv(bundle, lec, c2v))

    m = report.metrics
    m1 = "n/a" if m.m1_absorption_ratio is None else f"{m.m1_absorption_ratio:.4f}"
    print(f"{args.scenario}: absorption={m1} "
          f"peak_import={m.m2_peak_import_kw:.3f}kW peak_export={m.m2_peak_export_kw:.3f}kW "
          f"revenue={m.m4_revenue.total_chf:.2f}CHF savings={m.m3_ev_savings_chf:.2f}CHF")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    bundle = load_bundle(cfg)
    out = _out_dir(cfg, args)
    thresholds = args.thresholds if args.thresholds is not None else cfg.thresholds

    spec = SweepSpec(
        ev_price_range=cfg.sweep_prices,
        scenarios=scenario_series(cfg, bundle),
        charger_options=cfg.charger_options,
    )
    points = run_sweep(bundle, cfg.prices, spec, thresholds=thresholds,
                       local_fee_on_top=cfg.local_fee_on_top, jobs=args.jobs)

    _write(out / "sweep.csv", emit_sweep_csv(points))
    _write(out / "sweep.json", emit_sweep_json(points))

    # one split row per (scenario, charger) pair, flows shared across prices
    seen = set()
    split_reports = []
    for point in points:
        key = (point.scenario, point.charger_label)
        if point.report is not None and key not in seen:
            seen.add(key)
            split_reports.append(point.report)
    if split_reports:
        _write(out / "pv_split.csv", emit_pv_split_csv(split_reports))

    feasible = [p for p in points if p.feasible]
    print(f"sweep: {len(points)} points "
          f"({len(feasible)} feasible, {len(points) - len(feasible)} infeasible)")
    for scenario in sorted({p.scenario for p in points}):
        rows = [p for p in feasible if p.scenario == scenario]
        if not rows:
            print(f"  {scenario}: no feasible points")
            continue
        revenues = [p.report.metrics.m4_revenue.total_chf for p in rows]
        print(f"  {scenario}: revenue {min(revenues):.2f}..{max(revenues):.2f} CHF/yr")
        for p in rows:
            rev = p.report.metrics.m4_revenue
            payback = "-" if rev.payback_years == float("inf") else f"{rev.payback_years:.2f}y"
            print(f"    ev={p.ev_price:g} {p.charger_label}: revenue={rev.total_chf:.2f} "
                  f"savings={p.report.metrics.m3_ev_savings_chf:.2f} payback={payback}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    bundle = load_bundle(cfg)
    out = _out_dir(cfg, args)
    thresholds = args.thresholds if args.thresholds is not None else cfg.thresholds

    label, ev_demand = pick_scenario(cfg, bundle, args.demand)
    result = compare_s1_s2(bundle, cfg.prices, cfg.chargers, ev_demand,
                           thresholds=thresholds, local_fee_on_top=cfg.local_fee_on_top)

    _write(out / "report_s1.json", emit_report_json(result.s1))
    _write(out / "report_s2.json", emit_report_json(result.s2))
    _write(out / "pv_split.csv", emit_pv_split_csv([result.s1, result.s2]))

    gain = "n/a" if result.absorption_gain is None else f"{result.absorption_gain:+.4f}"
    print(f"compare (demand '{label}'): absorption {gain}, "
          f"peak_import {result.peak_import_delta_kw:+.3f}kW, "
          f"peak_export {result.peak_export_delta_kw:+.3f}kW, "
          f"revenue {result.revenue_delta_chf:+.2f}CHF, "
          f"savings {result.savings_delta_chf:+.2f}CHF")
    for hid, delta in result.m5_delta_chf.items():
        if delta:
            print(f"  {hid}: +{delta:.2f} CHF/yr")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    seed = args.seed if args.seed is not None else cfg.seed
    spec = cfg.synth

    households = []
    for k in range(spec.households):
        pv_kwp = spec.pv_kwp if k < spec.pv_households else 0.0
        households.append(synth_household(
            seed=seed + k, axis=cfg.axis, annual_load_kwh=spec.annual_load_kwh,
            pv_kwp=pv_kwp, yield_kwh_per_kwp=spec.pv_yield_kwh_per_kwp,
            household_id=f"h{k + 1:02d}"))
    profiles = [synth_ev_profile(
        seed=seed + 1000 + k, axis=cfg.axis, sessions_per_day=spec.sessions_per_day,
        energy_per_session_kwh=spec.energy_per_session_kwh, port_kw=spec.port_kw,
        profile_id=f"cp{k + 1:02d}") for k in range(spec.ev_profiles)]

    household_path = cfg.household_csv if cfg.household_csv is not None else out / "households.csv"
    write_household_csv(household_path, cfg.axis, households)
    logger.info("wrote %s", household_path)
    dt = cfg.axis.dt_hours
    for hh in households:
        print(f"{hh.household_id}: load={annual_kwh(hh.load, dt):.1f} kWh "
              f"pv={annual_kwh(hh.pv_gen, dt):.1f} kWh")

    if spec.ev_profiles > 0:
        ev_path = cfg.ev_csv if cfg.ev_csv is not None else out / "ev_profiles.csv"
        write_ev_csv(ev_path, cfg.axis, profiles)
        logger.info("wrote %s", ev_path)
        for profile in profiles:
            print(f"{profile.profile_id}: demand={annual_kwh(profile.demand, dt):.1f} kWh")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    raise SystemExit(main())
