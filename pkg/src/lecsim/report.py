"""Report assembly and serialization.

JSON is the machine interface, CSV the plotting interface; both carry a
schema_version and are byte-stable across runs.  Rounding happens only here
(CHF 2dp, kWh 1dp, kW 3dp, ratios 4dp); everything upstream is full
precision.  Infinite payback serializes as null / an empty CSV cell.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .c2v import C2vYearFlows
from .domain import ChargerSpec, PriceSet
from .ingestion import ProfileBundle
from .metrics import MetricsReport, annual_kwh, compute_metrics
from .settlement import LecYearFlows, MemberStatement

if TYPE_CHECKING:  # pragma: no cover
    from .sweep import ScenarioClass, SweepPoint

__all__ = [
    "SCHEMA_VERSION",
    "ScenarioReport",
    "build_scenario_report",
    "emit_report_json",
    "parse_report_json",
    "emit_sweep_csv",
    "emit_sweep_json",
    "emit_pv_split_csv",
    "emit_trace_csv",
]

SCHEMA_VERSION = "1"

SWEEP_CSV_HEADER = ("scenario,ev_price_chf_kwh,charger_option,revenue_chf,"
                    "surplus_component_chf,passthrough_component_chf,savings_chf,"
                    "payback_years,feasible")


@dataclass(frozen=True)
class ScenarioReport:
    """Everything one scenario run produced, ready for emission.

    ``label`` identifies the run in tables ("s1", "s2", or a demand-scenario
    name); ``mode`` says which settlement regime produced it.  The energy
    totals are full-precision kWh reconciling with the hourly flows.
    """

    label: str
    mode: str
    prices: PriceSet
    chargers: ChargerSpec | None
    metrics: MetricsReport
    annual_energy_kwh: dict[str, float]
    statements: tuple[MemberStatement, ...]
    classification: "ScenarioClass | None" = None


def build_scenario_report(
    label: str,
    mode: str,
    bundle: ProfileBundle,
    prices: PriceSet,
    lec: LecYearFlows,
    statements: Iterable[MemberStatement],
    c2v: C2vYearFlows | None = None,
    chargers: ChargerSpec | None = None,
    classification: "ScenarioClass | None" = None,
) -> ScenarioReport:
    """Assemble metrics and annual totals for one settled run.

    ``ev_demand`` in the totals is what the community actually served
    (pv2ev + grid2ev), which is the input demand whenever ports exist.
    """
    if mode not in ("s1", "s2"):
        raise ValueError(f"mode must be 's1' or 's2', got '{mode}'")
    dt = bundle.axis.dt_hours
    metrics = compute_metrics(bundle, prices, lec, c2v=c2v, chargers=chargers)
    household_import = annual_kwh(lec.grid_import_kw.sum(axis=0), dt)
    grid2ev = annual_kwh(c2v.grid2ev_kw, dt) if c2v is not None else 0.0
    energy = {
        "generation": annual_kwh(bundle.pv_matrix().sum(axis=0), dt),
        "load": annual_kwh(bundle.load_matrix().sum(axis=0), dt),
        "self": metrics.pv_split_kwh["self"],
        "local_share": metrics.pv_split_kwh["local_share"],
        "pv2ev": metrics.pv_split_kwh["pv2ev"],
        "export": metrics.pv_split_kwh["export"],
        "household_grid_import": household_import,
        "grid2ev": grid2ev,
        "community_import": household_import + grid2ev,
        "ev_demand": metrics.pv_split_kwh["pv2ev"] + grid2ev,
    }
    return ScenarioReport(
        label=label,
        mode=mode,
        prices=prices,
        chargers=chargers,
        metrics=metrics,
        annual_energy_kwh=energy,
        statements=tuple(statements),
        classification=classification,
    )


# ----------------------------------------------------------------------
# rounding helpers (emission only)
# ----------------------------------------------------------------------

def _chf(x: float) -> float | None:
    return None if x is None else round(x, 2)


def _kwh(x: float) -> float:
    return round(x, 1)


def _kw(x: float) -> float:
    return round(x, 3)


def _ratio(x: float | None) -> float | None:
    return None if x is None else round(x, 4)


def _years(x: float) -> float | None:
    return None if math.isinf(x) else round(x, 2)


def emit_report_json(report: ScenarioReport) -> str:
    """Serialize one scenario report to a stable-key-order JSON document."""
    p = report.prices
    m = report.metrics
    doc = {
        "schema_version": SCHEMA_VERSION,
        "label": report.label,
        "mode": report.mode,
        "prices": {
            "sell": p.sell, "loc": p.loc, "buy": p.buy, "ev": p.ev,
            "public": p.public, "network_fee": p.network_fee, "gamma": p.gamma,
        },
        "chargers": None if report.chargers is None else {
            "n_cp": report.chargers.n_cp,
            "p_max_kw": report.chargers.p_max_kw,
            "capex_chf": report.chargers.capex_chf,
        },
        "classification": None if report.classification is None else {
            "label": report.classification.label,
            "utilization_ratio": _ratio(report.classification.utilization_ratio),
        },
        "metrics": {
            "m1_absorption_ratio": _ratio(m.m1_absorption_ratio),
            "m2_peak_import_kw": _kw(m.m2_peak_import_kw),
            "m2_peak_export_kw": _kw(m.m2_peak_export_kw),
            "m3_ev_savings_chf": _chf(m.m3_ev_savings_chf),
            "m4_revenue": {
                "surplus_component_chf": _chf(m.m4_revenue.surplus_component_chf),
                "passthrough_component_chf": _chf(m.m4_revenue.passthrough_component_chf),
                "total_chf": _chf(m.m4_revenue.total_chf),
                "payback_years": _years(m.m4_revenue.payback_years),
            },
            "m5_per_household_chf": {hid: _chf(v)
                                     for hid, v in m.m5_per_household_chf.items()},
            "pv_split": None if m.pv_split is None else {
                key: _ratio(m.pv_split[key]) for key in ("self", "local_share", "pv2ev", "export")
            },
        },
        "annual_energy_kwh": {key: _kwh(value)
                              for key, value in report.annual_energy_kwh.items()},
        "households": [
            {
                "household_id": st.household_id,
                "self_consumed_kwh": _kwh(st.self_consumed_kwh),
                "local_sold_kwh": _kwh(st.local_sold_kwh),
                "local_bought_kwh": _kwh(st.local_bought_kwh),
                "grid_import_kwh": _kwh(st.grid_import_kwh),
                "grid_export_kwh": _kwh(st.grid_export_kwh),
                "local_sales_revenue_chf": _chf(st.local_sales_revenue_chf),
                "export_revenue_chf": _chf(st.export_revenue_chf),
                "local_purchase_cost_chf": _chf(st.local_purchase_cost_chf),
                "grid_purchase_cost_chf": _chf(st.grid_purchase_cost_chf),
                "net_cost_chf": _chf(st.net_cost_chf),
            }
            for st in report.statements
        ],
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def parse_report_json(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def emit_sweep_csv(points: "Iterable[SweepPoint]") -> str:
    """Plot-ready sweep table, one row per grid point, sorted upstream.

    Infeasible points keep their row (feasible=false) with the monetary
    cells empty so plots show the feasible region explicitly.
    """
    rows = list(points)
    if not rows:
        raise ValueError("empty sweep grid")
    out = io.StringIO()
    out.write(f"# schema_version={SCHEMA_VERSION}\n")
    out.write(SWEEP_CSV_HEADER + "\n")
    for point in rows:
        if point.feasible and point.report is not None:
            rev = point.report.metrics.m4_revenue
            payback = _years(rev.payback_years)
            cells = [
                f"{rev.total_chf:.2f}",
                f"{rev.surplus_component_chf:.2f}",
                f"{rev.passthrough_component_chf:.2f}",
                f"{point.report.metrics.m3_ev_savings_chf:.2f}",
                "" if payback is None else f"{payback:.2f}",
                "true",
            ]
        else:
            cells = ["", "", "", "", "", "false"]
        out.write(f"{point.scenario},{point.ev_price:g},{point.charger_label},"
                  + ",".join(cells) + "\n")
    return out.getvalue()


def emit_sweep_json(points: "Iterable[SweepPoint]") -> str:
    """Machine-readable sweep grid, one record per point, same order as the CSV."""
    rows = list(points)
    if not rows:
        raise ValueError("empty sweep grid")
    records = []
    for point in rows:
        record = {
            "scenario": point.scenario,
            "ev_price_chf_kwh": point.ev_price,
            "charger_option": point.charger_label,
            "feasible": point.feasible,
        }
        if point.feasible and point.report is not None:
            revenue = point.report.metrics.m4_revenue
            classification = point.report.classification
            record.update({
                "revenue_chf": _chf(revenue.total_chf),
                "surplus_component_chf": _chf(revenue.surplus_component_chf),
                "passthrough_component_chf": _chf(revenue.passthrough_component_chf),
                "savings_chf": _chf(point.report.metrics.m3_ev_savings_chf),
                "payback_years": _years(revenue.payback_years),
                "classification": None if classification is None else {
                    "label": classification.label,
                    "utilization_ratio": _ratio(classification.utilization_ratio),
                },
            })
        records.append(record)
    doc = {"schema_version": SCHEMA_VERSION, "points": records}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def emit_pv_split_csv(reports: Iterable[ScenarioReport]) -> str:
    """Generation-split table: fractions per destination plus absolute kWh."""
    out = io.StringIO()
    out.write(f"# schema_version={SCHEMA_VERSION}\n")
    out.write("scenario,self_fraction,local_share_fraction,pv2ev_fraction,export_fraction,"
              "self_kwh,local_share_kwh,pv2ev_kwh,export_kwh,generation_kwh\n")
    for report in reports:
        split = report.metrics.pv_split
        kwh = report.metrics.pv_split_kwh
        if split is None:
            fractions = ["", "", "", ""]
        else:
            fractions = [f"{split[key]:.4f}" for key in ("self", "local_share", "pv2ev", "export")]
        absolutes = [f"{kwh[key]:.1f}" for key in ("self", "local_share", "pv2ev", "export")]
        generation = f"{report.annual_energy_kwh['generation']:.1f}"
        out.write(",".join([report.label] + fractions + absolutes + [generation]) + "\n")
    return out.getvalue()


def emit_trace_csv(bundle: ProfileBundle, lec: LecYearFlows,
                   c2v: C2vYearFlows | None = None) -> str:
    """Hour-by-hour community totals for plotting and inspection."""
    stamps = bundle.axis.timestamps()
    load = bundle.load_matrix().sum(axis=0)
    pv = bundle.pv_matrix().sum(axis=0)
    self_kw = lec.self_kw.sum(axis=0)
    household_import = lec.grid_import_kw.sum(axis=0)
    out = io.StringIO()
    out.write(f"# schema_version={SCHEMA_VERSION}\n")
    out.write("hour,timestamp,load_kw,pv_kw,self_kw,loc_kw,surplus_after_kw,"
              "pv2ev_kw,grid2ev_kw,export_kw,household_import_kw,community_import_kw\n")
    for t in range(bundle.axis.steps):
        if c2v is None:
            pv2ev = 0.0
            grid2ev = 0.0
            export = float(lec.surplus_after_sharing_kw[t])
        else:
            pv2ev = float(c2v.pv2ev_kw[t])
            grid2ev = float(c2v.grid2ev_kw[t])
            export = float(c2v.export_kw[t])
        cells = [
            str(t),
            stamps[t].isoformat(),
            f"{load[t]:.3f}",
            f"{pv[t]:.3f}",
            f"{self_kw[t]:.3f}",
            f"{lec.loc_kw[t]:.3f}",
            f"{lec.surplus_after_sharing_kw[t]:.3f}",
            f"{pv2ev:.3f}",
            f"{grid2ev:.3f}",
            f"{export:.3f}",
            f"{household_import[t]:.3f}",
            f"{household_import[t] + grid2ev:.3f}",
        ]
        out.write(",".join(cells) + "\n")
    return out.getvalue()
