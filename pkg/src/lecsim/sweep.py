"""Scenario orchestration: S1/S2 comparison, EV-price sweeps, classification.

Hourly flows never depend on the EV price, so a sweep simulates each
(demand scenario, charger option) pair once and reprices the revenue and
savings per grid point in O(1).  Points whose price would break the tariff
ordering are marked infeasible and never evaluated.  Output order is fixed
by the (scenario, price, charger) sort key regardless of execution order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .c2v import RevenueAccount, settle_year_s2
from .domain import ChargerSpec, EvDemandSeries, PriceSet, validate_price_set
from .ingestion import ProfileBundle
from .metrics import annual_kwh
from .report import ScenarioReport, build_scenario_report
from .settlement import settle_year_s1

__all__ = [
    "DEFAULT_CLASS_THRESHOLDS",
    "ScenarioClass",
    "classify_scenario",
    "SweepSpec",
    "SweepPoint",
    "run_sweep",
    "ScenarioComparison",
    "compare_s1_s2",
]

DEFAULT_CLASS_THRESHOLDS = (1.0 / 3.0, 2.0 / 3.0)


@dataclass(frozen=True)
class ScenarioClass:
    """How much of the shareable surplus the chargers absorb annually."""

    label: str  # "Low" | "Medium" | "High"
    utilization_ratio: float


def classify_scenario(annual_pv2ev_kwh: float, annual_surplus_kwh: float,
                      thresholds: tuple[float, float] = DEFAULT_CLASS_THRESHOLDS,
                      ) -> ScenarioClass | None:
    """Bucket a run by its surplus-to-EV utilization ratio.

    ``thresholds`` are the Low/Medium and Medium/High boundaries.  Returns
    None when there is no surplus to classify against.
    """
    low_max, med_max = thresholds
    if not 0.0 < low_max < med_max < 1.0:
        raise ValueError(f"thresholds must satisfy 0 < low < high < 1, got {thresholds}")
    if annual_surplus_kwh <= 0.0:
        return None
    ratio = min(annual_pv2ev_kwh / annual_surplus_kwh, 1.0)
    if ratio <= low_max:
        label = "Low"
    elif ratio <= med_max:
        label = "Medium"
    else:
        label = "High"
    return ScenarioClass(label=label, utilization_ratio=ratio)


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition: EV price range x demand scenarios x charger options."""

    ev_price_range: tuple[float, float, float]  # (min, max, step), CHF/kWh
    scenarios: Sequence[tuple[str, EvDemandSeries]]
    charger_options: Sequence[ChargerSpec]

    def __post_init__(self) -> None:
        lo, hi, step = self.ev_price_range
        if not lo < hi:
            raise ValueError(f"price range needs min < max, got {lo} .. {hi}")
        if not step > 0:
            raise ValueError(f"price step must be > 0, got {step}")
        if not self.scenarios:
            raise ValueError("at least one demand scenario is required")
        if not self.charger_options:
            raise ValueError("at least one charger option is required")
        labels = [label for label, _ in self.scenarios]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate scenario labels")

    def price_points(self) -> list[float]:
        """min, min+step, ... up to and including max (within fp slack)."""
        lo, hi, step = self.ev_price_range
        points = []
        k = 0
        while True:
            price = lo + k * step
            if price > hi + 1e-9:
                break
            points.append(round(price, 10))
            k += 1
        return points


@dataclass(frozen=True)
class SweepPoint:
    """One grid cell; ``report`` is None when the price point is infeasible."""

    scenario: str
    ev_price: float
    charger_label: str
    feasible: bool
    report: ScenarioReport | None


def _reprice(report: ScenarioReport, prices: PriceSet) -> ScenarioReport:
    """Same flows, new EV price: only savings and the account change."""
    energy = report.annual_energy_kwh
    surplus_margin = prices.ev - prices.loc - (1.0 - prices.gamma) * prices.network_fee
    m4 = RevenueAccount.from_components(
        surplus_chf=surplus_margin * energy["pv2ev"],
        passthrough_chf=(prices.ev - prices.buy) * energy["grid2ev"],
        capex_chf=report.chargers.capex_chf if report.chargers is not None else 0.0,
    )
    m3 = (prices.public - prices.ev) * energy["ev_demand"]
    metrics = replace(report.metrics, m3_ev_savings_chf=m3, m4_revenue=m4)
    return replace(report, prices=prices, metrics=metrics)


def _simulate_base(bundle: ProfileBundle, prices: PriceSet, label: str,
                   ev_series: EvDemandSeries, chargers: ChargerSpec,
                   thresholds: tuple[float, float],
                   local_fee_on_top: bool) -> ScenarioReport:
    lec, c2v, statements, _ = settle_year_s2(bundle, prices, chargers, ev_series,
                                             local_fee_on_top=local_fee_on_top)
    dt = bundle.axis.dt_hours
    classification = classify_scenario(
        annual_kwh(c2v.pv2ev_kw, dt),
        annual_kwh(lec.surplus_after_sharing_kw, dt),
        thresholds,
    )
    return build_scenario_report(
        label=label, mode="s2", bundle=bundle, prices=prices, lec=lec,
        statements=statements, c2v=c2v, chargers=chargers,
        classification=classification,
    )


def run_sweep(bundle: ProfileBundle, base_prices: PriceSet, spec: SweepSpec,
              thresholds: tuple[float, float] = DEFAULT_CLASS_THRESHOLDS,
              local_fee_on_top: bool = True, jobs: int = 1) -> list[SweepPoint]:
    """Evaluate the whole grid; one simulation per (scenario, charger) pair.

    The base price set must itself be valid; it anchors the flows that all
    repriced points share.  Returns points sorted by (scenario, price,
    charger label).
    """
    problem = validate_price_set(base_prices)
    if problem is not None:
        raise ValueError(f"invalid base price set: {problem}")
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")

    combos = [(label, series, chargers)
              for label, series in spec.scenarios
              for chargers in spec.charger_options]

    def base_for(combo):
        label, series, chargers = combo
        return _simulate_base(bundle, base_prices, label, series, chargers,
                              thresholds, local_fee_on_top)

    if jobs == 1 or len(combos) == 1:
        base_reports = [base_for(combo) for combo in combos]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            base_reports = list(pool.map(base_for, combos))

    points = []
    for (label, _series, chargers), base_report in zip(combos, base_reports):
        for price in spec.price_points():
            candidate = replace(base_prices, ev=price)
            if validate_price_set(candidate) is not None:
                points.append(SweepPoint(scenario=label, ev_price=price,
                                         charger_label=chargers.label,
                                         feasible=False, report=None))
            else:
                points.append(SweepPoint(scenario=label, ev_price=price,
                                         charger_label=chargers.label,
                                         feasible=True,
                                         report=_reprice(base_report, candidate)))
    points.sort(key=lambda p: (p.scenario, p.ev_price, p.charger_label))
    return points


@dataclass(frozen=True)
class ScenarioComparison:
    """Paired baseline/coordinated reports with per-metric deltas (S2 - S1)."""

    s1: ScenarioReport
    s2: ScenarioReport
    absorption_gain: float | None
    peak_import_delta_kw: float
    peak_export_delta_kw: float
    revenue_delta_chf: float
    savings_delta_chf: float
    m5_delta_chf: dict[str, float]


def compare_s1_s2(bundle: ProfileBundle, prices: PriceSet, chargers: ChargerSpec,
                  ev_demand: EvDemandSeries,
                  thresholds: tuple[float, float] = DEFAULT_CLASS_THRESHOLDS,
                  local_fee_on_top: bool = True) -> ScenarioComparison:
    """Run both regimes on identical inputs and report the differences."""
    lec1, statements1 = settle_year_s1(bundle, prices, local_fee_on_top=local_fee_on_top)
    s1 = build_scenario_report(label="s1", mode="s1", bundle=bundle, prices=prices,
                               lec=lec1, statements=statements1)
    s2 = _simulate_base(bundle, prices, "s2", ev_demand, chargers, thresholds,
                        local_fee_on_top)

    m1_s1 = s1.metrics.m1_absorption_ratio
    m1_s2 = s2.metrics.m1_absorption_ratio
    gain = None if (m1_s1 is None or m1_s2 is None) else m1_s2 - m1_s1
    m5_delta = {
        hid: s2.metrics.m5_per_household_chf[hid] - s1.metrics.m5_per_household_chf[hid]
        for hid in s1.metrics.m5_per_household_chf
    }
    return ScenarioComparison(
        s1=s1,
        s2=s2,
        absorption_gain=gain,
        peak_import_delta_kw=s2.metrics.m2_peak_import_kw - s1.metrics.m2_peak_import_kw,
        peak_export_delta_kw=s2.metrics.m2_peak_export_kw - s1.metrics.m2_peak_export_kw,
        revenue_delta_chf=s2.metrics.m4_revenue.total_chf - s1.metrics.m4_revenue.total_chf,
        savings_delta_chf=s2.metrics.m3_ev_savings_chf - s1.metrics.m3_ev_savings_chf,
        m5_delta_chf=m5_delta,
    )
