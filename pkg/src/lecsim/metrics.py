"""Annual evaluation metrics over settled flows.

M1 local PV absorption ratio, M2 grid-connection peaks, M3 EV-user charging
savings against the public price, M4 the infrastructure revenue account, and
M5 the per-household revenue uplift from redirected surplus, plus the
generation split (self / shared / EV / export) used for reporting.

All annual sums use compensated summation, and values stay full precision
here; rounding is the report layer's job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .c2v import C2vYearFlows, RevenueAccount, revenue_year
from .domain import ChargerSpec, EvDemandSeries, PriceSet, validate_price_set
from .ingestion import ProfileBundle
from .settlement import LecYearFlows

__all__ = [
    "MetricsReport",
    "annual_kwh",
    "m1_absorption",
    "m2_peaks",
    "m3_ev_savings",
    "m5_household_delta",
    "pv_split_kwh",
    "compute_metrics",
]

PV_SPLIT_CATEGORIES = ("self", "local_share", "pv2ev", "export")


@dataclass(frozen=True)
class MetricsReport:
    """The five headline metrics plus the generation split.

    ``m1_absorption_ratio`` and ``pv_split`` are None for a community with
    no PV generation at all (the ratio is undefined, not zero).
    """

    m1_absorption_ratio: float | None
    m2_peak_import_kw: float
    m2_peak_export_kw: float
    m3_ev_savings_chf: float
    m4_revenue: RevenueAccount
    m5_per_household_chf: dict[str, float]
    pv_split: dict[str, float] | None
    pv_split_kwh: dict[str, float]


def annual_kwh(series_kw, dt_hours: float) -> float:
    """Compensated sum of an hourly kW series, in kWh."""
    return math.fsum(np.asarray(series_kw, dtype=float)) * dt_hours


def pv_split_kwh(lec: LecYearFlows, c2v: C2vYearFlows | None, dt_hours: float) -> dict[str, float]:
    """Annual generation by destination: self, local_share, pv2ev, export."""
    self_kwh = annual_kwh(lec.self_kw.sum(axis=0), dt_hours)
    loc_kwh = annual_kwh(lec.loc_kw, dt_hours)
    if c2v is None:
        pv2ev_kwh = 0.0
        export_kwh = annual_kwh(lec.surplus_after_sharing_kw, dt_hours)
    else:
        pv2ev_kwh = annual_kwh(c2v.pv2ev_kw, dt_hours)
        export_kwh = annual_kwh(c2v.export_kw, dt_hours)
    return {"self": self_kwh, "local_share": loc_kwh, "pv2ev": pv2ev_kwh, "export": export_kwh}


def m1_absorption(lec: LecYearFlows, c2v: C2vYearFlows | None = None,
                  dt_hours: float = 1.0) -> float | None:
    """Fraction of generation absorbed inside the community.

    Self-consumption plus member sharing plus PV-to-EV, over total
    generation (reconstructed from the hourly identity gen = self + shared
    + post-sharing surplus).  None when there is no generation.
    """
    split = pv_split_kwh(lec, c2v, dt_hours)
    generation = split["self"] + split["local_share"] + split["pv2ev"] + split["export"]
    if generation <= 0.0:
        return None
    return (split["self"] + split["local_share"] + split["pv2ev"]) / generation


def m2_peaks(lec: LecYearFlows, c2v: C2vYearFlows | None = None) -> tuple[float, float]:
    """Peak community grid import and export over the horizon (kW).

    Grid-to-EV counts toward import because coordinated charging is supplied
    through the community meter; in the baseline, EV charging happens at an
    external operator and stays outside the boundary.
    """
    household_import = lec.grid_import_kw.sum(axis=0)
    if c2v is None:
        import_kw = household_import
        export_kw = lec.surplus_after_sharing_kw
    else:
        import_kw = household_import + c2v.grid2ev_kw
        export_kw = c2v.export_kw
    return float(import_kw.max()), float(export_kw.max())


def m3_ev_savings(ev_demand: EvDemandSeries | np.ndarray, prices: PriceSet,
                  dt_hours: float) -> float:
    """What EV users save per year by paying the community price instead of
    the public one, on the same demand (no elasticity assumed)."""
    problem = validate_price_set(prices)
    if problem is not None:
        raise ValueError(f"invalid price set: {problem}")
    demand = ev_demand.demand if isinstance(ev_demand, EvDemandSeries) else ev_demand
    return (prices.public - prices.ev) * annual_kwh(demand, dt_hours)


def m5_household_delta(pv2ev_kwh_by_household: Mapping[str, float],
                       prices: PriceSet) -> dict[str, float]:
    """Extra annual revenue per household from surplus redirected to EV
    charging: it earns the local price instead of the feed-in tariff."""
    margin = prices.loc - prices.sell
    return {hid: margin * kwh for hid, kwh in pv2ev_kwh_by_household.items()}


def compute_metrics(
    bundle: ProfileBundle,
    prices: PriceSet,
    lec: LecYearFlows,
    c2v: C2vYearFlows | None = None,
    chargers: ChargerSpec | None = None,
) -> MetricsReport:
    """Assemble the full metric suite for one scenario run.

    Pass ``c2v`` only for coordinated runs; the baseline gets zero savings,
    a zero account, and zero per-household deltas.  Served EV demand is
    reconstructed from the dispatched flows (pv2ev + grid2ev), so demand a
    zero-port community never served does not count as savings.
    """
    dt = bundle.axis.dt_hours
    capex = chargers.capex_chf if chargers is not None else 0.0

    if c2v is not None:
        m3 = m3_ev_savings(c2v.pv2ev_kw + c2v.grid2ev_kw, prices, dt)
        m4 = revenue_year(c2v, prices, dt, capex)
        contrib_kwh = {hid: annual_kwh(c2v.pv2ev_contrib_kw[i], dt)
                       for i, hid in enumerate(bundle.household_ids)}
    else:
        m3 = 0.0
        m4 = RevenueAccount.zero(capex)
        contrib_kwh = {hid: 0.0 for hid in bundle.household_ids}

    split_kwh = pv_split_kwh(lec, c2v, dt)
    generation = math.fsum(split_kwh.values())
    split = None
    if generation > 0.0:
        split = {key: kwh / generation for key, kwh in split_kwh.items()}
    peak_import, peak_export = m2_peaks(lec, c2v)

    return MetricsReport(
        m1_absorption_ratio=m1_absorption(lec, c2v, dt),
        m2_peak_import_kw=peak_import,
        m2_peak_export_kw=peak_export,
        m3_ev_savings_chf=m3,
        m4_revenue=m4,
        m5_per_household_chf=m5_household_delta(contrib_kwh, prices),
        pv_split=split,
        pv_split_kwh=split_kwh,
    )
