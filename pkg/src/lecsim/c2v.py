"""Community-operated EV charging on top of member settlement (scenario S2).

Each hour the surplus left after internal sharing is routed to the community
charging points before export, capped by the combined port rating; demand the
surplus cannot cover passes through from the grid.  EV users pay one price
regardless of source.  The operator's infrastructure account earns the spread
over the PV-sourced cost (local price plus reduced network fee) on the first
flow and over the retail tariff on the second.  Prosumers are credited the
local sharing price for redirected surplus, pro rata by contribution, so
their settlement does not depend on where the operator sends the energy.

Dispatch is greedy per hour with no lookahead; the rule above determines it
completely.  Flows never depend on the EV price; it only moves money.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import ChargerSpec, EvDemandSeries, PriceSet, align_series, validate_price_set
from .ingestion import ProfileBundle
from .settlement import LecYearFlows, MemberStatement, member_statements, settle_flows

__all__ = [
    "HourlyC2vFlows",
    "C2vYearFlows",
    "RevenueAccount",
    "dispatch_hour",
    "dispatch_series",
    "attribute_pv2ev",
    "revenue_year",
    "settle_year_s2",
]

logger = logging.getLogger(__name__)

_ATTRIBUTION_SLACK = 1e-9  # relative tolerance for pv2ev vs pooled surplus


@dataclass(frozen=True)
class HourlyC2vFlows:
    """One hour of charging dispatch (kW)."""

    pv2ev_kw: float
    grid2ev_kw: float
    export_kw: float
    pv2ev_contrib_kw: np.ndarray


@dataclass(frozen=True)
class C2vYearFlows:
    """Charging dispatch over the whole horizon.

    ``pv2ev_contrib_kw`` is (n_households, steps) with zero rows for
    households that never hold surplus; the community series are (steps,).
    """

    pv2ev_kw: np.ndarray
    grid2ev_kw: np.ndarray
    export_kw: np.ndarray
    pv2ev_contrib_kw: np.ndarray

    def hour(self, t: int) -> HourlyC2vFlows:
        return HourlyC2vFlows(
            pv2ev_kw=float(self.pv2ev_kw[t]),
            grid2ev_kw=float(self.grid2ev_kw[t]),
            export_kw=float(self.export_kw[t]),
            pv2ev_contrib_kw=self.pv2ev_contrib_kw[:, t],
        )


@dataclass(frozen=True)
class RevenueAccount:
    """Annual infrastructure account (CHF/yr).

    ``surplus_component_chf`` is the premium earned on PV-sourced charging,
    ``passthrough_component_chf`` the margin on grid-sourced charging.
    Components can be negative (the account is diagnostic, nothing is
    clamped).  ``payback_years`` is plain undiscounted capex/total, infinite
    when the account earns nothing.
    """

    surplus_component_chf: float
    passthrough_component_chf: float
    total_chf: float
    payback_years: float

    @classmethod
    def from_components(cls, surplus_chf: float, passthrough_chf: float,
                        capex_chf: float = 0.0) -> "RevenueAccount":
        total = surplus_chf + passthrough_chf
        payback = capex_chf / total if total > 0 else math.inf
        return cls(surplus_component_chf=surplus_chf, passthrough_component_chf=passthrough_chf,
                   total_chf=total, payback_years=payback)

    @classmethod
    def zero(cls, capex_chf: float = 0.0) -> "RevenueAccount":
        return cls.from_components(0.0, 0.0, capex_chf)


def dispatch_hour(surplus_kw: float, ev_demand_kw: float,
                  chargers: ChargerSpec) -> tuple[float, float, float]:
    """Greedy one-hour split of surplus and EV demand.

    Returns (pv2ev, grid2ev, export): the PV share is min(surplus, demand,
    combined port rating); the rest of the demand is grid pass-through and
    the rest of the surplus is exported.  The port cap binds only the PV
    share; demand above the rating is still served (from the grid), never
    silently clipped.
    """
    if surplus_kw < 0 or ev_demand_kw < 0:
        raise ValueError("negative input")
    pv2ev = min(surplus_kw, ev_demand_kw, chargers.cap_kw)
    return pv2ev, ev_demand_kw - pv2ev, surplus_kw - pv2ev


def dispatch_series(surplus_kw: np.ndarray, ev_demand_kw: np.ndarray,
                    chargers: ChargerSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`dispatch_hour` over aligned (steps,) series."""
    surplus = np.asarray(surplus_kw, dtype=float)
    demand = np.asarray(ev_demand_kw, dtype=float)
    if surplus.shape != demand.shape:
        raise ValueError("surplus and demand series must have equal length")
    if chargers.n_cp > 0:
        over = int((demand > chargers.cap_kw).sum())
        if over:
            logger.warning(
                "EV demand exceeds the combined %s rating (%.3g kW) in %d hour(s); "
                "the excess is served from the grid",
                chargers.label, chargers.cap_kw, over)
    pv2ev = np.minimum(np.minimum(surplus, demand), chargers.cap_kw)
    return pv2ev, demand - pv2ev, surplus - pv2ev


def attribute_pv2ev(pv2ev_kw: float, prosumer_surpluses: Sequence[float]) -> np.ndarray:
    """Split one hour's PV-to-EV energy across contributors pro rata by surplus.

    Returns the zero vector when nobody holds surplus.  PV-to-EV exceeding
    the pooled surplus is an internal consistency fault, not an input error.
    """
    surpluses = np.asarray(prosumer_surpluses, dtype=float)
    if pv2ev_kw < 0 or (surpluses < 0).any():
        raise ValueError("negative input")
    total = float(surpluses.sum())
    if pv2ev_kw > total * (1.0 + _ATTRIBUTION_SLACK) + 1e-12:
        raise ValueError(f"pv2ev {pv2ev_kw} kW exceeds pooled surplus {total} kW")
    if total <= 0.0:
        return np.zeros_like(surpluses)
    return surpluses * (pv2ev_kw / total)


def _attribute_series(pv2ev_kw: np.ndarray, remaining_surplus_kw: np.ndarray) -> np.ndarray:
    """Vectorized attribution over (steps,) pv2ev and (n, steps) surpluses."""
    total = remaining_surplus_kw.sum(axis=0)
    if (pv2ev_kw > total * (1.0 + _ATTRIBUTION_SLACK) + 1e-12).any():
        raise ValueError("pv2ev exceeds pooled surplus in at least one hour")
    frac = np.divide(pv2ev_kw, total, out=np.zeros_like(pv2ev_kw), where=total > 0.0)
    return remaining_surplus_kw * frac


def revenue_year(flows: C2vYearFlows, prices: PriceSet, dt_hours: float,
                 capex_chf: float = 0.0) -> RevenueAccount:
    """Annual infrastructure account from dispatched flows.

    PV-sourced kWh earn the EV price minus the local price minus the reduced
    network fee; grid-sourced kWh earn the EV price minus the retail tariff.
    """
    problem = validate_price_set(prices)
    if problem is not None:
        raise ValueError(f"invalid price set: {problem}")
    pv2ev_kwh = math.fsum(flows.pv2ev_kw) * dt_hours
    grid2ev_kwh = math.fsum(flows.grid2ev_kw) * dt_hours
    surplus_margin = prices.ev - prices.loc - (1.0 - prices.gamma) * prices.network_fee
    return RevenueAccount.from_components(
        surplus_chf=surplus_margin * pv2ev_kwh,
        passthrough_chf=(prices.ev - prices.buy) * grid2ev_kwh,
        capex_chf=capex_chf,
    )


def settle_year_s2(
    bundle: ProfileBundle,
    prices: PriceSet,
    chargers: ChargerSpec,
    ev_demand: EvDemandSeries,
    local_fee_on_top: bool = True,
) -> tuple[LecYearFlows, C2vYearFlows, list[MemberStatement], RevenueAccount]:
    """Coordinated run: settlement, then dispatch, attribution, and the account.

    With ``chargers.n_cp == 0`` every output is identical to the baseline
    and the account is exactly zero.
    """
    problem = validate_price_set(prices)
    if problem is not None:
        raise ValueError(f"invalid price set: {problem}")
    problem = align_series(bundle.axis, {"ev_demand": ev_demand.demand})
    if problem is not None:
        raise ValueError(problem)

    # no charging points: nothing can be served through the community meter,
    # so demand stays with the outside operator and the run equals baseline
    served = ev_demand.demand
    if chargers.n_cp == 0:
        if served.any():
            logger.info("no community charging points; EV demand stays outside the community")
        served = np.zeros_like(served)

    lec = settle_flows(bundle)
    pv2ev, grid2ev, export = dispatch_series(lec.surplus_after_sharing_kw, served, chargers)
    remaining = lec.surplus_contrib_kw - lec.local_sold_kw
    contrib = _attribute_series(pv2ev, remaining)
    c2v = C2vYearFlows(pv2ev_kw=pv2ev, grid2ev_kw=grid2ev, export_kw=export,
                       pv2ev_contrib_kw=contrib)
    statements = member_statements(bundle, lec, prices, pv2ev_contrib_kw=contrib,
                                   local_fee_on_top=local_fee_on_top)
    revenue = revenue_year(c2v, prices, bundle.axis.dt_hours, chargers.capex_chf)
    return lec, c2v, statements, revenue
