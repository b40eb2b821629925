"""Community settlement under institutional separation (scenario S1).

Each hour every household first covers its own demand from its own PV; the
pooled remaining surplus is then shared among members with unmet demand
(received pro rata by unmet demand, attributed to sellers pro rata by
surplus contribution), and the residuals exchange with the grid.  Annual statements
price these flows: internal sales earn the local sharing price, internal
purchases pay it plus the reduced network fee (configurable), grid exchange
settles at the retail and feed-in tariffs.

Flows are computed in kW and converted to kWh only at statement aggregation;
hourly flows never depend on any price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import PriceSet, validate_price_set
from .ingestion import ProfileBundle

__all__ = [
    "HourlyLecFlows",
    "LecYearFlows",
    "MemberStatement",
    "settle_hour",
    "settle_flows",
    "settle_year_s1",
    "member_statements",
]


@dataclass(frozen=True)
class HourlyLecFlows:
    """One hour of settlement; per-household arrays follow the input order (kW)."""

    self_kw: np.ndarray
    surplus_contrib_kw: np.ndarray
    local_recv_kw: np.ndarray
    local_sold_kw: np.ndarray
    grid_import_kw: np.ndarray
    loc_kw: float
    surplus_after_sharing_kw: float
    export_kw: float


@dataclass(frozen=True)
class LecYearFlows:
    """Settlement flows over the whole horizon.

    Per-household quantities are (n_households, steps) arrays; community
    totals are (steps,) arrays.  ``export_kw`` is the surplus leaving the
    community *before* any downstream EV dispatch re-captures part of it.
    """

    self_kw: np.ndarray
    surplus_contrib_kw: np.ndarray
    local_recv_kw: np.ndarray
    local_sold_kw: np.ndarray
    grid_import_kw: np.ndarray
    loc_kw: np.ndarray
    surplus_after_sharing_kw: np.ndarray

    @property
    def export_kw(self) -> np.ndarray:
        return self.surplus_after_sharing_kw

    @property
    def n_households(self) -> int:
        return self.self_kw.shape[0]

    @property
    def steps(self) -> int:
        return self.self_kw.shape[1]

    def hour(self, t: int) -> HourlyLecFlows:
        return HourlyLecFlows(
            self_kw=self.self_kw[:, t],
            surplus_contrib_kw=self.surplus_contrib_kw[:, t],
            local_recv_kw=self.local_recv_kw[:, t],
            local_sold_kw=self.local_sold_kw[:, t],
            grid_import_kw=self.grid_import_kw[:, t],
            loc_kw=float(self.loc_kw[t]),
            surplus_after_sharing_kw=float(self.surplus_after_sharing_kw[t]),
            export_kw=float(self.surplus_after_sharing_kw[t]),
        )


@dataclass(frozen=True)
class MemberStatement:
    """Annual energy ledger (kWh) and cash position (CHF) for one member."""

    household_id: str
    self_consumed_kwh: float
    local_sold_kwh: float
    local_bought_kwh: float
    grid_import_kwh: float
    grid_export_kwh: float
    local_sales_revenue_chf: float
    export_revenue_chf: float
    local_purchase_cost_chf: float
    grid_purchase_cost_chf: float
    net_cost_chf: float


def _split(load: np.ndarray, pv: np.ndarray) -> tuple[np.ndarray, ...]:
    """Vectorized settlement over (n_households, steps) matrices.

    The allocation fraction is exactly 1.0 whenever the pool is fully
    absorbed (min of two sums picked the divisor), so the zero cases
    S<=U and U<=S both come out exact with no 0/0 anywhere.
    """
    self_kw = np.minimum(load, pv)
    surplus = pv - self_kw
    unmet = load - self_kw
    pooled_surplus = surplus.sum(axis=0)
    pooled_unmet = unmet.sum(axis=0)
    loc = np.minimum(pooled_surplus, pooled_unmet)
    recv_frac = np.divide(loc, pooled_unmet, out=np.zeros_like(loc), where=pooled_unmet > 0.0)
    sold_frac = np.divide(loc, pooled_surplus, out=np.zeros_like(loc), where=pooled_surplus > 0.0)
    local_recv = unmet * recv_frac
    local_sold = surplus * sold_frac
    grid_import = unmet - local_recv
    surplus_after = pooled_surplus - loc
    return self_kw, surplus, local_recv, local_sold, grid_import, loc, surplus_after


def settle_hour(loads: Sequence[float], pvs: Sequence[float]) -> HourlyLecFlows:
    """Settle a single hour for per-household demand and PV (kW each).

    Prices play no role here: the sharing rule is purely physical, and the
    same arithmetic drives the vectorized yearly run.
    """
    load = np.asarray(loads, dtype=float)
    pv = np.asarray(pvs, dtype=float)
    if load.shape != pv.shape or load.ndim != 1:
        raise ValueError("loads and pvs must be 1-D and of equal length")
    if (load < 0).any() or (pv < 0).any():
        raise ValueError("negative input")
    s, sur, recv, sold, imp, loc, after = _split(load[:, None], pv[:, None])
    return HourlyLecFlows(
        self_kw=s[:, 0],
        surplus_contrib_kw=sur[:, 0],
        local_recv_kw=recv[:, 0],
        local_sold_kw=sold[:, 0],
        grid_import_kw=imp[:, 0],
        loc_kw=float(loc[0]),
        surplus_after_sharing_kw=float(after[0]),
        export_kw=float(after[0]),
    )


def settle_flows(bundle: ProfileBundle) -> LecYearFlows:
    """Hourly settlement flows for the whole horizon (price-free)."""
    return LecYearFlows(*_split(bundle.load_matrix(), bundle.pv_matrix()))


def member_statements(bundle: ProfileBundle, flows: LecYearFlows, prices: PriceSet,
                      pv2ev_contrib_kw: np.ndarray | None = None,
                      local_fee_on_top: bool = True) -> list[MemberStatement]:
    """Aggregate hourly flows into annual per-member statements.

    ``pv2ev_contrib_kw`` (n_households, steps), when given, is surplus
    redirected to EV charging.  It is credited at the local sharing price
    exactly like member sharing, so between scenarios only the split of a
    prosumer's surplus between "sold locally" and "exported" changes.

    Annual sums use compensated summation (math.fsum).
    """
    dt = bundle.axis.dt_hours
    if pv2ev_contrib_kw is None:
        pv2ev_contrib_kw = np.zeros_like(flows.surplus_contrib_kw)
    buyer_price = prices.local_buyer_price(local_fee_on_top)

    statements = []
    for i, hid in enumerate(bundle.household_ids):
        sold_kw = flows.local_sold_kw[i] + pv2ev_contrib_kw[i]
        # clamp shields against -1e-18 residue from the pro-rata division
        export_kw = np.maximum(flows.surplus_contrib_kw[i] - sold_kw, 0.0)
        self_kwh = math.fsum(flows.self_kw[i]) * dt
        sold_kwh = math.fsum(sold_kw) * dt
        bought_kwh = math.fsum(flows.local_recv_kw[i]) * dt
        import_kwh = math.fsum(flows.grid_import_kw[i]) * dt
        export_kwh = math.fsum(export_kw) * dt

        sales = prices.loc * sold_kwh
        export_rev = prices.sell * export_kwh
        local_cost = buyer_price * bought_kwh
        grid_cost = prices.buy * import_kwh
        statements.append(MemberStatement(
            household_id=hid,
            self_consumed_kwh=self_kwh,
            local_sold_kwh=sold_kwh,
            local_bought_kwh=bought_kwh,
            grid_import_kwh=import_kwh,
            grid_export_kwh=export_kwh,
            local_sales_revenue_chf=sales,
            export_revenue_chf=export_rev,
            local_purchase_cost_chf=local_cost,
            grid_purchase_cost_chf=grid_cost,
            net_cost_chf=grid_cost + local_cost - sales - export_rev,
        ))
    return statements


def settle_year_s1(bundle: ProfileBundle, prices: PriceSet,
                   local_fee_on_top: bool = True) -> tuple[LecYearFlows, list[MemberStatement]]:
    """Baseline settlement over the whole horizon.

    All post-sharing surplus is exported at the feed-in tariff; EV charging,
    if any exists in the neighbourhood, happens outside the community meter.
    """
    problem = validate_price_set(prices)
    if problem is not None:
        raise ValueError(f"invalid price set: {problem}")
    flows = settle_flows(bundle)
    statements = member_statements(bundle, flows, prices, local_fee_on_top=local_fee_on_top)
    return flows, statements
