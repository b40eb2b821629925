"""Core value types shared across the simulator.

Time axis, tariff set with its strict price ordering, per-household
load/PV series, charger hardware, and aggregate EV charging demand.
Everything here is an immutable value: construction copies input data and
marks arrays read-only, so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "HOURS_PER_YEAR",
    "TimeAxis",
    "PriceSet",
    "HouseholdSeries",
    "ChargerSpec",
    "EvDemandSeries",
    "validate_price_set",
    "align_series",
    "as_series",
]

HOURS_PER_YEAR = 8760


def as_series(values, name: str = "series") -> np.ndarray:
    """Copy ``values`` into a read-only 1-D float array, rejecting NaN/negatives."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size:
        if not np.isfinite(arr).all():
            t = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValueError(f"{name}[{t}] is not finite")
        if arr.min() < 0.0:
            t = int(arr.argmin())
            raise ValueError(f"{name}[{t}] is negative ({arr[t]})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeAxis:
    """Simulation horizon: ``steps`` intervals of ``dt_hours`` from ``start``.

    Every series in one run must carry exactly ``steps`` values; energy per
    interval is power times ``dt_hours``.  Timestamps are labels only; the
    row index is authoritative.
    """

    start: datetime
    steps: int
    dt_hours: float = 1.0

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.dt_hours > 0:
            raise ValueError(f"dt_hours must be > 0, got {self.dt_hours}")

    @property
    def total_hours(self) -> float:
        return self.steps * self.dt_hours

    def timestamps(self) -> list[datetime]:
        step = timedelta(hours=self.dt_hours)
        return [self.start + i * step for i in range(self.steps)]

    @classmethod
    def year(cls, year: int, dt_hours: float = 1.0) -> "TimeAxis":
        """A standard 8760-hour year starting January 1 (leap days ignored)."""
        return cls(start=datetime(year, 1, 1), steps=int(round(HOURS_PER_YEAR / dt_hours)),
                   dt_hours=dt_hours)


@dataclass(frozen=True)
class PriceSet:
    """Flat tariffs in CHF/kWh plus the network-fee reduction factor.

    ``sell``  feed-in tariff for exported PV
    ``loc``   internal sharing price prosumers receive for surplus used locally
    ``buy``   grid retail tariff (network fee included)
    ``ev``    community charging price paid by EV users
    ``public`` commercial public-charging price
    ``network_fee`` volumetric network usage fee
    ``gamma`` fraction by which the network fee is reduced for shared energy

    A usable set must satisfy the strict ordering
    ``sell < loc < buy < ev < public``.  Construction does not enforce it so
    candidate sets (for example sweep points) can be inspected: call
    :func:`validate_price_set`.  ``gamma`` has no regulatory default and is
    therefore a required argument everywhere.
    """

    sell: float
    loc: float
    buy: float
    ev: float
    public: float
    network_fee: float
    gamma: float

    def local_buyer_price(self, fee_on_top: bool = True) -> float:
        """Price a member pays per locally shared kWh: the internal price
        plus, unless disabled, the reduced network fee."""
        if fee_on_top:
            return self.loc + (1.0 - self.gamma) * self.network_fee
        return self.loc


_LADDER = (("sell", "loc"), ("loc", "buy"), ("buy", "ev"), ("ev", "public"))


def validate_price_set(prices: PriceSet) -> str | None:
    """Check tariff sanity; return None when valid, else the first violation.

    Violations are ordinary return values, not exceptions: the same check
    marks individual sweep points infeasible instead of aborting a sweep.
    """
    for name in ("sell", "loc", "buy", "ev", "public", "network_fee"):
        value = getattr(prices, name)
        if not value >= 0.0:
            return f"{name} must be nonnegative, got {value}"
    if not 0.0 <= prices.gamma <= 1.0:
        return f"gamma must be in [0, 1], got {prices.gamma}"
    for lo, hi in _LADDER:
        if not getattr(prices, lo) < getattr(prices, hi):
            return f"{lo} < {hi} fails ({getattr(prices, lo)} vs {getattr(prices, hi)})"
    return None


@dataclass(frozen=True)
class HouseholdSeries:
    """One household's hourly demand and PV generation.

    Values are average kW per interval; ``pv_gen`` is all-zero for
    households without PV.
    """

    household_id: str
    load: np.ndarray
    pv_gen: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "load", as_series(self.load, f"{self.household_id}.load"))
        object.__setattr__(self, "pv_gen", as_series(self.pv_gen, f"{self.household_id}.pv_gen"))
        if self.load.shape != self.pv_gen.shape:
            raise ValueError(
                f"{self.household_id}: load has {self.load.size} steps "
                f"but pv_gen has {self.pv_gen.size}")

    @property
    def has_pv(self) -> bool:
        return bool(self.pv_gen.any())


@dataclass(frozen=True)
class ChargerSpec:
    """Community charging hardware: point count, per-point rating, install cost.

    ``n_cp = 0`` is valid and collapses coordinated dispatch to the
    separated baseline (no PV-to-EV transfer at all).
    """

    n_cp: int
    p_max_kw: float
    capex_chf: float = 0.0

    def __post_init__(self) -> None:
        if self.n_cp < 0:
            raise ValueError(f"n_cp must be >= 0, got {self.n_cp}")
        if self.p_max_kw < 0:
            raise ValueError(f"p_max_kw must be >= 0, got {self.p_max_kw}")
        if self.capex_chf < 0:
            raise ValueError(f"capex_chf must be >= 0, got {self.capex_chf}")

    @property
    def cap_kw(self) -> float:
        """Combined rated power; hourly ceiling for PV-to-EV transfer."""
        return self.n_cp * self.p_max_kw

    @property
    def label(self) -> str:
        return f"{self.n_cp}x{self.p_max_kw:g}kW"


@dataclass(frozen=True)
class EvDemandSeries:
    """Aggregate hourly EV charging demand (kW) at the community points."""

    demand: np.ndarray
    profile_id: str = "ev"

    def __post_init__(self) -> None:
        object.__setattr__(self, "demand", as_series(self.demand, f"{self.profile_id}.demand"))


def align_series(axis: TimeAxis, series: Mapping[str, Sequence[float]]) -> str | None:
    """Check that every named series has exactly ``axis.steps`` values.

    Returns None when everything lines up, else a message naming each
    offending series and its length.
    """
    bad = [f"'{name}' has {len(values)}"
           for name, values in series.items() if len(values) != axis.steps]
    if not bad:
        return None
    return f"length mismatch ({', '.join(bad)} vs {axis.steps} steps)"
