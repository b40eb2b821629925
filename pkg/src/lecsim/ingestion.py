"""Profile ingestion: CSV loading, CSV writing, and synthetic generators.

CSV layout (both files): one row per interval, wide columns, decimal point,
UTF-8, LF.  The timestamp column is informative only; row order defines the
hour index, which sidesteps timezone/DST ambiguity in a settlement engine.
Missing or negative cells are hard errors, never interpolated: settlement is
a financial computation.

    households: timestamp,<id>_load_kw,<id>_pv_kw,...
    ev:         timestamp,<profile_id>_kw,...

The synthetic generators are pure functions of (seed, parameters) and exist
so the engine can be exercised without access to metering data.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    HOURS_PER_YEAR,
    EvDemandSeries,
    HouseholdSeries,
    TimeAxis,
    align_series,
)

__all__ = [
    "CsvFormatError",
    "ProfileBundle",
    "read_household_csv",
    "read_ev_csv",
    "write_household_csv",
    "write_ev_csv",
    "combine_ev_profiles",
    "synth_household",
    "synth_ev_profile",
    "add_session",
]

logger = logging.getLogger(__name__)

_LOAD_SUFFIX = "_load_kw"
_PV_SUFFIX = "_pv_kw"
_EV_SUFFIX = "_kw"


class CsvFormatError(ValueError):
    """An input CSV violates the documented layout."""


@dataclass(frozen=True)
class ProfileBundle:
    """Everything a simulation consumes: axis, member series, and the pool
    of candidate EV charging profiles (selected/aggregated per scenario)."""

    axis: TimeAxis
    households: list[HouseholdSeries]
    ev_profiles: list[EvDemandSeries] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.households:
            raise ValueError("a simulation needs at least one household")
        named: dict[str, Sequence[float]] = {}
        for hh in self.households:
            named[f"{hh.household_id}.load"] = hh.load
            named[f"{hh.household_id}.pv_gen"] = hh.pv_gen
        for profile in self.ev_profiles:
            named[f"{profile.profile_id}.demand"] = profile.demand
        problem = align_series(self.axis, named)
        if problem is not None:
            raise ValueError(problem)
        ids = [hh.household_id for hh in self.households]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate household ids")
        pids = [p.profile_id for p in self.ev_profiles]
        if len(set(pids)) != len(pids):
            raise ValueError("duplicate EV profile ids")

    @property
    def household_ids(self) -> list[str]:
        return [hh.household_id for hh in self.households]

    def load_matrix(self) -> np.ndarray:
        """(n_households, steps) demand in kW."""
        return np.vstack([hh.load for hh in self.households])

    def pv_matrix(self) -> np.ndarray:
        """(n_households, steps) PV generation in kW."""
        return np.vstack([hh.pv_gen for hh in self.households])

    def ev_profile(self, profile_id: str) -> EvDemandSeries:
        for profile in self.ev_profiles:
            if profile.profile_id == profile_id:
                return profile
        raise KeyError(f"no EV profile '{profile_id}'")


def combine_ev_profiles(profiles: Iterable[EvDemandSeries], ids: Sequence[str] | None = None,
                        scale: float = 1.0, profile_id: str = "ev") -> EvDemandSeries:
    """Aggregate selected charging profiles into one demand series.

    ``ids=None`` sums all profiles; ``scale`` multiplies the aggregate.
    """
    pool = list(profiles)
    if not pool:
        raise ValueError("no EV profiles to combine")
    if ids is not None:
        by_id = {p.profile_id: p for p in pool}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise KeyError(f"unknown EV profile ids: {', '.join(missing)}")
        pool = [by_id[i] for i in ids]
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    total = np.zeros_like(pool[0].demand)
    for p in pool:
        total = total + p.demand
    return EvDemandSeries(demand=total * scale, profile_id=profile_id)


# ----------------------------------------------------------------------
# CSV reading / writing
# ----------------------------------------------------------------------

def _read_rows(path: Path | str) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file, no header") from None
        rows = [row for row in reader if row]
    return header, rows


def _parse_cell(cell: str, path: Path | str, line: int, column: str) -> float:
    text = cell.strip()
    if not text:
        raise CsvFormatError(f"{path}: missing value at row {line}, column '{column}'")
    try:
        value = float(text)
    except ValueError:
        raise CsvFormatError(
            f"{path}: non-numeric value '{text}' at row {line}, column '{column}'") from None
    if not np.isfinite(value):
        raise CsvFormatError(f"{path}: non-finite value at row {line}, column '{column}'")
    if value < 0:
        raise CsvFormatError(
            f"{path}: negative value {value} at row {line}, column '{column}'")
    return value


def _parse_table(path: Path | str, axis: TimeAxis, header: list[str],
                 rows: list[list[str]]) -> np.ndarray:
    """Values of all non-timestamp columns as a (steps, n_columns) array."""
    if len(rows) != axis.steps:
        raise CsvFormatError(f"{path}: length mismatch ({len(rows)} vs {axis.steps} steps)")
    n_cols = len(header)
    data = np.empty((len(rows), n_cols - 1))
    for r, row in enumerate(rows):
        line = r + 2  # 1-based file line, after the header
        if len(row) != n_cols:
            raise CsvFormatError(
                f"{path}: row {line} has {len(row)} cells, header has {n_cols}")
        for c in range(1, n_cols):
            data[r, c - 1] = _parse_cell(row[c], path, line, header[c])
    return data


def read_household_csv(path: Path | str, axis: TimeAxis) -> list[HouseholdSeries]:
    """Load member series from a wide CSV of (load, pv) column pairs."""
    header, rows = _read_rows(path)
    if not header or header[0].strip() != "timestamp":
        raise CsvFormatError(f"{path}: first header column must be 'timestamp'")
    value_cols = [h.strip() for h in header[1:]]
    if not value_cols or len(value_cols) % 2 != 0:
        raise CsvFormatError(
            f"{path}: expected <id>{_LOAD_SUFFIX},<id>{_PV_SUFFIX} column pairs, "
            f"got {len(value_cols)} value columns")
    ids = []
    for k in range(0, len(value_cols), 2):
        load_col, pv_col = value_cols[k], value_cols[k + 1]
        if not load_col.endswith(_LOAD_SUFFIX):
            raise CsvFormatError(f"{path}: column '{load_col}' should end with '{_LOAD_SUFFIX}'")
        hid = load_col[: -len(_LOAD_SUFFIX)]
        if pv_col != f"{hid}{_PV_SUFFIX}":
            raise CsvFormatError(
                f"{path}: column '{pv_col}' should be '{hid}{_PV_SUFFIX}' to pair with '{load_col}'")
        ids.append(hid)
    if len(set(ids)) != len(ids):
        raise CsvFormatError(f"{path}: duplicate household ids in header")

    data = _parse_table(path, axis, header, rows)
    return [
        HouseholdSeries(household_id=hid, load=data[:, 2 * k], pv_gen=data[:, 2 * k + 1])
        for k, hid in enumerate(ids)
    ]


def read_ev_csv(path: Path | str, axis: TimeAxis,
                warn_above_kw: float | None = None) -> list[EvDemandSeries]:
    """Load charging-point profiles from a wide CSV, one column per profile.

    Hours above ``warn_above_kw`` (typically the configured port rating) are
    accepted with a warning: an aggregate of overlapping sessions may exceed
    one port's rating, and dispatch clips only the PV share later.
    """
    header, rows = _read_rows(path)
    if not header or header[0].strip() != "timestamp":
        raise CsvFormatError(f"{path}: first header column must be 'timestamp'")
    value_cols = [h.strip() for h in header[1:]]
    if not value_cols:
        raise CsvFormatError(f"{path}: no profile columns")
    ids = []
    for col in value_cols:
        if not col.endswith(_EV_SUFFIX):
            raise CsvFormatError(f"{path}: column '{col}' should end with '{_EV_SUFFIX}'")
        ids.append(col[: -len(_EV_SUFFIX)])
    if len(set(ids)) != len(ids):
        raise CsvFormatError(f"{path}: duplicate profile ids in header")

    data = _parse_table(path, axis, header, rows)
    profiles = []
    for k, pid in enumerate(ids):
        series = data[:, k]
        if warn_above_kw is not None:
            over = int((series > warn_above_kw).sum())
            if over:
                logger.warning(
                    "EV profile '%s' exceeds %.3g kW in %d hour(s); "
                    "dispatch only clips the PV share, the excess is grid-served",
                    pid, warn_above_kw, over)
        profiles.append(EvDemandSeries(demand=series, profile_id=pid))
    return profiles


def _format_value(value: float) -> str:
    # repr() is the shortest round-trip form, so read -> write is byte-stable
    return repr(float(value))


def write_household_csv(path: Path | str, axis: TimeAxis,
                        households: Sequence[HouseholdSeries]) -> None:
    problem = align_series(axis, {hh.household_id: hh.load for hh in households})
    if problem is not None:
        raise ValueError(problem)
    header = ["timestamp"]
    for hh in households:
        header += [f"{hh.household_id}{_LOAD_SUFFIX}", f"{hh.household_id}{_PV_SUFFIX}"]
    stamps = axis.timestamps()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in range(axis.steps):
            row = [stamps[t].isoformat()]
            for hh in households:
                row += [_format_value(hh.load[t]), _format_value(hh.pv_gen[t])]
            writer.writerow(row)


def write_ev_csv(path: Path | str, axis: TimeAxis,
                 profiles: Sequence[EvDemandSeries]) -> None:
    problem = align_series(axis, {p.profile_id: p.demand for p in profiles})
    if problem is not None:
        raise ValueError(problem)
    header = ["timestamp"] + [f"{p.profile_id}{_EV_SUFFIX}" for p in profiles]
    stamps = axis.timestamps()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in range(axis.steps):
            writer.writerow([stamps[t].isoformat()] + [_format_value(p.demand[t]) for p in profiles])


# ----------------------------------------------------------------------
# Synthetic generators
# ----------------------------------------------------------------------

def _rescale(raw: np.ndarray, target_kwh: float, dt_hours: float) -> np.ndarray:
    if target_kwh == 0.0:
        return np.zeros_like(raw)
    raw_kwh = float(raw.sum()) * dt_hours
    if raw_kwh <= 0.0:
        raise ValueError("cannot scale an all-zero profile to a nonzero total "
                         "(axis too short to contain any daylight?)")
    return raw * (target_kwh / raw_kwh)


def synth_household(seed: int, axis: TimeAxis, annual_load_kwh: float, pv_kwp: float,
                    yield_kwh_per_kwp: float = 950.0,
                    household_id: str | None = None) -> HouseholdSeries:
    """Generate a reproducible synthetic household.

    Load is a double-peaked weekday/weekend shape with multiplicative noise,
    rescaled so the horizon total matches ``annual_load_kwh`` (prorated when
    the axis is shorter than a year).  PV is a daylight bell (zero at night,
    peak near midday) with seasonal daylength and per-day cloudiness,
    rescaled to ``pv_kwp * yield_kwh_per_kwp`` per year.  The 950 kWh/kWp
    default is a typical Swiss rooftop figure; shaded or unfavourably
    oriented sites can be far lower (the bundled demo config uses 618).

    Deterministic: the same (seed, parameters) always produce the same series.
    """
    if annual_load_kwh < 0 or pv_kwp < 0 or yield_kwh_per_kwp < 0:
        raise ValueError("annual_load_kwh, pv_kwp and yield_kwh_per_kwp must be >= 0")
    rng = np.random.default_rng(seed)
    fraction_of_year = axis.total_hours / HOURS_PER_YEAR

    t = np.arange(axis.steps)
    hod = (axis.start.hour + t * axis.dt_hours) % 24.0
    day = ((t * axis.dt_hours) // 24).astype(int)
    dow = (axis.start.weekday() + day) % 7
    season = np.cos(2.0 * np.pi * (day - 15) / 365.0)  # +1 mid-January

    base = (0.25
            + 0.55 * np.exp(-0.5 * ((hod - 7.5) / 1.8) ** 2)
            + 0.95 * np.exp(-0.5 * ((hod - 19.0) / 2.6) ** 2))
    base = base * (1.0 + 0.15 * season)
    base = base * np.where(dow >= 5, 1.12, 1.0)
    base = base * rng.gamma(9.0, 1.0 / 9.0, size=axis.steps)
    load = _rescale(base, annual_load_kwh * fraction_of_year, axis.dt_hours)

    if pv_kwp > 0:
        halfwidth = 6.1 - 1.9 * season  # daylight half-window, hours from solar noon
        angle = (hod - 12.5) / halfwidth * (np.pi / 2.0)
        elev = np.where(np.abs(hod - 12.5) < halfwidth, np.cos(angle), 0.0)
        elev = np.maximum(elev, 0.0) ** 1.3
        cloud = rng.beta(2.6, 1.3, size=int(day.max()) + 1)[day]
        raw = elev * cloud * (1.0 - 0.45 * season)
        pv = _rescale(raw, pv_kwp * yield_kwh_per_kwp * fraction_of_year, axis.dt_hours)
    else:
        pv = np.zeros(axis.steps)

    return HouseholdSeries(household_id=household_id or f"h{seed}", load=load, pv_gen=pv)


# Relative arrival likelihood per hour of day; mid-morning to afternoon heavy.
DEFAULT_ARRIVAL_WEIGHTS = np.array([
    0.2, 0.15, 0.1, 0.1, 0.15, 0.3,   # 00-05
    0.8, 1.6, 2.4, 3.0, 3.2, 3.2,     # 06-11
    3.0, 3.0, 2.9, 2.7, 2.5, 2.3,     # 12-17
    2.0, 1.5, 1.0, 0.7, 0.45, 0.3,    # 18-23
])


def add_session(demand: np.ndarray, start_step: int, energy_kwh: float, port_kw: float,
                dt_hours: float) -> float:
    """Stack one charging session onto ``demand`` in place.

    From ``start_step`` the session draws min(port, remaining/dt) each step
    until its energy is delivered or the horizon ends.  Returns undelivered
    kWh (nonzero when the session is cut off by the horizon).
    """
    remaining = float(energy_kwh)
    if port_kw <= 0:
        return remaining
    t = start_step
    while remaining > 1e-12 and t < len(demand):
        p = min(port_kw, remaining / dt_hours)
        demand[t] += p
        remaining -= p * dt_hours
        t += 1
    return max(remaining, 0.0)


def synth_ev_profile(seed: int, axis: TimeAxis, sessions_per_day: float,
                     energy_per_session_kwh: float, port_kw: float,
                     hour_weights: Sequence[float] | None = None,
                     profile_id: str | None = None) -> EvDemandSeries:
    """Generate a reproducible charging-point demand profile.

    Session counts are Poisson per day; arrival hours follow ``hour_weights``
    (24 relative weights, daytime-heavy by default).  Concurrent sessions
    stack, so the aggregate can exceed one port's rating.

    Deterministic in (seed, parameters).
    """
    if sessions_per_day < 0 or energy_per_session_kwh < 0 or port_kw < 0:
        raise ValueError("all parameters must be >= 0")
    weights = np.asarray(DEFAULT_ARRIVAL_WEIGHTS if hour_weights is None else hour_weights,
                         dtype=float)
    if weights.shape != (24,) or (weights < 0).any() or weights.sum() <= 0:
        raise ValueError("hour_weights must be 24 nonnegative values with a positive sum")
    p = weights / weights.sum()

    rng = np.random.default_rng(seed)
    demand = np.zeros(axis.steps)
    if sessions_per_day > 0 and energy_per_session_kwh > 0 and port_kw > 0:
        steps_per_day = max(int(round(24.0 / axis.dt_hours)), 1)
        n_days = int(np.ceil(axis.steps / steps_per_day))
        counts = rng.poisson(sessions_per_day, size=n_days)
        for d in range(n_days):
            for _ in range(counts[d]):
                hour = int(rng.choice(24, p=p))
                start = d * steps_per_day + int(hour / axis.dt_hours)
                if start < axis.steps:
                    add_session(demand, start, energy_per_session_kwh, port_kw, axis.dt_hours)
    return EvDemandSeries(demand=demand, profile_id=profile_id or f"cp{seed:02d}")
