"""Run configuration: one TOML file defines inputs, tariffs, hardware,
scenarios, the sweep, and generator settings; CLI flags override.

The network-fee reduction factor ``gamma`` is deliberately a required key:
no regulatory default exists, so a silently assumed value would be wrong in
the one place it matters most.  Relative paths resolve against the config
file's directory so a committed config reproduces the same run anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # py310
    import tomli as tomllib

from .domain import ChargerSpec, EvDemandSeries, PriceSet, TimeAxis, validate_price_set
from .ingestion import CsvFormatError, ProfileBundle, combine_ev_profiles, read_ev_csv, read_household_csv
from .sweep import DEFAULT_CLASS_THRESHOLDS

__all__ = ["ConfigError", "ScenarioDef", "SynthSpec", "RunConfig",
           "load_config", "validate_config", "load_bundle", "scenario_series",
           "pick_scenario"]


class ConfigError(ValueError):
    """A configuration file is structurally or semantically unusable."""


@dataclass(frozen=True)
class ScenarioDef:
    """One demand scenario: which EV profiles to aggregate and how to scale."""

    label: str
    profiles: tuple[str, ...] | None = None  # None = all profiles
    scale: float = 1.0


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for the synthetic fixture generator."""

    households: int = 7
    pv_households: int = 3
    pv_kwp: float = 12.0
    annual_load_kwh: float = 6296.0
    pv_yield_kwh_per_kwp: float = 950.0
    ev_profiles: int = 20
    sessions_per_day: float = 4.0
    energy_per_session_kwh: float = 15.0
    port_kw: float = 11.0


@dataclass(frozen=True)
class RunConfig:
    axis: TimeAxis
    prices: PriceSet
    chargers: ChargerSpec
    charger_options: tuple[ChargerSpec, ...]
    household_csv: Path | None
    ev_csv: Path | None
    out_dir: Path
    scenarios: tuple[ScenarioDef, ...]
    sweep_prices: tuple[float, float, float]
    thresholds: tuple[float, float]
    seed: int
    local_fee_on_top: bool
    synth: SynthSpec = field(default_factory=SynthSpec)


def _section(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _get(section: dict, where: str, key: str, kind, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing required key '{key}' in [{where}]")
        return default
    value = section[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"[{where}].{key} must be {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_axis(doc: dict) -> TimeAxis:
    section = _section(doc, "axis")
    if "year" in section:
        year = _get(section, "axis", "year", int, required=True)
        start = datetime(year, 1, 1)
    else:
        raw = section.get("start", "2025-01-01T00:00:00")
        if isinstance(raw, datetime):
            start = raw
        elif isinstance(raw, str):
            try:
                start = datetime.fromisoformat(raw)
            except ValueError:
                raise ConfigError(f"[axis].start is not an ISO timestamp: {raw!r}") from None
        else:
            raise ConfigError("[axis].start must be a timestamp")
    steps = _get(section, "axis", "steps", int, default=8760)
    dt_hours = _get(section, "axis", "dt_hours", float, default=1.0)
    try:
        return TimeAxis(start=start, steps=steps, dt_hours=dt_hours)
    except ValueError as exc:
        raise ConfigError(f"[axis]: {exc}") from None


def _parse_prices(doc: dict) -> PriceSet:
    section = _section(doc, "prices")
    if not section:
        raise ConfigError("missing [prices] section")
    kwargs = {}
    for key in ("sell", "loc", "buy", "ev", "public", "network_fee", "gamma"):
        kwargs[key] = _get(section, "prices", key, float, required=True)
    return PriceSet(**kwargs)


def _parse_chargers(section: dict, where: str) -> ChargerSpec:
    try:
        return ChargerSpec(
            n_cp=_get(section, where, "n_cp", int, default=0),
            p_max_kw=_get(section, where, "p_max_kw", float, default=0.0),
            capex_chf=_get(section, where, "capex_chf", float, default=0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def _parse_scenarios(doc: dict) -> tuple[ScenarioDef, ...]:
    raw = doc.get("scenarios", [])
    if not isinstance(raw, list):
        raise ConfigError("[[scenarios]] must be an array of tables")
    if not raw:
        return (ScenarioDef(label="all"),)
    defs = []
    for k, entry in enumerate(raw):
        where = f"scenarios[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"[{where}] must be a table")
        label = _get(entry, where, "label", str, required=True)
        profiles = entry.get("profiles")
        if profiles is not None:
            if (not isinstance(profiles, list)
                    or not all(isinstance(p, str) for p in profiles)):
                raise ConfigError(f"[{where}].profiles must be a list of profile ids")
            profiles = tuple(profiles)
        scale = _get(entry, where, "scale", float, default=1.0)
        if scale < 0:
            raise ConfigError(f"[{where}].scale must be >= 0, got {scale}")
        defs.append(ScenarioDef(label=label, profiles=profiles, scale=scale))
    labels = [d.label for d in defs]
    if len(set(labels)) != len(labels):
        raise ConfigError("duplicate scenario labels in [[scenarios]]")
    return tuple(defs)


def load_config(path: Path | str) -> RunConfig:
    """Parse and structurally validate a TOML run configuration."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None

    base = path.parent

    def _path(section: dict, where: str, key: str) -> Path | None:
        value = _get(section, where, key, str)
        return None if value is None else (base / value)

    paths = _section(doc, "paths")
    settlement = _section(doc, "settlement")
    sweep = _section(doc, "sweep")
    classification = _section(doc, "classification")
    run = _section(doc, "run")
    synth_raw = _section(doc, "synth")

    chargers = _parse_chargers(_section(doc, "chargers"), "chargers")
    options_raw = doc.get("charger_options", [])
    if not isinstance(options_raw, list):
        raise ConfigError("[[charger_options]] must be an array of tables")
    options = tuple(_parse_chargers(entry, f"charger_options[{k}]")
                    for k, entry in enumerate(options_raw)) or (chargers,)

    synth = SynthSpec(
        households=_get(synth_raw, "synth", "households", int, default=7),
        pv_households=_get(synth_raw, "synth", "pv_households", int, default=3),
        pv_kwp=_get(synth_raw, "synth", "pv_kwp", float, default=12.0),
        annual_load_kwh=_get(synth_raw, "synth", "annual_load_kwh", float, default=6296.0),
        pv_yield_kwh_per_kwp=_get(synth_raw, "synth", "pv_yield_kwh_per_kwp", float,
                                  default=950.0),
        ev_profiles=_get(synth_raw, "synth", "ev_profiles", int, default=20),
        sessions_per_day=_get(synth_raw, "synth", "sessions_per_day", float, default=4.0),
        energy_per_session_kwh=_get(synth_raw, "synth", "energy_per_session_kwh", float,
                                    default=15.0),
        port_kw=_get(synth_raw, "synth", "port_kw", float, default=11.0),
    )
    if synth.pv_households > synth.households:
        raise ConfigError("[synth].pv_households cannot exceed [synth].households")

    return RunConfig(
        axis=_parse_axis(doc),
        prices=_parse_prices(doc),
        chargers=chargers,
        charger_options=options,
        household_csv=_path(paths, "paths", "household_csv"),
        ev_csv=_path(paths, "paths", "ev_csv"),
        out_dir=_path(paths, "paths", "out_dir") or (base / "out"),
        scenarios=_parse_scenarios(doc),
        sweep_prices=(
            _get(sweep, "sweep", "ev_price_min", float, default=0.30),
            _get(sweep, "sweep", "ev_price_max", float, default=0.55),
            _get(sweep, "sweep", "ev_price_step", float, default=0.05),
        ),
        thresholds=(
            _get(classification, "classification", "low_max", float,
                 default=DEFAULT_CLASS_THRESHOLDS[0]),
            _get(classification, "classification", "med_max", float,
                 default=DEFAULT_CLASS_THRESHOLDS[1]),
        ),
        seed=_get(run, "run", "seed", int, default=42),
        local_fee_on_top=_get(settlement, "settlement", "local_fee_on_top", bool,
                              default=True),
        synth=synth,
    )


def load_bundle(cfg: RunConfig) -> ProfileBundle:
    """Read the configured CSVs into an aligned bundle."""
    if cfg.household_csv is None:
        raise ConfigError("no [paths].household_csv configured")
    households = read_household_csv(cfg.household_csv, cfg.axis)
    ev_profiles = []
    if cfg.ev_csv is not None:
        warn_above = cfg.chargers.p_max_kw if cfg.chargers.n_cp > 0 else None
        ev_profiles = read_ev_csv(cfg.ev_csv, cfg.axis, warn_above_kw=warn_above)
    return ProfileBundle(axis=cfg.axis, households=households, ev_profiles=ev_profiles)


def scenario_series(cfg: RunConfig, bundle: ProfileBundle) -> list[tuple[str, EvDemandSeries]]:
    """Aggregate each configured scenario into one demand series."""
    if not bundle.ev_profiles:
        raise ConfigError("scenarios need EV profiles; set [paths].ev_csv")
    out = []
    for spec in cfg.scenarios:
        try:
            series = combine_ev_profiles(bundle.ev_profiles,
                                         ids=spec.profiles, scale=spec.scale,
                                         profile_id=spec.label)
        except KeyError as exc:
            raise ConfigError(f"scenario '{spec.label}': {exc.args[0]}") from None
        out.append((spec.label, series))
    return out


def pick_scenario(cfg: RunConfig, bundle: ProfileBundle,
                  label: str | None = None) -> tuple[str, EvDemandSeries]:
    """The named demand scenario, or the first configured one."""
    series = scenario_series(cfg, bundle)
    if label is None:
        return series[0]
    for name, demand in series:
        if name == label:
            return name, demand
    known = ", ".join(name for name, _ in series)
    raise ConfigError(f"unknown scenario '{label}' (configured: {known})")


def validate_config(cfg: RunConfig) -> list[str]:
    """Semantic diagnostics: price ladder, ranges, files, series alignment."""
    problems: list[str] = []

    ladder = validate_price_set(cfg.prices)
    if ladder is not None:
        problems.append(f"[prices]: {ladder}")

    lo, hi, step = cfg.sweep_prices
    if not lo < hi:
        problems.append(f"[sweep]: ev_price_min must be < ev_price_max ({lo} .. {hi})")
    if not step > 0:
        problems.append(f"[sweep]: ev_price_step must be > 0, got {step}")

    low_max, med_max = cfg.thresholds
    if not 0.0 < low_max < med_max < 1.0:
        problems.append(f"[classification]: need 0 < low_max < med_max < 1, got {cfg.thresholds}")

    if cfg.household_csv is None:
        problems.append("[paths]: household_csv is required for simulation commands")
    elif not cfg.household_csv.exists():
        problems.append(f"[paths]: household_csv not found: {cfg.household_csv}")
    if cfg.ev_csv is not None and not cfg.ev_csv.exists():
        problems.append(f"[paths]: ev_csv not found: {cfg.ev_csv}")

    bundle = None
    if not problems or all(p.startswith(("[prices]", "[sweep]", "[classification]"))
                           for p in problems):
        try:
            bundle = load_bundle(cfg)
        except (ConfigError, CsvFormatError, ValueError, OSError) as exc:
            problems.append(str(exc))

    if bundle is not None:
        available = {p.profile_id for p in bundle.ev_profiles}
        for spec in cfg.scenarios:
            if spec.profiles is None:
                continue
            missing = [p for p in spec.profiles if p not in available]
            if missing:
                problems.append(
                    f"scenario '{spec.label}': unknown EV profiles {', '.join(missing)}")

    return problems
