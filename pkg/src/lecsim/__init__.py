"""lecsim: hourly settlement and EV-charging dispatch simulator for local
electricity communities.

The engine compares two regimes on identical inputs: institutional
separation (members share PV internally, surplus is exported, EV users
charge at a commercial operator) and community-operated charging (the
post-sharing surplus feeds community charging points before export, with a
dedicated infrastructure revenue account).
"""

from .c2v import (
    C2vYearFlows,
    HourlyC2vFlows,
    RevenueAccount,
    attribute_pv2ev,
    dispatch_hour,
    dispatch_series,
    revenue_year,
    settle_year_s2,
)
from .domain import (
    ChargerSpec,
    EvDemandSeries,
    HouseholdSeries,
    PriceSet,
    TimeAxis,
    align_series,
    validate_price_set,
)
from .ingestion import (
    CsvFormatError,
    ProfileBundle,
    combine_ev_profiles,
    read_ev_csv,
    read_household_csv,
    synth_ev_profile,
    synth_household,
    write_ev_csv,
    write_household_csv,
)
from .metrics import (
    MetricsReport,
    compute_metrics,
    m1_absorption,
    m2_peaks,
    m3_ev_savings,
    m5_household_delta,
)
from .report import (
    ScenarioReport,
    build_scenario_report,
    emit_pv_split_csv,
    emit_report_json,
    emit_sweep_csv,
    emit_sweep_json,
    emit_trace_csv,
    parse_report_json,
)
from .settlement import (
    HourlyLecFlows,
    LecYearFlows,
    MemberStatement,
    member_statements,
    settle_hour,
    settle_year_s1,
)
from .sweep import (
    ScenarioClass,
    ScenarioComparison,
    SweepPoint,
    SweepSpec,
    classify_scenario,
    compare_s1_s2,
    run_sweep,
)

__version__ = "0.1.0"
