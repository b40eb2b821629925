"""Shared builders for the test suite."""

from datetime import datetime

import numpy as np

from lecsim import (
    ChargerSpec,
    EvDemandSeries,
    HouseholdSeries,
    PriceSet,
    ProfileBundle,
    TimeAxis,
)


def make_axis(steps, dt_hours=1.0):
    return TimeAxis(start=datetime(2025, 1, 1), steps=steps, dt_hours=dt_hours)


def demo_prices(ev=0.40, gamma=0.5, network_fee=0.0859):
    """Swiss-flavoured flat tariffs used throughout the tests."""
    return PriceSet(sell=0.06, loc=0.10, buy=0.241, ev=ev, public=0.57,
                    network_fee=network_fee, gamma=gamma)


def make_bundle(loads, pvs, ids=None, dt_hours=1.0, ev_profiles=()):
    """Bundle from (n_households, steps) nested lists/arrays."""
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    pvs = np.atleast_2d(np.asarray(pvs, dtype=float))
    assert loads.shape == pvs.shape
    if ids is None:
        ids = [f"h{i + 1}" for i in range(loads.shape[0])]
    households = [HouseholdSeries(household_id=ids[i], load=loads[i], pv_gen=pvs[i])
                  for i in range(loads.shape[0])]
    return ProfileBundle(axis=make_axis(loads.shape[1], dt_hours),
                         households=households, ev_profiles=list(ev_profiles))


def toy_bundle():
    """The 2-household, 3-hour worked example used for frozen-value tests."""
    return make_bundle(loads=[[2, 2, 2], [4, 1, 0]], pvs=[[5, 0, 2], [0, 0, 0]],
                       ids=["prosumer", "consumer"])


def toy_ev():
    return EvDemandSeries(demand=[10.0, 10.0, 10.0], profile_id="toy")


def random_prices(rng):
    """A random ladder-valid price set."""
    steps = rng.uniform(0.02, 0.25, size=4)
    sell = rng.uniform(0.01, 0.10)
    loc = sell + steps[0]
    buy = loc + steps[1]
    ev = buy + steps[2]
    public = ev + steps[3]
    return PriceSet(sell=sell, loc=loc, buy=buy, ev=ev, public=public,
                    network_fee=rng.uniform(0.0, 0.15), gamma=rng.uniform(0.0, 1.0))


def random_instance(rng, n_max=6, t_max=72, demand_within_cap=False):
    """A random (bundle, ev_demand, chargers, prices) quadruple.

    ``demand_within_cap`` keeps EV demand below the combined port rating,
    the physical situation at rated charging points.
    """
    n = int(rng.integers(1, n_max + 1))
    steps = int(rng.integers(4, t_max + 1))
    load = rng.uniform(0.0, 8.0, size=(n, steps))
    has_pv = rng.random(size=(n, 1)) < 0.7
    pv = rng.uniform(0.0, 10.0, size=(n, steps)) * has_pv
    bundle = make_bundle(load, pv)

    n_cp = int(rng.integers(0, 4))
    p_max = float(rng.uniform(3.0, 12.0))
    chargers = ChargerSpec(n_cp=n_cp, p_max_kw=p_max,
                           capex_chf=float(rng.uniform(0.0, 10000.0)))
    high = chargers.cap_kw if (demand_within_cap and n_cp > 0) else 30.0
    demand = rng.uniform(0.0, max(high, 1e-9), size=steps)
    if demand_within_cap and n_cp == 0:
        demand = np.zeros(steps)
    ev = EvDemandSeries(demand=demand, profile_id="rand")
    return bundle, ev, chargers, random_prices(rng)


def oracle_households(bundle):
    return [{"id": hh.household_id, "load": hh.load.tolist(), "pv": hh.pv_gen.tolist()}
            for hh in bundle.households]


def oracle_prices(prices):
    return {"sell": prices.sell, "loc": prices.loc, "buy": prices.buy, "ev": prices.ev,
            "public": prices.public, "network_fee": prices.network_fee,
            "gamma": prices.gamma}


def rel_close(a, b, tol=1e-9):
    """|a-b| within tol relative to magnitude (absolute near zero)."""
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
