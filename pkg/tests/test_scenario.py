from dataclasses import replace

import pytest

from fleetcoop.scenario import Coalition, PlayerCountOutOfRange, ScenarioError, coalition_iter, diagnose
from fleetcoop.scenario_io import dumps_scenario, loads_scenario


def test_bundled_scenario_has_no_diagnostics(case_b):
    assert diagnose(case_b) == []
    assert case_b.n_players == 3
    assert len(case_b.chargers) == 5
    assert sum(1 for n in case_b.transport.nodes if n.kind == "customer") == 12


def test_roundtrip_is_lossless(case_b):
    text = dumps_scenario(case_b)
    again = loads_scenario(text)
    assert again == case_b
    assert dumps_scenario(again) == text


def test_request_with_same_origin_and_destination(case_b):
    r = replace(case_b.requests[0], destination=case_b.requests[0].origin)
    bad = replace(case_b, requests=(r,) + case_b.requests[1:])
    codes = diagnose(bad)
    assert [d.code for d in codes] == ["InvalidRequest"]
    assert "request 1" in codes[0].message


def test_charger_on_missing_bus(case_b):
    c = replace(case_b.chargers[0], grid_bus=99)
    bad = replace(case_b, chargers=(c,) + case_b.chargers[1:])
    with pytest.raises(ScenarioError) as err:
        loads_scenario(dumps_scenario(bad))
    d = err.value.diagnostics[0]
    assert d.code == "DanglingReference"
    assert "charger 1" in d.message and "99" in d.message


def test_meshed_grid_is_rejected(case_b):
    from fleetcoop.scenario import Line
    grid = replace(case_b.grid, lines=case_b.grid.lines + (Line(2, 5, 0.01, 0.01),))
    assert "NotRadial" in [d.code for d in diagnose(replace(case_b, grid=grid))]


def test_price_vector_length_must_match_horizon(case_b):
    c = replace(case_b.chargers[0], price_per_kwh=(0.2, 0.3))
    codes = [d.code for d in diagnose(replace(case_b, chargers=(c,) + case_b.chargers[1:]))]
    assert codes == ["DimensionMismatch"]


def test_vehicle_in_two_fleets(case_b):
    a1, a2, a3 = case_b.aggregators
    bad = replace(case_b, aggregators=(a1, replace(a2, vehicle_ids=a2.vehicle_ids + (1,)), a3))
    codes = {d.code for d in diagnose(bad)}
    assert {"OverlappingFleet", "OwnershipMismatch"} <= codes


def test_aggregator_without_charger(case_b):
    a1, a2, a3 = case_b.aggregators
    keep = tuple(c for c in case_b.chargers if c.owner != 2)
    bad = replace(case_b, aggregators=(a1, replace(a2, charger_ids=()), a3), chargers=keep)
    assert [d.code for d in diagnose(bad)] == ["MissingCharger"]


def test_short_horizon(case_b):
    sc = replace(case_b, horizon_steps=10, requests=tuple(replace(r, earliest_pickup_step=9) for r in case_b.requests),
                 chargers=tuple(replace(c, price_per_kwh=0.2) for c in case_b.chargers))
    assert "HorizonTooShort" in [d.code for d in diagnose(sc)]


def test_coalition_iter_small_cases():
    assert [s.members for s in coalition_iter(1)] == [(1,)]
    assert [s.members for s in coalition_iter(2)] == [(1,), (2,), (1, 2)]
    three = coalition_iter(3)
    assert len(three) == 7 and three[-1] == Coalition.grand(3)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_coalition_iter_is_every_nonempty_subset_once(n):
    import itertools
    expected = {frozenset(c) for r in range(1, n + 1) for c in itertools.combinations(range(1, n + 1), r)}
    got = [frozenset(s.members) for s in coalition_iter(n)]
    assert len(got) == len(set(got)) == 2 ** n - 1
    assert set(got) == expected
    assert [s.mask for s in coalition_iter(n)] == sorted(s.mask for s in coalition_iter(n))


@pytest.mark.parametrize("n", [0, 17])
def test_coalition_iter_range(n):
    with pytest.raises(PlayerCountOutOfRange):
        coalition_iter(n)


def test_coalition_set_algebra():
    a, b = Coalition.of(1, 3), Coalition.of(2, 3)
    assert (a | b).members == (1, 2, 3)
    assert (a & b).members == (3,)
    assert (a - b).members == (1,)
    assert a.label() == "{1, 3}"
    assert 3 in a and 2 not in a and len(a) == 2
