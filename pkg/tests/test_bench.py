import dataclasses

import pytest

from fleetcoop.bench import (
    Sampled,
    aumann_model,
    run_aggregator_aware,
    run_aggregator_blind,
)
from fleetcoop.routing import CoalitionOracle
from fleetcoop.scenario import Coalition


def two_fleet_one_request(case_b):
    keep = {1, 2}
    return dataclasses.replace(
        case_b,
        aggregators=tuple(a for a in case_b.aggregators if a.id in keep),
        vehicles=tuple(v for v in case_b.vehicles if v.owner in keep),
        chargers=tuple(c for c in case_b.chargers if c.owner in keep),
        requests=case_b.requests[:1],
    )


def test_single_aggregator_equals_its_value(solo):
    res = run_aggregator_aware(solo)
    v = CoalitionOracle(solo).value(Coalition.of(1))
    assert res.exact and res.infeasible_mass == 0.0
    assert res.per_aggregator[1] == pytest.approx((v.cost, v.energy))


def test_one_request_two_fleets_splits_by_prior(case_b):
    sc = two_fleet_one_request(case_b)
    oracle = CoalitionOracle(sc)
    res = run_aggregator_aware(sc, oracle=oracle)
    for a in (1, 2):
        alone = oracle.value(Coalition.of(a))
        assert res.per_aggregator[a][0] == pytest.approx(0.5 * alone.cost, abs=1e-12)
        assert res.per_aggregator[a][1] == pytest.approx(0.5 * alone.energy, abs=1e-12)
    skewed = run_aggregator_aware(sc, prior={1: 0.25, 2: 0.75}, oracle=oracle)
    assert skewed.per_aggregator[1][0] == pytest.approx(0.25 * oracle.value(Coalition.of(1)).cost, abs=1e-12)


def test_exact_agrees_with_monte_carlo(case_b, case_b_oracle):
    exact = run_aggregator_aware(case_b, mode="exact", oracle=case_b_oracle)
    mc = run_aggregator_aware(case_b, mode=Sampled(100_000, seed=0), oracle=case_b_oracle)
    assert not mc.exact and mc.sample_count == 100_000
    for a, (cost, _) in exact.per_aggregator.items():
        assert abs(mc.per_aggregator[a][0] - cost) <= 2 * mc.standard_errors[a]


def test_monte_carlo_is_reproducible(case_b, case_b_oracle):
    one = run_aggregator_aware(case_b, mode=Sampled(500, seed=11), oracle=case_b_oracle)
    two = run_aggregator_aware(case_b, mode=Sampled(500, seed=11), oracle=CoalitionOracle(case_b))
    other = run_aggregator_aware(case_b, mode=Sampled(500, seed=12), oracle=case_b_oracle)
    assert one == two
    assert one.per_aggregator != other.per_aggregator


def test_blind_never_beats_the_grand_coalition(case_b, case_b_oracle):
    blind = run_aggregator_blind(case_b, oracle=case_b_oracle)
    grand = case_b_oracle.value(Coalition.grand(3)).cost
    assert blind.total_cost >= grand - 1e-9


def test_blind_leaves_the_remote_fleet_idle(case_b, case_b_oracle):
    # fleet 2 starts in the far corner of the fixture, away from every pickup
    blind = run_aggregator_blind(case_b, oracle=case_b_oracle)
    assert blind.per_aggregator[2] == (0.0, 0.0)
    assert blind.per_aggregator[1][0] > 0 and blind.per_aggregator[3][0] > 0


def test_blind_with_one_aggregator_is_its_value(solo):
    blind = run_aggregator_blind(solo)
    v = CoalitionOracle(solo).value(Coalition.of(1))
    assert blind.per_aggregator[1] == pytest.approx((v.cost, v.energy))


@pytest.mark.parametrize("prior", [{1: 0.5, 2: 0.5}, {1: 0.0, 2: 0.5, 3: 0.5}, {1: 0.5, 2: 0.4, 3: 0.2}])
def test_prior_validation(case_b, prior):
    with pytest.raises(ValueError):
        aumann_model(case_b, prior)


def test_aumann_model_partitions(case_b):
    m = aumann_model(case_b)
    assert m.n_states == 3 ** 5
    state = (1, 2, 1, 3, 3)
    assert m.cell(1, state) == frozenset({1, 3})
    assert m.nature(state) == {1: (1, 3), 2: (2,), 3: (4, 5)}
    assert sum(m.probability(s) for s in m.states()) == pytest.approx(1.0)


def test_invalid_sample_count(case_b, case_b_oracle):
    with pytest.raises(ValueError):
        run_aggregator_aware(case_b, mode=Sampled(0), oracle=case_b_oracle)
