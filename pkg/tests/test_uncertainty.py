import pytest

from clscopt.uncertainty import (
    DemandScenario,
    ScenarioSet,
    expected_demand,
    generate_scenarios,
)


def test_three_point_scenarios():
    s = generate_scenarios({"K1": 100.0}, 0.2, count=3)
    assert [sc.demand["K1"] for sc in s] == pytest.approx([80.0, 100.0, 120.0])
    assert list(s.probabilities) == [0.25, 0.5, 0.25]
    assert s.problems() == []


def test_single_scenario():
    s = generate_scenarios({"K1": 100.0}, 0.7, count=1)
    assert len(s) == 1
    assert s[0].probability == 1.0
    assert s[0].demand == {"K1": 100.0}


def test_expected_demand_of_symmetric_set_is_base():
    s = generate_scenarios({"K1": 100.0, "K2": 40.0}, 0.3)
    assert expected_demand(s) == pytest.approx({"K1": 100.0, "K2": 40.0})


def test_expected_demand_two_scenarios():
    s = ScenarioSet((DemandScenario(0.5, {"K": 10.0}), DemandScenario(0.5, {"K": 30.0})))
    assert expected_demand(s) == {"K": 20.0}


def test_expected_demand_order_invariant_and_linear():
    a = DemandScenario(0.2, {"K": 10.0})
    b = DemandScenario(0.8, {"K": 35.0})
    e1 = expected_demand(ScenarioSet((a, b)))["K"]
    e2 = expected_demand(ScenarioSet((b, a)))["K"]
    assert e1 == pytest.approx(e2)
    doubled = ScenarioSet((DemandScenario(0.2, {"K": 20.0}), DemandScenario(0.8, {"K": 70.0})))
    assert expected_demand(doubled)["K"] == pytest.approx(2 * e1)


def test_probability_sum_rule():
    s = ScenarioSet((DemandScenario(0.5, {"K": 1.0}), DemandScenario(0.4, {"K": 1.0})))
    problems = s.problems()
    assert any("probabilities sum to 0.9" in p for p in problems)


@pytest.mark.parametrize("spread,count", [(-0.1, 3), (1.0, 3), (0.2, 2)])
def test_generate_rejects_bad_arguments(spread, count):
    with pytest.raises(ValueError):
        generate_scenarios({"K": 1.0}, spread, count)


def test_json_round_trip():
    s = generate_scenarios({"K1": 7.0, "K2": 3.5}, 0.25)
    assert ScenarioSet.from_json(s.to_json()) == s
