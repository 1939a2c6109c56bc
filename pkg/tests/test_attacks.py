import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertsec.attacks import (
    AttackKind,
    attack_output_response,
    check_covert_feasibility,
    make_scenario,
    stacked_attack_map,
    synthesize_covert_attack,
    synthesize_designed_attack,
)
from covertsec.errors import (
    FeasibilityError,
    NoActuatorChannelError,
    PreconditionError,
    ValidationError,
)
from covertsec.lti import StateSpaceSystem, build_stacked_io, null_space

from conftest import random_system, systems


def test_scenario_indices_are_validated():
    with pytest.raises(ValidationError):
        make_scenario(2, 2, [3], [])
    with pytest.raises(ValidationError):
        make_scenario(2, 2, [1, 1], [])
    with pytest.raises(ValidationError):
        make_scenario(2, 2, [0], [])


def test_scenario_selection_matrices():
    s = make_scenario(4, 3, [2, 4], [3])
    np.testing.assert_array_equal(s.L_a, np.eye(4)[:, [1, 3]])
    np.testing.assert_array_equal(s.D_a, np.eye(3)[:, [2]])
    np.testing.assert_array_equal(s.D_a_star, np.diag([0.0, 0.0, 1.0]))
    assert s.describe() == "inputs {2,4}, sensors {3}"


def test_no_actuator_channel_is_rejected(fighter):
    with pytest.raises(NoActuatorChannelError):
        check_covert_feasibility(fighter, make_scenario(4, 3, [], [1]))


def test_fighter_verdict_table(fighter):
    rep = check_covert_feasibility(fighter, make_scenario(4, 3, [1], [1]))
    assert rep.feasible_arbitrary and rep.verdict == "FEASIBLE (arbitrary)"
    assert rep.required_sensors == (1,)
    for i in (2, 3, 4):
        for sensors in ([1], [2], [3], [1, 2], [1, 3], [2, 3]):
            rep = check_covert_feasibility(fighter, make_scenario(4, 3, [i], sensors))
            assert not rep.feasible_arbitrary
            assert rep.required_sensors == (1, 2, 3)
            assert rep.witness_output not in sensors
        assert check_covert_feasibility(fighter, make_scenario(4, 3, [i], [1, 2, 3])).feasible_arbitrary


def test_example1_verdicts(example1):
    rep = check_covert_feasibility(example1, make_scenario(2, 2, [1, 2], [1]))
    assert not rep.feasible_arbitrary
    assert rep.feasible_designed
    assert rep.witness_output == 2
    assert rep.verdict == "INFEASIBLE (arbitrary); FEASIBLE (designed)"


def test_decoupled_attack_is_vacuously_feasible():
    # Input 2 drives a state that no sensor sees.
    A = np.diag([0.5, 0.5])
    B = np.eye(2)
    C = np.array([[1.0, 0.0]])
    sys = StateSpaceSystem(A, B, C)
    rep = check_covert_feasibility(sys, make_scenario(2, 1, [2], []))
    assert rep.feasible_arbitrary and rep.decoupled
    assert rep.required_sensors == ()


@settings(max_examples=40, deadline=None)
@given(sys=systems(max_p=4), data=st.data())
def test_feasibility_iff_required_sensors_covered(sys, data):
    inputs = data.draw(st.sets(st.integers(1, sys.m), min_size=1))
    required = None
    for r in range(sys.p + 1):
        for sensors in itertools.combinations(range(1, sys.p + 1), r):
            rep = check_covert_feasibility(sys, make_scenario(sys.m, sys.p, inputs, sensors))
            required = rep.required_sensors if required is None else required
            assert rep.required_sensors == required
            assert rep.feasible_arbitrary == set(required).issubset(sensors)


@settings(max_examples=40, deadline=None)
@given(sys=systems(max_p=4), data=st.data())
def test_enlarging_sensor_set_keeps_feasibility(sys, data):
    inputs = data.draw(st.sets(st.integers(1, sys.m), min_size=1))
    sensors = data.draw(st.sets(st.integers(1, sys.p)))
    extra = data.draw(st.sets(st.integers(1, sys.p)))
    small = check_covert_feasibility(sys, make_scenario(sys.m, sys.p, inputs, sensors))
    big = check_covert_feasibility(sys, make_scenario(sys.m, sys.p, inputs, sensors | extra))
    assert not (small.feasible_arbitrary and not big.feasible_arbitrary)


@settings(max_examples=40, deadline=None)
@given(sys=systems(), data=st.data())
def test_covertness_identity_on_stacked_model(sys, data):
    inputs = data.draw(st.sets(st.integers(1, sys.m), min_size=1))
    probe = check_covert_feasibility(sys, make_scenario(sys.m, sys.p, inputs, []))
    scen = make_scenario(sys.m, sys.p, inputs, probe.required_sensors)
    N = 2 * sys.n + 2
    rng = np.random.default_rng(data.draw(st.integers(0, 1000)))
    a_u = rng.standard_normal((N, scen.m_a))
    plan = synthesize_covert_attack(sys, scen, a_u, N)
    io = build_stacked_io(sys, scen, N)
    attack = io.attack_toeplitz @ plan.actuator_signal.ravel()
    total = attack + io.sensor_block @ plan.sensor_signal.ravel()
    assert np.max(np.abs(total)) <= 1e-9 * (1.0 + np.max(np.abs(attack)))


def test_masking_signal_zero_before_relative_degree():
    A = np.diag([1.0, 1.0], k=1)
    B = np.array([[0.0], [0.0], [1.0]])
    sys = StateSpaceSystem(A, B, np.array([[1.0, 0.0, 0.0]]))
    scen = make_scenario(1, 1, [1], [1])
    plan = synthesize_covert_attack(sys, scen, np.ones((10, 1)), 10)
    assert plan.relative_degree == 3
    np.testing.assert_array_equal(plan.sensor_signal[:3], 0.0)
    # Pure three-step delay: the mask replays the step negated.
    np.testing.assert_array_equal(plan.sensor_signal[3:], -1.0)
    assert plan.kind is AttackKind.ARBITRARY_COVERT


def test_infeasible_synthesis_names_witness(fighter):
    scen = make_scenario(4, 3, [2], [1])
    with pytest.raises(FeasibilityError) as info:
        synthesize_covert_attack(fighter, scen, np.ones((5, 1)), 5)
    assert info.value.witness_output == 2
    assert "output 2" in str(info.value)


def test_short_actuator_signal_rejected(fighter):
    with pytest.raises(ValidationError):
        synthesize_covert_attack(fighter, make_scenario(4, 3, [1], [1]), np.ones((3, 1)), 5)


def test_designed_attack_example1(example1):
    scen = make_scenario(2, 2, [1, 2], [1])
    plan = synthesize_designed_attack(example1, scen, N=50)
    np.testing.assert_allclose(plan.actuator_signal[:, 0], 1.0)
    np.testing.assert_allclose(plan.actuator_signal[:, 1], 0.0, atol=1e-15)
    raw = attack_output_response(example1, scen, plan.actuator_signal)
    assert np.max(np.abs(raw[:, 1])) <= 1e-12
    assert plan.kind is AttackKind.DESIGNED_COVERT


def test_designed_attack_precondition(fighter):
    with pytest.raises(PreconditionError):
        synthesize_designed_attack(fighter, make_scenario(4, 3, [1], [1]))
    with pytest.raises(PreconditionError):
        synthesize_designed_attack(fighter, make_scenario(4, 3, [2], [1]))


@pytest.mark.parametrize("method", ["stacked", "feedback"])
def test_designed_attack_against_svd_oracle(method):
    # Three states, two attacked inputs, one clean output: the clean output
    # cannot be injective, so a transmission-zero direction exists.
    rng = np.random.default_rng(11)
    sys = random_system(rng, 3, 2, 2)
    scen = make_scenario(2, 2, [1, 2], [2])
    N = 6
    plan = synthesize_designed_attack(sys, scen, N=N, method=method)
    G = stacked_attack_map(sys, scen, N)
    clean = np.tile([True, False], N)
    # Oracle: explicit SVD null space of the clean stacked rows.
    K = null_space(G[clean], tol=1e-10)
    v = plan.actuator_signal.ravel()
    assert np.linalg.norm(v - K @ (K.T @ v)) <= 1e-9 * np.linalg.norm(v)
    assert np.max(np.abs(G[clean] @ v)) <= 1e-9
    assert np.max(np.abs(G[~clean] @ v)) >= 1e-3
    assert np.max(np.abs(v)) == pytest.approx(1.0)


def test_designed_attack_fighter_threat_is_covert(fighter):
    scen = make_scenario(4, 3, [2, 3, 4], [3])
    plan = synthesize_designed_attack(fighter, scen, N=100)
    raw = attack_output_response(fighter, scen, plan.actuator_signal)
    assert np.max(np.abs(raw[:, :2])) <= 1e-9
    assert np.max(np.abs(raw[:, 2])) >= 1e-3
