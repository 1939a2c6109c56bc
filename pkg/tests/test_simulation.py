import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertsec.attacks import (
    AttackKind,
    AttackSignalPlan,
    make_scenario,
    synthesize_covert_attack,
    synthesize_designed_attack,
)
from covertsec.coding import DefenseSpecification, build_decoder_convolution, check_theorem2, design_decoder
from covertsec.errors import DimensionError, ValidationError
from covertsec.lti import block_toeplitz, build_stacked_io, markov_sequence
from covertsec.simulation import (
    InputProgram,
    SimulationConfig,
    compare_traces,
    config_from_dict,
    gaussian_noise,
    max_state_deviation,
    noise_floor,
    simulate,
)

from conftest import random_system


def _plan(scen, a_u, a_y):
    a_u = np.asarray(a_u, dtype=float)
    return AttackSignalPlan(a_u.shape[0], a_u, np.asarray(a_y, dtype=float), AttackKind.UNMASKED, scen, 1)


def test_zero_everything_gives_zero_trace(fighter):
    tr = simulate(fighter, make_scenario(4, 3), config=SimulationConfig(horizon=20))
    for arr in (tr.x, tr.y, tr.u, tr.a_u, tr.a_y):
        assert not np.any(arr)


@pytest.mark.parametrize("kind", ["zero", "step", "ramp", "sinusoid"])
def test_input_programs(kind):
    U = InputProgram(kind=kind, level=2.0, slope=0.5, amplitude=3.0, period=8.0, channels=(2,)).generate(10, 3)
    k = np.arange(10)
    expected = {"zero": 0 * k, "step": 2.0 + 0 * k, "ramp": 0.5 * k, "sinusoid": 3.0 * np.sin(2 * np.pi * k / 8)}[kind]
    np.testing.assert_allclose(U[:, 1], expected)
    assert not np.any(U[:, [0, 2]])


def test_input_program_validation():
    with pytest.raises(ValidationError):
        InputProgram(kind="chirp")
    with pytest.raises(ValidationError):
        InputProgram(kind="explicit")
    with pytest.raises(DimensionError):
        InputProgram(kind="explicit", values=((1.0,),)).generate(3, 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_superposition(seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, 3, 2, 2)
    scen = make_scenario(2, 2, [1], [2])
    N = 15
    def run(U, a_u, a_y):
        cfg = SimulationConfig(horizon=N, input_program=InputProgram(kind="explicit", values=tuple(map(tuple, U))))
        return simulate(sys, scen, _plan(scen, a_u, a_y), config=cfg)

    parts = [(rng.standard_normal((N, 2)), rng.standard_normal((N, 1)), rng.standard_normal((N, 1))) for _ in range(2)]
    t1, t2 = run(*parts[0]), run(*parts[1])
    t12 = run(*(a + b for a, b in zip(parts[0], parts[1])))
    t0 = run(np.zeros((N, 2)), np.zeros((N, 1)), np.zeros((N, 1)))
    np.testing.assert_allclose(t12.y, t1.y + t2.y - t0.y, atol=1e-10)
    np.testing.assert_allclose(t12.x, t1.x + t2.x - t0.x, atol=1e-10)


def test_stacked_model_agreement_uncoded():
    rng = np.random.default_rng(4)
    sys = random_system(rng, 4, 2, 3)
    scen = make_scenario(2, 3, [2], [1, 3])
    N = 12
    U = rng.standard_normal((N, 2))
    a_u, a_y = rng.standard_normal((N, 1)), rng.standard_normal((N, 2))
    x0 = rng.standard_normal(4)
    cfg = SimulationConfig(horizon=N, x0=tuple(x0), input_program=InputProgram(kind="explicit", values=tuple(map(tuple, U))))
    tr = simulate(sys, scen, _plan(scen, a_u, a_y), config=cfg)
    io = build_stacked_io(sys, scen, N)
    Y = io.observability @ x0 + io.input_toeplitz @ U.ravel() + io.attack_toeplitz @ a_u.ravel() + io.sensor_block @ a_y.ravel()
    np.testing.assert_allclose(tr.y.ravel(), Y, rtol=1e-9, atol=1e-9 * (1 + np.abs(Y).max()))


def test_stacked_model_agreement_coded():
    rng = np.random.default_rng(5)
    sys = random_system(rng, 5, 3, 3)
    spec = DefenseSpecification(1, (1, 2), make_scenario(3, 3, [2, 3], [3]))
    scheme = design_decoder(sys, spec, seed=1)
    scen = spec.threat
    N = 10
    a_u = rng.standard_normal((N, 2))
    tr = simulate(sys, scen, _plan(scen, a_u, np.zeros((N, 1))), scheme=scheme, config=SimulationConfig(horizon=N))
    C_N = block_toeplitz(markov_sequence(sys, sys.B, N - 1), N)
    Y = C_N @ build_decoder_convolution(scheme, scen, N).matrix @ a_u.ravel()
    np.testing.assert_allclose(tr.y.ravel(), Y, atol=1e-9 * (1 + np.abs(Y).max()))


def test_box_muller_stream_matches_documented_algorithm():
    # Oracle: Philox uniforms paired and transformed by hand.
    uni = np.random.Generator(np.random.Philox(42)).random(6)
    z = []
    for u1, u2 in zip(uni[0::2], uni[1::2]):
        r = np.sqrt(-2.0 * np.log(1.0 - u1))
        z += [r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)]
    np.testing.assert_allclose(gaussian_noise(42, 1, 5).ravel(), z[:5], rtol=1e-14)


def test_noise_reproducible_and_seed_dependent(fighter):
    scen = make_scenario(4, 3)
    cfg = SimulationConfig(horizon=30, seed=9, process_noise_std=1e-3, measurement_noise_std=1e-3)
    a, b = simulate(fighter, scen, config=cfg), simulate(fighter, scen, config=cfg)
    np.testing.assert_array_equal(a.noise_w, b.noise_w)
    np.testing.assert_array_equal(a.noise_v, b.noise_v)
    c = simulate(fighter, scen, config=SimulationConfig(horizon=30, seed=10, measurement_noise_std=1e-3))
    assert not np.array_equal(a.noise_v, c.noise_v)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_output_noise_variance(seed):
    # Static plant (A=0, C=I): the output is pure measurement noise.
    from covertsec.lti import StateSpaceSystem

    sys = StateSpaceSystem(np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1))
    std = 0.3
    tr = simulate(sys, make_scenario(1, 1), config=SimulationConfig(horizon=10_000, seed=seed, measurement_noise_std=std))
    ratio = np.var(tr.y) / std**2
    assert 1 / 3 <= ratio <= 3
    assert noise_floor(tr, [1]) == pytest.approx(std, rel=0.05)


def test_plan_checks(fighter):
    scen = make_scenario(4, 3, [1], [1])
    with pytest.raises(ValidationError):
        simulate(fighter, scen, _plan(scen, np.ones((5, 1)), np.zeros((5, 1))), config=SimulationConfig(horizon=10))
    with pytest.raises(DimensionError):
        simulate(fighter, scen, _plan(scen, np.ones((10, 2)), np.zeros((10, 1))), config=SimulationConfig(horizon=10))


def test_attack_onset_shifts_signals(fighter):
    scen = make_scenario(4, 3, [1], [1])
    plan = synthesize_covert_attack(fighter, scen, np.ones((15, 1)), 15)
    tr = simulate(fighter, scen, plan, config=SimulationConfig(horizon=20, attack_onset=5))
    assert not np.any(tr.a_u[:5]) and np.all(tr.a_u[5:] == 1.0)
    assert not np.any(tr.x[:6])


def test_compare_identical_traces(fighter):
    tr = simulate(fighter, make_scenario(4, 3), config=SimulationConfig(horizon=10, seed=1, measurement_noise_std=0.1))
    cmp = compare_traces(tr, tr)
    assert cmp.worst == 0.0 and cmp.earliest is None


def test_compare_rejects_shape_mismatch(fighter):
    scen = make_scenario(4, 3)
    with pytest.raises(DimensionError):
        compare_traces(simulate(fighter, scen, config=SimulationConfig(horizon=5)), simulate(fighter, scen, config=SimulationConfig(horizon=6)))


def test_fig2_pair_is_covert_and_destabilizing(fighter):
    scen = make_scenario(4, 3, [1], [1])
    cfg = SimulationConfig(horizon=100)
    plan = synthesize_covert_attack(fighter, scen, np.ones((100, 1)), 100)
    base, att = simulate(fighter, scen, config=cfg), simulate(fighter, scen, plan, config=cfg)
    assert compare_traces(att, base).worst <= 1e-9
    assert max_state_deviation(att, base) >= 1e3


def test_fig4_coding_exposes_designed_attack(fighter, published_scheme):
    scen = make_scenario(4, 3, [2, 3, 4], [3])
    cfg = SimulationConfig(horizon=30)
    plan = synthesize_designed_attack(fighter, scen, N=30)
    base = simulate(fighter, scen, scheme=published_scheme, config=cfg)
    att = simulate(fighter, scen, plan, scheme=published_scheme, config=cfg)
    assert compare_traces(att, base, outputs=[1, 2]).worst >= 1e-6


def test_decoder_aware_attack_stays_covert(fighter, published_scheme):
    # An adversary who knows the decoder can still zero the secured outputs;
    # this is the gap left when the certificate does not hold.
    scen = make_scenario(4, 3, [2, 3, 4], [3])
    cfg = SimulationConfig(horizon=30)
    plan = synthesize_designed_attack(fighter, scen, N=30, scheme=published_scheme, require_designed=False)
    base = simulate(fighter, scen, scheme=published_scheme, config=cfg)
    att = simulate(fighter, scen, plan, scheme=published_scheme, config=cfg)
    assert compare_traces(att, base).worst <= 1e-9


def test_certified_coding_first_divergence():
    rng = np.random.default_rng(21)
    sys = random_system(rng, 5, 3, 4)
    spec = DefenseSpecification(1, (1, 2), make_scenario(3, 4, [2, 3], [4]))
    scheme = design_decoder(sys, spec, seed=0)
    r_d = check_theorem2(sys, scheme, spec).r_d
    onset, N = 5, 40
    cfg = SimulationConfig(horizon=N, attack_onset=onset)
    plan = _plan(spec.threat, np.ones((N - onset, 2)), np.zeros((N - onset, 1)))
    base = simulate(sys, spec.threat, scheme=scheme, config=cfg)
    att = simulate(sys, spec.threat, plan, scheme=scheme, config=cfg)
    first = compare_traces(att, base, outputs=[1, 2]).first_divergence
    # Secured row 1 is blind at r_d, so output 1 lags output 2 by one step.
    assert first[2] == onset + r_d
    assert first[1] == onset + r_d + 1


def test_csv_export(tmp_path, fighter, published_scheme):
    scen = make_scenario(4, 3, [2], [3])
    plan = _plan(scen, np.full((4, 1), 1 / 3), np.zeros((4, 1)))
    tr = simulate(fighter, scen, plan, scheme=published_scheme, config=SimulationConfig(horizon=4, seed=3))
    path = tr.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == (
        ["k"] + [f"x{i}" for i in range(1, 6)] + [f"u{i}" for i in range(1, 5)]
        + [f"ue{i}" for i in range(1, 5)] + [f"ud{i}" for i in range(1, 5)] + ["au2", "ay3", "y1", "y2", "y3"]
    )
    assert rows[1][0] == "0"
    au = rows[1][rows[0].index("au2")]
    assert au == "0.33333333333333331" and float(au) == 1 / 3
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    assert meta["seed"] == 3 and meta["scenario"] == "inputs {2}, sensors {3}" and len(meta["config_hash"]) == 16


def test_config_round_trip():
    cfg = SimulationConfig(horizon=7, seed=2, process_noise_std=(0.1, 0.2), input_program=InputProgram(kind="step", channels=(1,)))
    back = config_from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.digest() == cfg.digest()
    with pytest.raises(ValidationError):
        config_from_dict({"horizon": 3, "bogus": 1})
