"""Built-in scenario files.

``fighter`` is a linearized fighter-aircraft flight-control model sampled at
0.5 s (matrices at their printed four-digit precision), together with the
published decoder feedthrough. ``example1`` is the two-state identity plant.
"""

import copy

import numpy as np

FIGHTER_A = [
    [1.0214, 0.0054, 0.0003, 0.4176, -0.0013],
    [0.0, 0.6307, 0.0821, 0.0, -0.3792],
    [0.0, -3.4485, 0.3779, 0.0, 1.1569],
    [1.1199, 0.0024, 0.0001, 1.0374, -0.0003],
    [0.0, 0.3802, -0.0156, 0.0, 0.8062],
]
FIGHTER_B = [
    [0.1823, -0.1798, -0.1795, 0.0008],
    [0.0, -0.0639, 0.0639, 0.1397],
    [0.0, -1.5840, 1.5840, 0.2936],
    [0.8075, -0.6456, -0.6456, 0.0013],
    [0.0, -0.1005, 0.1005, -0.4114],
]
FIGHTER_C = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
]
FIGHTER_D_D = [
    [1.0, 0.575, -0.0026, 0.574],
    [0.0, 0.7911, 0.0009, -0.2085],
    [0.0, -0.2085, 0.0009, 0.7918],
    [0.0, 0.0009, 1.0, 0.0009],
]
#: Half a unit in the last printed place of the four-digit matrices.
PRINTED_PRECISION_TOL = 5e-4


def _fighter() -> dict:
    scenarios = {}
    for i in range(1, 5):
        scenarios[f"input{i}-sensor1"] = {"inputs": [i], "outputs": [1]}
        scenarios[f"input{i}-sensors12"] = {"inputs": [i], "outputs": [1, 2]}
        scenarios[f"input{i}-all-sensors"] = {"inputs": [i], "outputs": [1, 2, 3]}
    scenarios["inputs234-sensor3"] = {"inputs": [2, 3, 4], "outputs": [3]}
    D_d = np.array(FIGHTER_D_D)
    I4 = np.eye(4).tolist()
    return {
        "format": "covertsec-scenario/1",
        "name": "fighter",
        "system": {"A": FIGHTER_A, "B": FIGHTER_B, "C": FIGHTER_C, "sample_period": 0.5},
        "scenarios": scenarios,
        "defense": {
            "secure_input": 1,
            "secure_outputs": [1, 2],
            "threat": {"inputs": [2, 3, 4], "outputs": [3]},
            "theorem2_tolerance": PRINTED_PRECISION_TOL,
        },
        "simulation": {
            "horizon": 40,
            "seed": 7,
            "process_noise_std": 1e-3,
            "measurement_noise_std": 1e-3,
            "attack_onset": 0,
            "input_program": {"kind": "zero"},
        },
        "attack_signal": {"kind": "step", "level": 1.0},
        "scheme": {
            "decoder": {"A_d": I4, "B_d": FIGHTER_D_D, "C_d": (-D_d).tolist(), "D_d": FIGHTER_D_D, "T": I4},
            "exact": True,
            "label": "published",
        },
    }


def _example1() -> dict:
    I2 = [[1.0, 0.0], [0.0, 1.0]]
    return {
        "format": "covertsec-scenario/1",
        "name": "example1",
        "system": {"A": I2, "B": I2, "C": I2, "sample_period": 1.0},
        "scenarios": {
            "both-inputs-sensor1": {"inputs": [1, 2], "outputs": [1]},
            "both-inputs-both-sensors": {"inputs": [1, 2], "outputs": [1, 2]},
            "input1-sensor1": {"inputs": [1], "outputs": [1]},
        },
        "simulation": {"horizon": 50, "seed": 0, "attack_onset": 0, "input_program": {"kind": "zero"}},
        "attack_signal": {"kind": "step", "level": 1.0},
    }


def random_fixture(n: int, m: int, p: int, seed: int) -> dict:
    """Random plant with a defense spec: input 1 and outputs 1, 2 secured.

    The threat takes at most two further inputs (two secured sensors cannot
    expose more) and, when ``p > 3``, sensor ``p``.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= 0.9 / max(1e-12, np.max(np.abs(np.linalg.eigvals(A))))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    threat_inputs = list(range(2, min(m, 3) + 1))
    threat_outputs = [p] if p > 3 else []
    data = {
        "format": "covertsec-scenario/1",
        "name": f"random-{n}-{m}-{p}-{seed}",
        "system": {"A": A.tolist(), "B": B.tolist(), "C": C.tolist(), "sample_period": 1.0},
        "scenarios": {
            "threat": {"inputs": threat_inputs, "outputs": threat_outputs},
            "input1-all-sensors": {"inputs": [1], "outputs": list(range(1, p + 1))},
        },
        "simulation": {"horizon": 60, "seed": seed, "attack_onset": 5, "input_program": {"kind": "zero"}},
        "attack_signal": {"kind": "step", "level": 1.0},
    }
    if m >= 2 and p >= 3:
        data["defense"] = {
            "secure_input": 1,
            "secure_outputs": [1, 2],
            "threat": {"inputs": threat_inputs, "outputs": threat_outputs},
        }
    return data


FIXTURES = {"fighter": _fighter, "example1": _example1}


def fixture(name: str) -> dict:
    try:
        builder = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}") from None
    # Callers may edit the result; keep the module-level matrices pristine.
    return copy.deepcopy(builder())
