"""Seeded simulation of the attacked plant, with or without input coding.

Noise is generated by a Philox-4x64 counter-based generator (seeded through
numpy's ``SeedSequence``) whose 53-bit uniforms are turned into Gaussians by
Box-Muller: for consecutive uniform pairs ``(u1, u2)``,
``z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2)`` and ``z1 = ... sin(2 pi u2)``.
The flattened stream fills an ``N x (n + p)`` array row by row; the first
``n`` columns are process noise, the last ``p`` measurement noise.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .attacks import AttackScenario, AttackSignalPlan
from .errors import DimensionError, ValidationError
from .lti import StateSpaceSystem

INPUT_KINDS = ("zero", "step", "ramp", "sinusoid", "explicit")


@dataclass(frozen=True)
class InputProgram:
    """Nominal command ``u(k)``; applied to ``channels`` (1-based) or all inputs."""

    kind: str = "zero"
    level: float = 1.0
    slope: float = 1.0
    amplitude: float = 1.0
    period: float = 20.0
    values: Optional[tuple] = None
    channels: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ValidationError(f"unknown input program {self.kind!r}; expected one of {INPUT_KINDS}")
        if self.kind == "explicit" and self.values is None:
            raise ValidationError("explicit input program needs values")
        if self.kind == "sinusoid" and not self.period > 0:
            raise ValidationError("sinusoid period must be positive")

    def generate(self, N: int, m: int) -> np.ndarray:
        k = np.arange(N, dtype=np.float64)
        if self.kind == "explicit":
            U = np.array(self.values, dtype=np.float64)
            if U.ndim == 1:
                U = U.reshape(-1, 1)
            if U.shape[0] < N or U.shape[1] != m:
                raise DimensionError(f"explicit input must be at least {N}x{m}, got {U.shape}")
            return U[:N].copy()
        if self.kind == "zero":
            column = np.zeros(N)
        elif self.kind == "step":
            column = np.full(N, float(self.level))
        elif self.kind == "ramp":
            column = self.slope * k
        else:
            column = self.amplitude * np.sin(2 * np.pi * k / self.period)
        U = np.zeros((N, m))
        cols = range(m) if self.channels is None else [c - 1 for c in self.channels]
        for c in cols:
            if not 0 <= c < m:
                raise ValidationError(f"input channel {c + 1} outside 1..{m}")
            U[:, c] = column
        return U


def _per_channel(std, size, name) -> np.ndarray:
    arr = np.asarray(std, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(size, float(arr))
    if arr.shape != (size,):
        raise DimensionError(f"{name} must be a scalar or length-{size} sequence")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite and nonnegative")
    return arr


@dataclass(frozen=True)
class SimulationConfig:
    horizon: int = 100
    seed: int = 0
    process_noise_std: object = 0.0
    measurement_noise_std: object = 0.0
    input_program: InputProgram = field(default_factory=InputProgram)
    attack_onset: int = 0
    x0: Optional[tuple] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be at least 1")
        if self.attack_onset < 0:
            raise ValidationError("attack onset must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")

    def to_dict(self) -> dict:
        data = asdict(self)
        for key in ("process_noise_std", "measurement_noise_std"):
            v = data[key]
            data[key] = float(v) if np.ndim(v) == 0 else [float(x) for x in v]
        return data

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def gaussian_noise(seed: int, rows: int, cols: int) -> np.ndarray:
    """Unit Gaussian ``rows x cols`` array from the documented Box-Muller stream."""
    total = rows * cols
    if total == 0:
        return np.zeros((rows, cols))
    pairs = (total + 1) // 2
    gen = np.random.Generator(np.random.Philox(int(seed)))
    uni = gen.random(2 * pairs)
    u1, u2 = uni[0::2], uni[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(2.0 * np.pi * u2)
    z[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return z[:total].reshape(rows, cols)


@dataclass(frozen=True)
class SimulationTrace:
    """Time-indexed record of one run; every array has ``horizon`` rows."""

    k: np.ndarray
    x: np.ndarray
    u: np.ndarray
    u_e: Optional[np.ndarray]
    u_d: Optional[np.ndarray]
    a_u: np.ndarray
    a_y: np.ndarray
    y: np.ndarray
    noise_w: np.ndarray
    noise_v: np.ndarray
    scenario: AttackScenario
    metadata: dict

    @property
    def horizon(self) -> int:
        return self.k.shape[0]

    def columns(self) -> list:
        sc = self.scenario
        n, m, p = self.x.shape[1], self.u.shape[1], self.y.shape[1]
        cols = ["k"] + [f"x{i}" for i in range(1, n + 1)] + [f"u{i}" for i in range(1, m + 1)]
        if self.u_d is not None:
            cols += [f"ue{i}" for i in range(1, m + 1)] + [f"ud{i}" for i in range(1, m + 1)]
        cols += [f"au{i}" for i in sc.compromised_inputs] + [f"ay{q}" for q in sc.compromised_outputs]
        cols += [f"y{q}" for q in range(1, p + 1)]
        return cols

    def table(self) -> np.ndarray:
        parts = [self.k.reshape(-1, 1).astype(np.float64), self.x, self.u]
        if self.u_d is not None:
            parts += [self.u_e, self.u_d]
        parts += [self.a_u, self.a_y, self.y]
        return np.hstack(parts)

    def to_csv(self, path) -> Path:
        """Write the trace with 17 significant digits and a ``.meta.json`` side-car."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = self.columns()
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in self.table():
                writer.writerow([str(int(row[0]))] + [format(v, ".17g") for v in row[1:]])
        meta = path.with_suffix(".meta.json")
        meta.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return path


def _lift(signal: np.ndarray, selector: np.ndarray, N: int, onset: int) -> tuple:
    """Place a plan signal on the time axis and map it through ``selector``."""
    width = selector.shape[1]
    aligned = np.zeros((N, width))
    if signal is not None and onset < N:
        span = min(signal.shape[0], N - onset)
        aligned[onset:onset + span] = signal[:span]
    return aligned, aligned @ selector.T


def simulate(
    sys: StateSpaceSystem,
    scenario: AttackScenario,
    plan: Optional[AttackSignalPlan] = None,
    scheme=None,
    config: SimulationConfig = SimulationConfig(),
) -> SimulationTrace:
    """Run one trajectory of the (optionally coded) plant.

    Without a scheme the actuator attack enters as ``B L_a a_u``; with one it
    is added to the encoder output before the decoder. The sensor attack adds
    ``D_a a_y`` to the measurement. Absent a plan, both attacks are zero.
    """
    scenario.check_system(sys)
    N, k0 = config.horizon, config.attack_onset
    if plan is not None:
        if plan.actuator_signal.shape[1] != scenario.m_a or plan.sensor_signal.shape[1] != scenario.p_a:
            raise DimensionError("attack plan channel counts do not match the scenario")
        if plan.horizon < N - k0:
            raise ValidationError(f"plan covers {plan.horizon} steps but the run needs {N - k0} after onset")
    if scheme is not None and scheme.m != sys.m:
        raise DimensionError(f"scheme is for m={scheme.m} inputs, system has {sys.m}")

    U = config.input_program.generate(N, sys.m)
    a_u, UA = _lift(plan.actuator_signal if plan else None, scenario.L_a, N, k0)
    a_y, YA = _lift(plan.sensor_signal if plan else None, scenario.D_a, N, k0)

    w_std = _per_channel(config.process_noise_std, sys.n, "process_noise_std")
    v_std = _per_channel(config.measurement_noise_std, sys.p, "measurement_noise_std")
    if np.any(w_std > 0) or np.any(v_std > 0):
        Z = gaussian_noise(config.seed, N, sys.n + sys.p)
        W = Z[:, :sys.n] * w_std
        V = Z[:, sys.n:] * v_std
    else:
        W = np.zeros((N, sys.n))
        V = np.zeros((N, sys.p))
    x0 = np.zeros(sys.n) if config.x0 is None else np.asarray(config.x0, dtype=np.float64)
    if x0.shape != (sys.n,):
        raise DimensionError(f"x0 must have length {sys.n}")

    coding = None if scheme is None else scheme.matrices()
    X, Y, UE, UD = _backend.simulate_loop(sys.A, sys.B, sys.C, x0, U, UA, YA, W, V, coding)
    metadata = {
        "config_hash": config.digest(),
        "seed": int(config.seed),
        "horizon": N,
        "attack_onset": k0,
        "scenario": scenario.describe(),
        "attack": None if plan is None else plan.kind.value,
        "scheme": None if scheme is None else scheme.label,
        "backend": _backend.BACKEND,
    }
    return SimulationTrace(
        k=np.arange(N), x=X, u=U, u_e=UE, u_d=UD, a_u=a_u, a_y=a_y, y=Y,
        noise_w=W, noise_v=V, scenario=scenario, metadata=metadata,
    )


@dataclass(frozen=True)
class TraceComparison:
    max_deviation: dict
    first_divergence: dict
    tolerance: float

    @property
    def earliest(self) -> Optional[int]:
        steps = [k for k in self.first_divergence.values() if k is not None]
        return min(steps) if steps else None

    @property
    def worst(self) -> float:
        return max(self.max_deviation.values(), default=0.0)


def compare_traces(a: SimulationTrace, b: SimulationTrace, outputs: Optional[Sequence[int]] = None, tol: float = 1e-9) -> TraceComparison:
    """Per-output max-abs deviation of ``y`` and first step exceeding ``tol``."""
    if a.y.shape != b.y.shape:
        raise DimensionError(f"trace shapes differ: {a.y.shape} vs {b.y.shape}")
    outputs = range(1, a.y.shape[1] + 1) if outputs is None else outputs
    dev, first = {}, {}
    for q in outputs:
        d = np.abs(a.y[:, q - 1] - b.y[:, q - 1])
        dev[q] = float(d.max()) if d.size else 0.0
        hits = np.nonzero(d > tol)[0]
        first[q] = int(hits[0]) if hits.size else None
    return TraceComparison(dev, first, tol)


def max_state_deviation(a: SimulationTrace, b: SimulationTrace) -> float:
    return float(np.max(np.abs(a.x - b.x)))


def config_from_dict(data: dict) -> SimulationConfig:
    data = dict(data)
    prog = data.pop("input_program", None) or {}
    if isinstance(prog, dict):
        prog = dict(prog)
        for key in ("values", "channels"):
            if prog.get(key) is not None:
                prog[key] = tuple(tuple(r) if isinstance(r, list) else r for r in prog[key])
        prog = InputProgram(**prog)
    for key in ("process_noise_std", "measurement_noise_std"):
        if isinstance(data.get(key), list):
            data[key] = tuple(data[key])
    if isinstance(data.get("x0"), list):
        data["x0"] = tuple(data["x0"])
    unknown = set(data) - {"horizon", "seed", "process_noise_std", "measurement_noise_std", "attack_onset", "x0"}
    if unknown:
        raise ValidationError(f"unknown simulation fields: {sorted(unknown)}")
    return SimulationConfig(input_program=prog, **data)


def noise_floor(trace: SimulationTrace, outputs: Sequence[int]) -> float:
    """RMS of the measurement noise injected on ``outputs`` (1-based)."""
    v = trace.noise_v[:, [q - 1 for q in outputs]]
    return float(math.sqrt(np.mean(v**2))) if v.size else 0.0
