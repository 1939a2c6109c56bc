"""Covert-attack feasibility and synthesis.

Channel indices in this module's public API are 1-based, matching the usual
numbering of plant inputs and sensors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _backend
from .errors import (
    DimensionError,
    FeasibilityError,
    NoActuatorChannelError,
    NoDesignedAttackError,
    PreconditionError,
    ValidationError,
)
from .lti import (
    INFINITE,
    ZERO_RTOL,
    RelativeDegreeProfile,
    StateSpaceSystem,
    block_toeplitz,
    is_left_invertible,
    markov_sequence,
    null_space,
    numerical_rank,
    relative_degree,
    zero_threshold,
)


def _selection(size: int, indices: tuple) -> np.ndarray:
    S = np.zeros((size, len(indices)))
    for col, idx in enumerate(indices):
        S[idx - 1, col] = 1.0
    S.setflags(write=False)
    return S


def _index_set(indices: Iterable[int], upper: int, what: str) -> tuple:
    out = []
    for raw in indices:
        idx = int(raw)
        if idx != raw:
            raise ValidationError(f"{what} index {raw!r} is not an integer")
        if not 1 <= idx <= upper:
            raise ValidationError(f"{what} index {idx} outside 1..{upper}")
        if idx in out:
            raise ValidationError(f"duplicate {what} index {idx}")
        out.append(idx)
    return tuple(out)


@dataclass(frozen=True)
class AttackScenario:
    """Compromised actuator and sensor channels with their selection matrices."""

    m: int
    p: int
    compromised_inputs: tuple
    compromised_outputs: tuple

    def __post_init__(self):
        if self.m < 1 or self.p < 1:
            raise ValidationError("m and p must be positive")
        object.__setattr__(self, "compromised_inputs", _index_set(self.compromised_inputs, self.m, "input"))
        object.__setattr__(self, "compromised_outputs", _index_set(self.compromised_outputs, self.p, "output"))

    @property
    def m_a(self) -> int:
        return len(self.compromised_inputs)

    @property
    def p_a(self) -> int:
        return len(self.compromised_outputs)

    @property
    def L_a(self) -> np.ndarray:
        return _selection(self.m, self.compromised_inputs)

    @property
    def D_a(self) -> np.ndarray:
        return _selection(self.p, self.compromised_outputs)

    @property
    def D_a_star(self) -> np.ndarray:
        D = self.D_a
        return D @ D.T

    def attack_input_map(self, sys: StateSpaceSystem) -> np.ndarray:
        """``B_a = B L_a``."""
        return sys.B @ self.L_a

    def check_system(self, sys: StateSpaceSystem) -> None:
        if (sys.m, sys.p) != (self.m, self.p):
            raise DimensionError(
                f"scenario is for m={self.m}, p={self.p} but system has m={sys.m}, p={sys.p}"
            )

    def describe(self) -> str:
        ins = ",".join(map(str, self.compromised_inputs)) or "-"
        outs = ",".join(map(str, self.compromised_outputs)) or "-"
        return f"inputs {{{ins}}}, sensors {{{outs}}}"


def make_scenario(m: int, p: int, inputs: Iterable[int] = (), outputs: Iterable[int] = ()) -> AttackScenario:
    return AttackScenario(m, p, tuple(inputs), tuple(outputs))


class AttackKind(enum.Enum):
    ARBITRARY_COVERT = "arbitrary"
    DESIGNED_COVERT = "designed"
    UNMASKED = "unmasked"


@dataclass(frozen=True)
class AttackSignalPlan:
    """Actuator and sensor injections over ``horizon`` steps from onset.

    ``actuator_signal`` is ``horizon x m_a``, ``sensor_signal`` is
    ``horizon x p_a``; rows before ``relative_degree`` of the sensor signal
    are exactly zero.
    """

    horizon: int
    actuator_signal: np.ndarray
    sensor_signal: np.ndarray
    kind: AttackKind
    scenario: AttackScenario
    relative_degree: float


@dataclass(frozen=True)
class FeasibilityReport:
    scenario: AttackScenario
    feasible_arbitrary: bool
    witness_output: Optional[int]
    feasible_designed: bool
    per_output_relative_degrees: RelativeDegreeProfile
    compromised_view_degrees: RelativeDegreeProfile
    required_sensors: tuple
    decoupled: bool = False

    @property
    def verdict(self) -> str:
        if self.feasible_arbitrary:
            return "FEASIBLE (arbitrary)"
        if self.feasible_designed:
            return "INFEASIBLE (arbitrary); FEASIBLE (designed)"
        return "INFEASIBLE"


def check_covert_feasibility(sys: StateSpaceSystem, scenario: AttackScenario) -> FeasibilityReport:
    """Decide whether every actuator attack on the scenario can be hidden.

    The row-wise test compares ``(C, A, B_a)`` against ``(D_a* C, A, B_a)``.
    Because ``D_a*`` is a 0/1 diagonal, row ``q`` of the second triple is
    either row ``q`` of the first (sensor compromised) or zero. Hence the
    condition fails exactly at outputs with a finite relative degree that are
    not compromised, and the minimal sensor set is the set of outputs with
    finite relative degree.
    """
    scenario.check_system(sys)
    if scenario.m_a == 0:
        raise NoActuatorChannelError("at least one compromised actuator channel is required")
    B_a = scenario.attack_input_map(sys)
    D_star = scenario.D_a_star
    tol = zero_threshold(sys.A, B_a, sys.C)
    full = relative_degree(sys, B_a, tol=tol)
    masked = relative_degree(sys, B_a, output_map=D_star @ sys.C, tol=tol)

    witness = None
    for q in range(sys.p):
        r, r_star = full.per_output[q], masked.per_output[q]
        if r == INFINITE and r_star == INFINITE:
            continue
        if r != r_star:
            witness = q + 1
            break
        lhs = markov_sequence(sys, B_a, int(r))[-1][q]
        rhs = markov_sequence(sys, B_a, int(r), output_map=D_star @ sys.C)[-1][q]
        if np.max(np.abs(lhs - rhs)) > tol:
            witness = q + 1
            break
    feasible = witness is None

    required = tuple(q + 1 for q in full.finite_outputs())
    feasible_designed = False
    if not feasible:
        uncompromised = (np.eye(sys.p) - D_star) @ sys.C
        feasible_designed = not is_left_invertible(sys, B_a, uncompromised)
    return FeasibilityReport(
        scenario=scenario,
        feasible_arbitrary=feasible,
        witness_output=witness,
        feasible_designed=feasible_designed,
        per_output_relative_degrees=full,
        compromised_view_degrees=masked,
        required_sensors=required,
        decoupled=feasible and not required,
    )


def _coding_tuple(scheme):
    return None if scheme is None else scheme.matrices()


def attack_output_response(sys: StateSpaceSystem, scenario: AttackScenario, actuator_signal, scheme=None) -> np.ndarray:
    """Raw output contribution ``C z(k)`` of an actuator attack alone.

    ``z`` is an attacker-side copy of the plant (and decoder, when a scheme is
    given) driven only by ``L_a a_u``. Using the same kernel as the plant
    simulation makes the cancellation exact for zero initial state and input.
    """
    a_u = np.atleast_2d(np.asarray(actuator_signal, dtype=np.float64))
    if a_u.shape[1] != scenario.m_a:
        raise DimensionError(f"actuator signal must have {scenario.m_a} columns, got {a_u.shape}")
    N = a_u.shape[0]
    zeros_m = np.zeros((N, sys.m))
    UA = a_u @ scenario.L_a.T
    _, Y, _, _ = _backend.simulate_loop(
        sys.A, sys.B, sys.C, np.zeros(sys.n), zeros_m, UA,
        np.zeros((N, sys.p)), np.zeros((N, sys.n)), np.zeros((N, sys.p)),
        _coding_tuple(scheme),
    )
    return Y


def _masking_signal(sys, scenario, a_u, first_nonzero, scheme=None) -> np.ndarray:
    Y = attack_output_response(sys, scenario, a_u, scheme)
    a_y = -(Y @ scenario.D_a)
    if first_nonzero == INFINITE:
        a_y[:] = 0.0
    else:
        a_y[: int(first_nonzero)] = 0.0
    return a_y


def synthesize_covert_attack(sys: StateSpaceSystem, scenario: AttackScenario, actuator_signal, N: int) -> AttackSignalPlan:
    """Pair an arbitrary actuator attack with the sensor signal that hides it.

    ``a_y(k) = -sum_g D_a^T C A^(r_a+g-1) B_a a_u(k-g-r_a)`` for ``k >= r_a``,
    evaluated as the running state of an attacker-side plant copy rather than
    as a convolution sum.
    """
    report = check_covert_feasibility(sys, scenario)
    if not report.feasible_arbitrary:
        raise FeasibilityError(
            f"arbitrary covert attack infeasible on {scenario.describe()}: "
            f"output {report.witness_output} sees the attack but is not compromised",
            witness_output=report.witness_output,
        )
    a_u = np.atleast_2d(np.asarray(actuator_signal, dtype=np.float64))
    if a_u.shape[0] < N:
        raise ValidationError(f"actuator signal has {a_u.shape[0]} steps, need {N}")
    a_u = np.array(a_u[:N])
    r_a = report.per_output_relative_degrees.minimum
    a_y = _masking_signal(sys, scenario, a_u, r_a)
    return AttackSignalPlan(N, a_u, a_y, AttackKind.ARBITRARY_COVERT, scenario, r_a)


def stacked_attack_map(sys: StateSpaceSystem, scenario: AttackScenario, N: int, scheme=None) -> np.ndarray:
    """Map from stacked ``U_a(N)`` to stacked raw outputs ``Y(N)``.

    Without coding this is the attack Toeplitz matrix; with a scheme the
    attack passes through the decoder first.
    """
    L_a = scenario.L_a
    if scheme is None:
        markov = markov_sequence(sys, sys.B @ L_a, max(N - 1, 1))
        return block_toeplitz(markov, N)
    from .coding import build_decoder_convolution

    markov = markov_sequence(sys, sys.B, max(N - 1, 1))
    C_N = block_toeplitz(markov, N)
    return C_N @ build_decoder_convolution(scheme, scenario, N).matrix


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    v = v / np.abs(v[k])
    return -v if v[k] < 0 else v


def _attack_realization(sys: StateSpaceSystem, scenario: AttackScenario, scheme=None):
    """State-space model from ``a_u`` to raw outputs, including the decoder."""
    L_a = scenario.L_a
    if scheme is None:
        return sys.A, sys.B @ L_a, sys.C
    n, md = sys.n, scheme.A_d.shape[0]
    A = np.block([[sys.A, sys.B @ scheme.C_d], [np.zeros((md, n)), scheme.A_d]])
    B = np.vstack([sys.B @ scheme.D_d @ L_a, scheme.B_d @ L_a])
    C = np.hstack([sys.C, np.zeros((sys.p, md))])
    return A, B, C


def _feedback_zeroing(sys, scenario, keep, N, scheme=None, gain=1.0):
    """Output-zeroing input by per-step feedback, or ``None`` if not applicable.

    With ``Gamma`` stacking ``C_q A^(r_q-1) B`` over uncompromised outputs of
    finite relative degree, ``a(k) = -Gamma^+ [C_q A^(r_q) x(k)] + n v`` keeps
    those outputs at zero for every ``k`` when ``Gamma`` has full row rank;
    ``n`` spans ``ker Gamma`` and ``v = gain``.

    The internal state is advanced with the simulation kernel's arithmetic,
    so replaying the result on the plant reproduces it bit for bit; on an
    unstable plant any mismatch would otherwise grow geometrically.
    """
    A, B, C = _attack_realization(sys, scenario, scheme)
    rows, lead, ahead = [], [], []
    tol = zero_threshold(A, B, C)
    for c in C[keep]:
        row = c.copy()
        for _ in range(A.shape[0]):
            if np.max(np.abs(row @ B)) > tol:
                lead.append(row @ B)
                ahead.append(row @ A)
                break
            row = row @ A
    if not lead:
        return None
    Gamma = np.vstack(lead)
    if numerical_rank(Gamma) < Gamma.shape[0]:
        return None
    kernel = null_space(Gamma)
    if kernel.shape[1] == 0:
        return None
    direction = gain * kernel[:, 0]
    pinv = np.linalg.pinv(Gamma)
    ahead = np.vstack(ahead)

    L_a = scenario.L_a
    x = np.zeros(sys.n)
    xd = None if scheme is None else np.zeros(scheme.A_d.shape[0])
    out = np.empty((N, scenario.m_a))
    for k in range(N):
        state = x if xd is None else np.concatenate([x, xd])
        a = direction - pinv @ (ahead @ state)
        out[k] = a
        lifted = L_a @ a
        if xd is None:
            x = _backend.affine2(sys.A, x, sys.B, lifted)
        else:
            ud = _backend.affine2(scheme.C_d, xd, scheme.D_d, lifted)
            xd = _backend.affine2(scheme.A_d, xd, scheme.B_d, lifted)
            x = _backend.affine2(sys.A, x, sys.B, ud)
    return out


def _stacked_zeroing(G_clean, G_comp, N, m_a):
    Z = null_space(G_clean, ZERO_RTOL)
    if Z.shape[1] == 0 or G_comp.shape[0] == 0:
        return None
    _, s, Vh = np.linalg.svd(G_comp @ Z)
    if s.size == 0 or s[0] <= ZERO_RTOL * (1.0 + np.max(np.abs(G_comp))):
        return None
    return (Z @ Vh[0]).reshape(N, m_a)


def synthesize_designed_attack(
    sys: StateSpaceSystem,
    scenario: AttackScenario,
    N: Optional[int] = None,
    scheme=None,
    require_designed: bool = True,
    method: str = "auto",
) -> AttackSignalPlan:
    """Actuator attack invisible on uncompromised sensors, with its mask.

    ``method="stacked"`` searches the null space of the stacked map from
    ``U_a(N)`` to the uncompromised outputs. That null space always contains
    inputs that never reach the window (the last step, for one), so the
    returned element is the null-space direction with the largest raw effect
    on compromised sensors. ``method="feedback"`` builds the input step by
    step (see ``_feedback_zeroing``); ``"auto"`` prefers it when applicable.
    The result is scaled to unit max-abs entry with a positive largest entry.

    ``scheme`` models an adversary who knows the decoder. With
    ``require_designed=False`` the arbitrary-covert precondition is skipped,
    which is how a decoder-aware attack on a coded plant is generated.
    """
    N = 2 * sys.n if N is None else int(N)
    if N < 1:
        raise ValidationError("horizon must be positive")
    if method not in ("auto", "feedback", "stacked"):
        raise ValidationError(f"unknown designed-attack method {method!r}")
    report = check_covert_feasibility(sys, scenario)
    if require_designed:
        if report.feasible_arbitrary:
            raise PreconditionError(
                "scenario admits arbitrary covert attacks; designed attacks are for the remaining regime"
            )
        if not report.feasible_designed:
            raise PreconditionError("uncompromised channels form a left-invertible triple; no designed attack")

    keep = np.ones(sys.p, dtype=bool)
    keep[[q - 1 for q in scenario.compromised_outputs]] = False
    a_u = None
    if method in ("auto", "feedback"):
        a_u = _feedback_zeroing(sys, scenario, keep, N, scheme)
        if a_u is not None:
            # Rescaling after the fact would perturb the last bits, which an
            # unstable plant amplifies; fold the normalization into the run.
            flat = a_u.ravel()
            peak = flat[int(np.argmax(np.abs(flat)))]
            a_u = _feedback_zeroing(sys, scenario, keep, N, scheme, gain=1.0 / peak)
            raw = attack_output_response(sys, scenario, a_u, scheme)[:, ~keep]
            if np.max(np.abs(raw), initial=0.0) <= zero_threshold(raw):
                a_u = None
        if a_u is None and method == "feedback":
            raise NoDesignedAttackError("decoupling matrix of the uncompromised outputs is not full row rank")
    if a_u is None:
        G = stacked_attack_map(sys, scenario, N, scheme)
        rows_clean = np.tile(keep, N)
        a_u = _stacked_zeroing(G[rows_clean], G[~rows_clean], N, scenario.m_a)
        if a_u is None:
            raise NoDesignedAttackError(f"no output-zeroing actuator input reaching a compromised sensor over horizon {N}")
        a_u = _canonical_sign(a_u.ravel()).reshape(N, scenario.m_a)

    if scheme is None:
        r0 = report.per_output_relative_degrees.minimum
    else:
        r0 = relative_degree(sys, sys.B @ scheme.D_d @ scenario.L_a).minimum
    a_y = _masking_signal(sys, scenario, a_u, r0, scheme)
    return AttackSignalPlan(N, a_u, a_y, AttackKind.DESIGNED_COVERT, scenario, r0)
