"""Dynamic encoder/decoder pair on the input channels.

The encoder sits on the command side, the decoder on the plant side, and the
decoder inverts the encoder whenever no attack is injected between them.
A well-chosen decoder feedthrough routes any actuator attack into sensors the
adversary cannot touch.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import sympy

from . import _backend
from .attacks import AttackScenario
from .errors import (
    AssumptionViolation,
    DegenerateThreatError,
    DesignFailure,
    DimensionError,
    SingularityError,
    ValidationError,
)
from .lti import (
    INFINITE,
    ZERO_RTOL,
    StateSpaceSystem,
    markov_sequence,
    null_space,
    numerical_rank,
    relative_degree,
    zero_threshold,
)

LEMMA3_TOL = 1e-10
INVERSE_RTOL = 1e-9
SINGULAR_COND = 1e12
DESIGN_COND_LIMIT = 1e6
DESIGN_BUDGET = 10_000
FIXED_POINT_ITERATIONS = 5

_NAMES = ("A_e", "B_e", "C_e", "D_e", "A_d", "B_d", "C_d", "D_d")


@dataclass(frozen=True)
class CodingScheme:
    """Encoder ``(A_e, B_e, C_e, D_e)``, decoder ``(A_d, B_d, C_d, D_d)`` and ``T``.

    ``exact`` optionally holds the same matrices as sympy rationals, built by
    exact elimination from a decimal decoder; it lets the inverse property be
    checked without floating-point amplification through an unstable encoder.
    """

    A_e: np.ndarray
    B_e: np.ndarray
    C_e: np.ndarray
    D_e: np.ndarray
    A_d: np.ndarray
    B_d: np.ndarray
    C_d: np.ndarray
    D_d: np.ndarray
    T: np.ndarray
    exact: Optional[dict] = field(default=None, compare=False, repr=False)
    label: str = "scheme"

    def __post_init__(self):
        m = np.asarray(self.D_d).shape[0]
        for name in _NAMES + ("T",):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != (m, m):
                raise DimensionError(f"{name} must be {m}x{m}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.D_d.shape[0]

    def matrices(self) -> tuple:
        return tuple(getattr(self, name) for name in _NAMES)

    def lemma3_residuals(self) -> dict:
        Ti = np.linalg.inv(self.T)
        return {
            "D_d C_e + C_d T": _maxabs(self.D_d @ self.C_e + self.C_d @ self.T),
            "T^-1 B_d D_e - B_e": _maxabs(Ti @ self.B_d @ self.D_e - self.B_e),
            "D_d D_e - I": _maxabs(self.D_d @ self.D_e - np.eye(self.m)),
            "T^-1 A_d T - B_e C_d T - A_e": _maxabs(Ti @ self.A_d @ self.T - self.B_e @ self.C_d @ self.T - self.A_e),
            "T^-1 A_d T + T^-1 B_d C_e - A_e": _maxabs(Ti @ self.A_d @ self.T + Ti @ self.B_d @ self.C_e - self.A_e),
        }

    def spectral_radii(self) -> dict:
        return {
            "encoder": float(np.max(np.abs(np.linalg.eigvals(self.A_e)))),
            "decoder": float(np.max(np.abs(np.linalg.eigvals(self.A_d)))),
        }


def _maxabs(M) -> float:
    return float(np.max(np.abs(M))) if np.size(M) else 0.0


def _check_invertible(M: np.ndarray, name: str) -> None:
    cond = np.linalg.cond(M) if M.size else np.inf
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularityError(f"{name} is singular (condition number {cond:.3g})", condition_number=cond)


def _rational_matrix(M) -> sympy.Matrix:
    # repr() gives the shortest decimal that round-trips, so printed
    # decimals such as 0.575 become 23/40 rather than a binary fraction.
    return sympy.Matrix([[sympy.Rational(repr(float(v))) for v in row] for row in np.asarray(M)])


def encoder_from_decoder(A_d, B_d, C_d, D_d, T=None, exact: bool = False, label: str = "scheme") -> CodingScheme:
    """Build the encoder that the given decoder inverts.

    ``D_e = D_d^-1``, ``C_e = -D_e C_d T``, ``B_e = T^-1 B_d D_e`` and
    ``A_e = T^-1 A_d T + T^-1 B_d C_e``; all inverse-pair identities are then
    re-checked. ``exact=True`` additionally carries a rational copy.
    """
    D_d = np.asarray(D_d, dtype=np.float64)
    m = D_d.shape[0]
    T = np.eye(m) if T is None else np.asarray(T, dtype=np.float64)
    _check_invertible(D_d, "decoder feedthrough D_d")
    _check_invertible(T, "similarity T")
    A_d, B_d, C_d = (np.asarray(M, dtype=np.float64) for M in (A_d, B_d, C_d))

    D_e = np.linalg.inv(D_d)
    Ti = np.linalg.inv(T)
    C_e = -D_e @ C_d @ T
    B_e = Ti @ B_d @ D_e
    A_e = Ti @ A_d @ T + Ti @ B_d @ C_e

    exact_mats = None
    if exact:
        Ad, Bd, Cd, Dd, Tq = (_rational_matrix(M) for M in (A_d, B_d, C_d, D_d, T))
        De = Dd.inv()
        Tqi = Tq.inv()
        Ce = -De * Cd * Tq
        Be = Tqi * Bd * De
        Ae = Tqi * Ad * Tq + Tqi * Bd * Ce
        exact_mats = dict(zip(_NAMES, (Ae, Be, Ce, De, Ad, Bd, Cd, Dd)))

    scheme = CodingScheme(A_e, B_e, C_e, D_e, A_d, B_d, C_d, D_d, T, exact=exact_mats, label=label)
    scale = 1.0 + max(_maxabs(M) for M in scheme.matrices())
    bad = {k: v for k, v in scheme.lemma3_residuals().items() if v > LEMMA3_TOL * scale}
    if bad:
        raise SingularityError(f"inverse-pair identities violated after construction: {bad}")
    return scheme


def run_coding_chain(scheme: CodingScheme, U, UA=None):
    """Encoder then decoder with no plant; returns ``(UE, UD)``."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    N, m = U.shape
    UA = np.zeros((N, m)) if UA is None else np.asarray(UA, dtype=np.float64)
    # A one-state dummy plant lets the compiled kernel drive the chain.
    zero = np.zeros((1, 1))
    _, _, UE, UD = _backend.simulate_loop(
        zero, np.zeros((1, m)), zero, np.zeros(1), U, UA,
        np.zeros((N, 1)), np.zeros((N, 1)), np.zeros((N, 1)), scheme.matrices(),
    )
    return UE, UD


def _exact_chain_error(exact: dict, U: np.ndarray) -> Fraction:
    def mat(M):
        return [[Fraction(int(v.p), int(v.q)) for v in M.row(i)] for i in range(M.rows)]

    def mv(M, v):
        return [sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in M]

    Ae, Be, Ce, De, Ad, Bd, Cd, Dd = (mat(exact[k]) for k in _NAMES)
    m = len(De)
    xe = [Fraction(0)] * len(Ae)
    xd = [Fraction(0)] * len(Ad)
    worst = Fraction(0)
    for row in U:
        u = [Fraction(float(v)) for v in row]
        ue = [a + b for a, b in zip(mv(Ce, xe), mv(De, u))]
        ud = [a + b for a, b in zip(mv(Cd, xd), mv(Dd, ue))]
        worst = max(worst, max(abs(ud[i] - u[i]) for i in range(m)))
        xe = [a + b for a, b in zip(mv(Ae, xe), mv(Be, u))]
        xd = [a + b for a, b in zip(mv(Ad, xd), mv(Bd, ue))]
    return worst


@dataclass(frozen=True)
class InverseCheck:
    passed: bool
    max_error: float
    max_input: float
    arithmetic: str

    def __bool__(self):
        return self.passed


def verify_inverse(
    scheme: CodingScheme,
    horizon: int,
    trials: int,
    seed: int = 0,
    arithmetic: str = "float",
    inputs=None,
) -> InverseCheck:
    """Simulate encoder and decoder with no attack and compare ``u_d`` to ``u``.

    Passes iff ``max |u_d(k) - u(k)| <= 1e-9 (1 + max |u(k)|)`` over all steps
    and trials. ``arithmetic="exact"`` runs the rational copy of the scheme on
    the same (exactly represented) float inputs.
    """
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    if arithmetic not in ("float", "exact"):
        raise ValidationError(f"unknown arithmetic {arithmetic!r}")
    if arithmetic == "exact" and scheme.exact is None:
        raise ValidationError("scheme carries no exact representation; rebuild with exact=True")
    rng = np.random.default_rng(seed)
    worst = 0.0
    umax = 0.0
    sequences = inputs if inputs is not None else [rng.standard_normal((horizon, scheme.m)) for _ in range(trials)]
    for U in sequences:
        U = np.asarray(U, dtype=np.float64)
        umax = max(umax, _maxabs(U))
        if arithmetic == "float":
            _, UD = run_coding_chain(scheme, U)
            worst = max(worst, _maxabs(UD - U))
        else:
            worst = max(worst, float(_exact_chain_error(scheme.exact, U)))
    passed = bool(worst <= INVERSE_RTOL * (1.0 + umax))
    return InverseCheck(passed, worst, umax, arithmetic)


@dataclass(frozen=True)
class DefenseSpecification:
    """Secured channels (1-based) and the threat the adversary may mount."""

    secure_input: int
    secure_outputs: tuple
    threat: AttackScenario

    def validate(self, sys: Optional[StateSpaceSystem] = None) -> None:
        th = self.threat
        if sys is not None:
            th.check_system(sys)
        q1, q2 = self.secure_outputs
        if q1 == q2:
            raise AssumptionViolation("the two secured outputs must differ")
        for q in (q1, q2):
            if not 1 <= q <= th.p:
                raise AssumptionViolation(f"secured output {q} outside 1..{th.p}")
            if q in th.compromised_outputs:
                raise AssumptionViolation(f"secured output {q} is listed as compromised")
        if not 1 <= self.secure_input <= th.m:
            raise AssumptionViolation(f"secured input {self.secure_input} outside 1..{th.m}")
        if self.secure_input in th.compromised_inputs:
            raise AssumptionViolation(f"secured input {self.secure_input} is listed as compromised")
        if numerical_rank(th.L_a) >= th.m:
            raise AssumptionViolation("rank(L_a) must be below m: one input channel has to stay secure")
        if numerical_rank(th.D_a) >= th.p - 1:
            raise AssumptionViolation("rank(D_a) must be below p-1: two output channels have to stay secure")
        if th.m_a == 0:
            raise AssumptionViolation("threat has no compromised input channel")


@dataclass(frozen=True)
class Theorem2Result:
    condition1: bool
    condition2: bool
    condition3: bool
    r_d: int
    residual1: float
    rank2: int
    residual3: float
    tol: float

    @property
    def verdict(self) -> bool:
        return self.condition1 and self.condition2 and self.condition3

    def failing(self) -> list:
        return [i for i, ok in enumerate((self.condition1, self.condition2, self.condition3), 1) if not ok]

    def table(self) -> str:
        rows = [
            f"condition 1 (secured row 1 blind at r_d):      {'PASS' if self.condition1 else 'FAIL'}  max|.|={self.residual1:.3e}",
            f"condition 2 (stacked secured rows injective): {'PASS' if self.condition2 else 'FAIL'}  rank={self.rank2}",
            f"condition 3 (decoder memory blind at r_d):    {'PASS' if self.condition3 else 'FAIL'}  max|.|={self.residual3:.3e}",
            f"r_d = {self.r_d}; tolerance = {self.tol:.3e}; verdict: {'SECURE' if self.verdict else 'NOT CERTIFIED'}",
        ]
        return "\n".join(rows)


def _coded_relative_degree(sys, D_d, L_a, tol=None):
    return relative_degree(sys, sys.B @ D_d @ L_a, tol=tol)


def check_theorem2(
    sys: StateSpaceSystem,
    scheme: CodingScheme,
    spec: DefenseSpecification,
    tol: Optional[float] = None,
) -> Theorem2Result:
    """Evaluate the three sufficient conditions that rule out covert attacks.

    ``tol`` is the absolute zero threshold for conditions 1 and 3 and for the
    coded relative degree; by default it is relative to the matrix scale.
    """
    spec.validate(sys)
    L_a = spec.threat.L_a
    m_a = L_a.shape[1]
    if tol is None:
        tol = zero_threshold(sys.A, sys.B, sys.C, scheme.D_d, scheme.C_d @ scheme.B_d)
    r_d = _coded_relative_degree(sys, scheme.D_d, L_a, tol).minimum
    if r_d == INFINITE:
        raise DegenerateThreatError("threat inputs never reach an output through the decoder")
    r_d = int(r_d)
    q1, q2 = (q - 1 for q in spec.secure_outputs)
    CAB = markov_sequence(sys, sys.B, r_d + 1)
    lead, nxt = CAB[r_d - 1], CAB[r_d]

    row1 = lead[q1] @ scheme.D_d @ L_a
    stacked = np.vstack([lead[q2] @ scheme.D_d @ L_a, nxt[q1] @ scheme.D_d @ L_a])
    row3 = lead[q1] @ scheme.C_d @ scheme.B_d @ L_a
    res1 = _maxabs(row1)
    res3 = _maxabs(row3)
    rank2 = numerical_rank(stacked, ZERO_RTOL)
    return Theorem2Result(
        condition1=res1 <= tol,
        condition2=rank2 == m_a,
        condition3=res3 <= tol,
        r_d=r_d,
        residual1=res1,
        rank2=rank2,
        residual3=res3,
        tol=tol,
    )


def decoder_from_feedthrough(D_d, structure: str = "unit-output"):
    """Complete ``(A_d, B_d, C_d, D_d)`` from a chosen feedthrough.

    ``"unit-output"``: ``C_d = I``, ``B_d = D_d`` so ``C_d B_d = D_d``.
    ``"negated"``: ``C_d = -D_d``, ``B_d = D_d``.
    Both keep ``A_d = I``.
    """
    D_d = np.asarray(D_d, dtype=np.float64)
    m = D_d.shape[0]
    if structure == "unit-output":
        return np.eye(m), D_d.copy(), np.eye(m), D_d
    if structure == "negated":
        return np.eye(m), D_d.copy(), -D_d, D_d
    raise ValidationError(f"unknown decoder structure {structure!r}")


def design_decoder(
    sys: StateSpaceSystem,
    spec: DefenseSpecification,
    seed: int = 0,
    budget: int = DESIGN_BUDGET,
    structure: str = "unit-output",
) -> CodingScheme:
    """Search for a decoder feedthrough that certifies the defense.

    Each threat column of ``D_d`` is drawn from the null space of the secured
    row ``C_qs1 A^(r_d-1) B`` so condition 1 holds by construction; the other
    columns are free. ``r_d`` depends on ``D_d``, so the seed value is
    iterated to a fixed point.
    """
    spec.validate(sys)
    L_a = spec.threat.L_a
    m_a = L_a.shape[1]
    threat_cols = [i - 1 for i in spec.threat.compromised_inputs]
    r = relative_degree(sys, sys.B @ L_a).minimum
    if r == INFINITE:
        raise DegenerateThreatError("threat inputs never reach any output; coding is unnecessary")
    if m_a > 2:
        raise DesignFailure(
            f"condition 2 cannot hold: two secured output rows span at most rank 2 but the threat has {m_a} inputs",
            blocking_condition=2,
        )

    rng = np.random.default_rng(seed)
    q1 = spec.secure_outputs[0] - 1
    m = sys.m
    blocked = Counter()
    draws = 0
    for _ in range(FIXED_POINT_ITERATIONS):
        w = markov_sequence(sys, sys.B, int(r))[-1][q1:q1 + 1]
        basis = null_space(w) if _maxabs(w) > zero_threshold(w) else np.eye(m)
        reseeded = False
        while draws < budget:
            draws += 1
            D = rng.standard_normal((m, m))
            D[:, threat_cols] = basis @ rng.standard_normal((basis.shape[1], m_a))
            if np.linalg.cond(D) >= DESIGN_COND_LIMIT:
                blocked["invertibility"] += 1
                continue
            r_new = _coded_relative_degree(sys, D, L_a).minimum
            if r_new == INFINITE:
                blocked["degenerate r_d"] += 1
                continue
            if r_new != r:
                r = r_new
                reseeded = True
                break
            decoder = decoder_from_feedthrough(D, structure)
            try:
                scheme = encoder_from_decoder(*decoder, label=f"designed(seed={seed})")
            except SingularityError:
                blocked["invertibility"] += 1
                continue
            result = check_theorem2(sys, scheme, spec)
            if not result.verdict:
                for c in result.failing():
                    blocked[f"condition {c}"] += 1
                continue
            if not verify_inverse(scheme, horizon=50, trials=2, seed=seed):
                blocked["inverse"] += 1
                continue
            return scheme
        if not reseeded:
            break
    worst = blocked.most_common(1)[0][0] if blocked else "relative-degree fixed point"
    raise DesignFailure(
        f"no certified decoder after {draws} draws; most frequent blocker: {worst} ({dict(blocked)})",
        blocking_condition=worst,
    )


@dataclass(frozen=True)
class DecoderConvolutionMatrix:
    N: int
    matrix: np.ndarray


def build_decoder_convolution(scheme: CodingScheme, scenario: AttackScenario, N: int) -> DecoderConvolutionMatrix:
    """Lower block-Toeplitz map from stacked ``U_a(N)`` to decoder output.

    Diagonal blocks ``D_d L_a``; block ``(i, j)`` below it is
    ``C_d A_d^(i-j-1) B_d L_a``.
    """
    if N < 1:
        raise ValidationError("N must be at least 1")
    L_a = scenario.L_a
    m, m_a = scheme.m, L_a.shape[1]
    out = np.zeros((N * m, N * m_a))
    diag = scheme.D_d @ L_a
    sub = []
    X = scheme.B_d @ L_a
    for _ in range(N - 1):
        sub.append(scheme.C_d @ X)
        X = scheme.A_d @ X
    for i in range(N):
        out[i * m:(i + 1) * m, i * m_a:(i + 1) * m_a] = diag
        for j in range(i):
            out[i * m:(i + 1) * m, j * m_a:(j + 1) * m_a] = sub[i - j - 1]
    out.setflags(write=False)
    return DecoderConvolutionMatrix(N, out)


def scheme_to_dict(scheme: CodingScheme) -> dict:
    data = {
        "format": "covertsec-scheme/1",
        "label": scheme.label,
        "exact": scheme.exact is not None,
        "T": scheme.T.tolist(),
    }
    for name in _NAMES:
        data[name] = getattr(scheme, name).tolist()
    return data


def scheme_from_dict(data: dict) -> CodingScheme:
    if data.get("format") != "covertsec-scheme/1":
        raise ValidationError(f"unsupported scheme format {data.get('format')!r}")
    try:
        mats = {name: np.array(data[name], dtype=np.float64) for name in _NAMES + ("T",)}
    except KeyError as exc:
        raise ValidationError(f"scheme is missing matrix {exc.args[0]}") from None
    exact = None
    if data.get("exact"):
        rebuilt = encoder_from_decoder(mats["A_d"], mats["B_d"], mats["C_d"], mats["D_d"], mats["T"], exact=True)
        exact = rebuilt.exact
    return CodingScheme(**mats, exact=exact, label=data.get("label", "scheme"))
