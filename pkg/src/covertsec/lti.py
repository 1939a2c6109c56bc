"""Dense small-matrix primitives for discrete-time LTI systems.

Markov parameters, stacked input/output matrices, per-output relative
degrees, numerical rank and a Rosenbrock-matrix left-invertibility test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ValidationError, WindowTooSmallError

#: Relative zero threshold used throughout: a quantity is zero when its
#: max-abs value is at most ``ZERO_RTOL * (1 + max-abs of its generators)``.
ZERO_RTOL = 1e-9

INFINITE = math.inf

LEFT_INVERTIBILITY_SAMPLES = 8
LEFT_INVERTIBILITY_SEED = 20240611


def _frozen(a, name, ndim=2) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def zero_threshold(*generators: np.ndarray, rtol: float = ZERO_RTOL) -> float:
    scale = max((float(np.max(np.abs(g))) for g in generators if np.size(g)), default=0.0)
    return rtol * (1.0 + scale)


@dataclass(frozen=True)
class StateSpaceSystem:
    """Discrete-time plant ``x(k+1) = A x(k) + B u(k)``, ``y(k) = C x(k)``.

    Matrices are copied and made read-only on construction.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sample_period: float = 1.0

    def __post_init__(self):
        A = _frozen(self.A, "A")
        B = _frozen(self.B, "B")
        C = _frozen(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise DimensionError(f"A must be square and non-empty, got {A.shape}")
        if B.shape[0] != n or B.shape[1] < 1:
            raise DimensionError(f"B must be {n}x(m>=1), got {B.shape}")
        if C.shape[1] != n or C.shape[0] < 1:
            raise DimensionError(f"C must be (p>=1)x{n}, got {C.shape}")
        if not (self.sample_period > 0 and math.isfinite(self.sample_period)):
            raise ValidationError("sample_period must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "sample_period", float(self.sample_period))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class RelativeDegreeProfile:
    """Per-output relative degrees; ``INFINITE`` marks a decoupled output."""

    per_output: tuple
    minimum: float = field(init=False)

    def __post_init__(self):
        finite = [r for r in self.per_output if r != INFINITE]
        object.__setattr__(self, "minimum", min(finite) if finite else INFINITE)

    def is_finite(self, q: int) -> bool:
        return self.per_output[q] != INFINITE

    def finite_outputs(self) -> list:
        """Zero-based indices of outputs with a finite relative degree."""
        return [q for q, r in enumerate(self.per_output) if r != INFINITE]

    def __str__(self):
        cells = ["inf" if r == INFINITE else str(r) for r in self.per_output]
        return "[" + ", ".join(cells) + "]"


@dataclass(frozen=True)
class StackedIOMatrices:
    N: int
    observability: np.ndarray
    input_toeplitz: np.ndarray
    attack_toeplitz: np.ndarray
    sensor_block: np.ndarray


def _as_input_map(sys: StateSpaceSystem, input_map) -> np.ndarray:
    M = np.asarray(input_map, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2 or M.shape[0] != sys.n:
        raise DimensionError(f"input map must have {sys.n} rows, got shape {M.shape}")
    return M


def markov_parameter(sys: StateSpaceSystem, input_map, i: int) -> np.ndarray:
    """Return ``C A^i input_map`` by repeated multiplication (no matrix powers)."""
    if i < 0:
        raise ValidationError(f"Markov index must be nonnegative, got {i}")
    X = _as_input_map(sys, input_map)
    for _ in range(i):
        X = sys.A @ X
    return sys.C @ X


def markov_sequence(sys: StateSpaceSystem, input_map, count: int, output_map=None) -> list:
    """``[Cy A^k input_map for k in range(count)]`` with ``Cy`` defaulting to C."""
    X = _as_input_map(sys, input_map)
    Cy = sys.C if output_map is None else np.asarray(output_map, dtype=np.float64)
    seq = []
    for _ in range(count):
        seq.append(Cy @ X)
        X = sys.A @ X
    return seq


def relative_degree(
    sys: StateSpaceSystem,
    input_map,
    feedthrough=None,
    output_map=None,
    tol: Optional[float] = None,
) -> RelativeDegreeProfile:
    """Per-output relative degree of ``(output_map, A, input_map)``.

    ``r^q`` is the smallest ``i >= 1`` with ``Cq A^(i-1) input_map`` nonzero.
    The search stops at ``i = n``: by Cayley-Hamilton a row that vanishes for
    the first ``n`` powers vanishes for all of them.

    ``feedthrough`` is accepted for interface stability only; a same-instant
    attack-to-output path does not shift relative degree here.
    """
    M = _as_input_map(sys, input_map)
    Cy = sys.C if output_map is None else np.atleast_2d(np.asarray(output_map, dtype=np.float64))
    if Cy.shape[1] != sys.n:
        raise DimensionError(f"output map must have {sys.n} columns, got {Cy.shape}")
    if feedthrough is not None:
        F = np.atleast_2d(np.asarray(feedthrough, dtype=np.float64))
        if F.shape != (Cy.shape[0], M.shape[1]):
            raise DimensionError(f"feedthrough must be {Cy.shape[0]}x{M.shape[1]}")
    if tol is None:
        tol = zero_threshold(sys.A, M, Cy)

    p = Cy.shape[0]
    degrees = [INFINITE] * p
    if M.shape[1] == 0:
        return RelativeDegreeProfile(tuple(degrees))
    X = M
    pending = set(range(p))
    for i in range(1, sys.n + 1):
        rows = Cy @ X
        for q in sorted(pending):
            if np.max(np.abs(rows[q])) > tol:
                degrees[q] = i
                pending.discard(q)
        if not pending:
            break
        X = sys.A @ X
    return RelativeDegreeProfile(tuple(degrees))


def block_toeplitz(markov: Sequence[np.ndarray], N: int, diagonal: Optional[np.ndarray] = None) -> np.ndarray:
    """Lower block-Toeplitz matrix with ``markov[k]`` on sub-diagonal ``k+1``.

    ``diagonal`` fills the main block diagonal (zero when omitted).
    """
    rows, cols = (diagonal if diagonal is not None else markov[0]).shape
    out = np.zeros((N * rows, N * cols))
    for i in range(N):
        if diagonal is not None:
            out[i * rows:(i + 1) * rows, i * cols:(i + 1) * cols] = diagonal
        for j in range(i):
            out[i * rows:(i + 1) * rows, j * cols:(j + 1) * cols] = markov[i - j - 1]
    return out


def observability_matrix(sys: StateSpaceSystem, N: int) -> np.ndarray:
    blocks = []
    row = sys.C
    for _ in range(N):
        blocks.append(row)
        row = row @ sys.A
    return np.vstack(blocks)


def build_stacked_io(sys: StateSpaceSystem, scenario, N: int) -> StackedIOMatrices:
    """Assemble the finite-window I/O model matrices.

    ``Y(N) = O x0 + C_N U + C_a U_a + D_a Y_a`` with ``D_a = I_N kron D_a``.
    ``scenario`` only needs ``L_a`` and ``D_a`` attributes.
    """
    if N < sys.n:
        raise WindowTooSmallError(f"window N={N} must be at least n={sys.n}")
    L_a = np.asarray(scenario.L_a, dtype=np.float64)
    D_a = np.asarray(scenario.D_a, dtype=np.float64)
    if L_a.shape[0] != sys.m or D_a.shape[0] != sys.p:
        raise DimensionError("scenario selection matrices do not match the system")
    markov = markov_sequence(sys, sys.B, max(N - 1, 1))
    C_N = block_toeplitz(markov, N)
    C_a = block_toeplitz([M @ L_a for M in markov], N) if L_a.shape[1] else np.zeros((N * sys.p, 0))
    D_blk = np.kron(np.eye(N), D_a) if D_a.shape[1] else np.zeros((N * sys.p, 0))
    for arr in (C_N, C_a, D_blk):
        arr.setflags(write=False)
    O_N = observability_matrix(sys, N)
    O_N.setflags(write=False)
    return StackedIOMatrices(N, O_N, C_N, C_a, D_blk)


def numerical_rank(M, tol: float = ZERO_RTOL) -> int:
    """Count singular values above ``tol`` times the largest one."""
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space(M, tol: float = ZERO_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    cols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(cols)
    _, s, Vh = np.linalg.svd(M)
    rank = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return Vh[rank:].T.conj()


def rosenbrock_matrix(A, input_map, output_map, lam: complex) -> np.ndarray:
    n = A.shape[0]
    mt = input_map.shape[1]
    pt = output_map.shape[0]
    top = np.hstack([lam * np.eye(n) - A, -input_map])
    bottom = np.hstack([output_map, np.zeros((pt, mt))])
    return np.vstack([top, bottom]).astype(np.complex128)


def is_left_invertible(
    sys: StateSpaceSystem,
    input_map,
    output_map,
    samples: int = LEFT_INVERTIBILITY_SAMPLES,
    seed: int = LEFT_INVERTIBILITY_SEED,
    tol: float = ZERO_RTOL,
) -> bool:
    """Generic-rank test on the Rosenbrock matrix.

    Samples ``samples`` complex points from the annulus ``0.5 <= |z| <= 2``;
    the triple is left-invertible iff some sample reaches rank ``n + m``.
    Rank can only drop at finitely many points, so failure at every sample
    certifies non-invertibility with overwhelming probability.
    """
    B = _as_input_map(sys, input_map)
    Cy = np.atleast_2d(np.asarray(output_map, dtype=np.float64))
    if Cy.shape[1] != sys.n:
        raise DimensionError(f"output map must have {sys.n} columns, got {Cy.shape}")
    target = sys.n + B.shape[1]
    if target > sys.n + Cy.shape[0]:
        return False
    rng = np.random.default_rng(seed)
    radii = rng.uniform(0.5, 2.0, samples)
    angles = rng.uniform(0.0, 2 * np.pi, samples)
    for r, th in zip(radii, angles):
        P = rosenbrock_matrix(sys.A, B, Cy, r * np.exp(1j * th))
        if numerical_rank(P, tol) == target:
            return True
    return False
