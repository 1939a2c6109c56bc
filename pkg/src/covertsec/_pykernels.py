"""Pure-Python time-stepping kernel (fallback for the compiled ``_ckernels``)."""

import numpy as np


def simulate_loop(A, B, C, x0, U, UA, YA, W, V, coding=None):
    """Step the plant, optionally through an encoder/decoder pair.

    ``UA`` is the lifted actuator attack ``L_a a_u`` (N x m) and ``YA`` the
    lifted sensor attack ``D_a a_y`` (N x p). ``coding`` is
    ``(Ae, Be, Ce, De, Ad, Bd, Cd, Dd)`` or ``None``.

    Returns ``(X, Y, UE, UD)`` with rows indexed by time; ``UE`` and ``UD``
    are ``None`` without coding.
    """
    N = U.shape[0]
    n = A.shape[0]
    p = C.shape[0]
    m = B.shape[1]
    X = np.empty((N, n))
    Y = np.empty((N, p))
    x = np.array(x0, dtype=np.float64)
    if coding is None:
        for k in range(N):
            X[k] = x
            Y[k] = C @ x + YA[k] + V[k]
            x = A @ x + B @ (U[k] + UA[k]) + W[k]
        return X, Y, None, None

    Ae, Be, Ce, De, Ad, Bd, Cd, Dd = coding
    UE = np.empty((N, m))
    UD = np.empty((N, m))
    xe = np.zeros(Ae.shape[0])
    xd = np.zeros(Ad.shape[0])
    for k in range(N):
        u = U[k]
        ue = Ce @ xe + De @ u
        received = ue + UA[k]
        ud = Cd @ xd + Dd @ received
        X[k] = x
        Y[k] = C @ x + YA[k] + V[k]
        UE[k] = ue
        UD[k] = ud
        xe = Ae @ xe + Be @ u
        xd = Ad @ xd + Bd @ received
        x = A @ x + B @ ud + W[k]
    return X, Y, UE, UD


def affine2(M1, v1, M2, v2):
    """``M1 v1 + M2 v2`` with the loop kernel's exact summation order."""
    return M1 @ v1 + M2 @ v2
