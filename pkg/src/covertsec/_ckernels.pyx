# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled time-stepping kernel; same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _matvec(const double[:, ::1] M, const double[:] v, double[:] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            acc = acc + M[i, j] * v[j]
        out[i] = acc


cdef inline void _matvec_add(const double[:, ::1] M, const double[:] v, double[:] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            acc = acc + M[i, j] * v[j]
        out[i] = out[i] + acc


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def simulate_loop(A, B, C, x0, U, UA, YA, W, V, coding=None):
    cdef const double[:, ::1] A_ = _c(A)
    cdef const double[:, ::1] B_ = _c(B)
    cdef const double[:, ::1] C_ = _c(C)
    cdef const double[:, ::1] U_ = _c(U)
    cdef const double[:, ::1] UA_ = _c(UA)
    cdef const double[:, ::1] YA_ = _c(YA)
    cdef const double[:, ::1] W_ = _c(W)
    cdef const double[:, ::1] V_ = _c(V)
    cdef Py_ssize_t N = U_.shape[0]
    cdef Py_ssize_t n = A_.shape[0]
    cdef Py_ssize_t m = B_.shape[1]
    cdef Py_ssize_t p = C_.shape[0]
    cdef Py_ssize_t k, i

    X = np.empty((N, n))
    Y = np.empty((N, p))
    cdef double[:, ::1] X_ = X
    cdef double[:, ::1] Y_ = Y
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] xn = np.empty(n)
    cdef double[::1] ut = np.empty(m)
    cdef double[::1] tmp_p = np.empty(p)

    cdef const double[:, ::1] Ae
    cdef const double[:, ::1] Be
    cdef const double[:, ::1] Ce
    cdef const double[:, ::1] De
    cdef const double[:, ::1] Ad
    cdef const double[:, ::1] Bd
    cdef const double[:, ::1] Cd
    cdef const double[:, ::1] Dd
    cdef double[::1] xe, xd, xen, xdn, ue, ud, recv
    cdef double[:, ::1] UE_
    cdef double[:, ::1] UD_

    if coding is None:
        with nogil:
            for k in range(N):
                for i in range(n):
                    X_[k, i] = x[i]
                _matvec(C_, x, tmp_p)
                for i in range(p):
                    Y_[k, i] = tmp_p[i] + YA_[k, i] + V_[k, i]
                for i in range(m):
                    ut[i] = U_[k, i] + UA_[k, i]
                _matvec(A_, x, xn)
                _matvec_add(B_, ut, xn)
                for i in range(n):
                    x[i] = xn[i] + W_[k, i]
        return X, Y, None, None

    Ae = _c(coding[0]); Be = _c(coding[1]); Ce = _c(coding[2]); De = _c(coding[3])
    Ad = _c(coding[4]); Bd = _c(coding[5]); Cd = _c(coding[6]); Dd = _c(coding[7])
    UE = np.empty((N, m))
    UD = np.empty((N, m))
    UE_ = UE
    UD_ = UD
    xe = np.zeros(Ae.shape[0]); xen = np.empty(Ae.shape[0])
    xd = np.zeros(Ad.shape[0]); xdn = np.empty(Ad.shape[0])
    ue = np.empty(m); ud = np.empty(m); recv = np.empty(m)
    with nogil:
        for k in range(N):
            _matvec(Ce, xe, ue)
            _matvec_add(De, U_[k], ue)
            for i in range(m):
                recv[i] = ue[i] + UA_[k, i]
            _matvec(Cd, xd, ud)
            _matvec_add(Dd, recv, ud)
            for i in range(n):
                X_[k, i] = x[i]
            _matvec(C_, x, tmp_p)
            for i in range(p):
                Y_[k, i] = tmp_p[i] + YA_[k, i] + V_[k, i]
            for i in range(m):
                UE_[k, i] = ue[i]
                UD_[k, i] = ud[i]
            _matvec(Ae, xe, xen)
            _matvec_add(Be, U_[k], xen)
            _matvec(Ad, xd, xdn)
            _matvec_add(Bd, recv, xdn)
            for i in range(xe.shape[0]):
                xe[i] = xen[i]
            for i in range(xd.shape[0]):
                xd[i] = xdn[i]
            _matvec(A_, x, xn)
            _matvec_add(B_, ud, xn)
            for i in range(n):
                x[i] = xn[i] + W_[k, i]
    return X, Y, UE, UD


def affine2(M1, v1, M2, v2):
    """``M1 v1 + M2 v2`` with the loop kernel's exact summation order."""
    cdef const double[:, ::1] M1_ = _c(M1)
    cdef const double[:, ::1] M2_ = _c(M2)
    cdef const double[::1] a = _c(v1)
    cdef const double[::1] b = _c(v2)
    out = np.empty(M1_.shape[0])
    cdef double[::1] o = out
    _matvec(M1_, a, o)
    _matvec_add(M2_, b, o)
    return out
