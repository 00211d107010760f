# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 method-of-steps kernel for the linear + Nicholson-birth family.

The right-hand side is ``A(t) x + B(t) y + P(t) * y * exp(-y)`` with the
coefficients pre-tabulated at the three RK4 stage times of every step.
Mirrors ``persist_dde._kernels_py.rk4_family`` statement for statement.
"""
from libc.math cimport exp, fabs, isfinite

cdef double NEG_TOL = 1e-12


cdef inline void _rhs(Py_ssize_t N, double[:, :] A, double[:, :] B, double[:] P,
                      double* x, double* y, double* out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(N):
        acc = 0.0
        for j in range(N):
            acc += A[i, j] * x[j] + B[i, j] * y[j]
        acc += P[i] * y[i] * exp(-y[i])
        out[i] = acc


cdef inline int _guard(Py_ssize_t N, double* x, bint cone, double cap) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(N):
        if not isfinite(x[i]) or fabs(x[i]) > cap:
            return 1
        if cone and x[i] < 0.0:
            if x[i] > -NEG_TOL:
                x[i] = 0.0
            else:
                return 2
    return 0


cdef inline void _hermite(Py_ssize_t N, double theta, double hk, double[:] x0, double[:] s0,
                          double[:] x1, double[:] s1, double* out) noexcept nogil:
    cdef double om = 1.0 - theta
    cdef double h00 = (1.0 + 2.0 * theta) * om * om
    cdef double h10 = theta * om * om
    cdef double h01 = theta * theta * (3.0 - 2.0 * theta)
    cdef double h11 = theta * theta * (theta - 1.0)
    cdef Py_ssize_t i
    for i in range(N):
        out[i] = h00 * x0[i] + h10 * hk * s0[i] + h01 * x1[i] + h11 * hk * s1[i]


def rk4_family(double h, double h_last, Py_ssize_t m, double[:] x0, double[:, :, :] hist,
               double[:, :, :, :] A, double[:, :, :, :] B, double[:, :, :] P,
               bint cone, double cap, double[:, :] X, double[:, :] S):
    """Advance the family ODE over ``A.shape[0]`` steps; returns ``(status, step)``.

    status 0 ok, 1 blow-up / non-finite, 2 positivity violation.
    """
    cdef Py_ssize_t n_steps = A.shape[0]
    cdef Py_ssize_t N = x0.shape[0]
    cdef Py_ssize_t n, i, c, k
    cdef double hn, theta
    cdef double cs[3]
    cdef double xs[8]
    cdef double ys[3][8]
    cdef double k2[8]
    cdef double k3[8]
    cdef double k4[8]
    cdef int status = 0
    cs[0] = 0.0
    cs[1] = 0.5
    cs[2] = 1.0
    if N > 8:
        raise ValueError("compiled kernel supports dimension <= 8")

    with nogil:
        for i in range(N):
            X[0, i] = x0[i]
            xs[i] = hist[0, 0, i]
        _rhs(N, A[0, 0], B[0, 0], P[0, 0], &X[0, 0], xs, &S[0, 0])
        for n in range(n_steps):
            hn = h_last if n == n_steps - 1 else h
            for c in range(3):
                if n < m:
                    for i in range(N):
                        ys[c][i] = hist[n, c, i]
                else:
                    k = n - m
                    theta = cs[c] * hn / h
                    _hermite(N, theta, h, X[k], S[k], X[k + 1], S[k + 1], ys[c])
                status = _guard(N, ys[c], cone, cap)
                if status:
                    break
            if status:
                break
            # stage 2
            for i in range(N):
                xs[i] = X[n, i] + 0.5 * hn * S[n, i]
            status = _guard(N, xs, cone, cap)
            if status:
                break
            _rhs(N, A[n, 1], B[n, 1], P[n, 1], xs, ys[1], k2)
            # stage 3
            for i in range(N):
                xs[i] = X[n, i] + 0.5 * hn * k2[i]
            status = _guard(N, xs, cone, cap)
            if status:
                break
            _rhs(N, A[n, 1], B[n, 1], P[n, 1], xs, ys[1], k3)
            # stage 4
            for i in range(N):
                xs[i] = X[n, i] + hn * k3[i]
            status = _guard(N, xs, cone, cap)
            if status:
                break
            _rhs(N, A[n, 2], B[n, 2], P[n, 2], xs, ys[2], k4)
            for i in range(N):
                xs[i] = X[n, i] + hn / 6.0 * (S[n, i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            status = _guard(N, xs, cone, cap)
            if status:
                break
            for i in range(N):
                X[n + 1, i] = xs[i]
            _rhs(N, A[n, 2], B[n, 2], P[n, 2], &X[n + 1, 0], ys[2], &S[n + 1, 0])
    return status, n if status else n_steps
