"""Pure-Python twin of the compiled family kernel (same signature, same arithmetic order)."""
import math

NEG_TOL = 1e-12


def _rhs(N, A, B, P, x, y):
    out = [0.0] * N
    for i in range(N):
        acc = 0.0
        Ai = A[i]
        Bi = B[i]
        for j in range(N):
            acc += Ai[j] * x[j] + Bi[j] * y[j]
        acc += P[i] * y[i] * math.exp(-y[i])
        out[i] = acc
    return out


def _guard(x, cone, cap):
    for i, v in enumerate(x):
        if not math.isfinite(v) or abs(v) > cap:
            return 1
        if cone and v < 0.0:
            if v > -NEG_TOL:
                x[i] = 0.0
            else:
                return 2
    return 0


def _hermite(theta, hk, x0, s0, x1, s1):
    om = 1.0 - theta
    h00 = (1.0 + 2.0 * theta) * om * om
    h10 = theta * om * om
    h01 = theta * theta * (3.0 - 2.0 * theta)
    h11 = theta * theta * (theta - 1.0)
    return [h00 * a + h10 * hk * b + h01 * c + h11 * hk * d for a, b, c, d in zip(x0, s0, x1, s1)]


def rk4_family(h, h_last, m, x0, hist, A, B, P, cone, cap, X, S):
    """Advance the family ODE over ``len(A)`` steps; returns ``(status, step)``."""
    n_steps = A.shape[0]
    N = x0.shape[0]
    # nested lists are much faster than numpy scalars for these tiny vectors
    A = A.tolist()
    B = B.tolist()
    P = P.tolist()
    hist = hist.tolist()
    Xl = [list(x0)] + [None] * n_steps
    Sl = [None] * (n_steps + 1)
    Sl[0] = _rhs(N, A[0][0], B[0][0], P[0][0], Xl[0], list(hist[0][0]))
    cs = (0.0, 0.5, 1.0)
    status = 0
    n = 0
    for n in range(n_steps):
        hn = h_last if n == n_steps - 1 else h
        xn = Xl[n]
        sn = Sl[n]
        ys = []
        for c in cs:
            if n < m:
                yc = list(hist[n][int(2 * c)])
            else:
                k = n - m
                yc = _hermite(c * hn / h, h, Xl[k], Sl[k], Xl[k + 1], Sl[k + 1])
            status = _guard(yc, cone, cap)
            if status:
                break
            ys.append(yc)
        if status:
            break
        xs = [xn[i] + 0.5 * hn * sn[i] for i in range(N)]
        status = _guard(xs, cone, cap)
        if status:
            break
        k2 = _rhs(N, A[n][1], B[n][1], P[n][1], xs, ys[1])
        xs = [xn[i] + 0.5 * hn * k2[i] for i in range(N)]
        status = _guard(xs, cone, cap)
        if status:
            break
        k3 = _rhs(N, A[n][1], B[n][1], P[n][1], xs, ys[1])
        xs = [xn[i] + hn * k3[i] for i in range(N)]
        status = _guard(xs, cone, cap)
        if status:
            break
        k4 = _rhs(N, A[n][2], B[n][2], P[n][2], xs, ys[2])
        xs = [xn[i] + hn / 6.0 * (sn[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(N)]
        status = _guard(xs, cone, cap)
        if status:
            break
        Xl[n + 1] = xs
        Sl[n + 1] = _rhs(N, A[n][2], B[n][2], P[n][2], xs, ys[2])
    done = n_steps if not status else n
    X[: done + 1] = Xl[: done + 1]
    S[: done + 1] = Sl[: done + 1]
    return status, done
