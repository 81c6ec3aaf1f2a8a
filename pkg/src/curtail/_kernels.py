"""Compiled lattice kernels shared by the CP, exact and search engines.

Status codes are ``0`` (continue), ``1`` (stop, go) and ``2`` (stop, no-go).
Matrices are indexed ``[s, m]`` and sized ``(N + block + 2, N + 2)`` so that
the ``s + 1`` / ``m + 1`` neighbours of every point are addressable.

A two-stage interim rule is encoded with ``n1 >= 1``; ``n1 = -1`` disables it.
Stopping of any kind is only checked at monitoring points, i.e. ``m >= 1``
with ``m % block == 0``, and unconditionally at ``m = N``.
"""

import numpy as np
from numba import njit

CONTINUE = 0
GO = 1
NOGO = 2


def alloc(N, block=1):
    cp = np.zeros((N + block + 2, N + 2))
    st = np.zeros((N + block + 2, N + 2), dtype=np.int8)
    return cp, st


@njit(cache=True)
def s_cap(m, r, block):
    # responses beyond r + block can never be reached without a stop
    return min(m, r + block)


@njit(cache=True)
def backward(N, r, r1, n1, p1, tf, te, block, cp, st):
    """Fill ``cp``/``st`` by backward recursion from ``m = N``."""
    for s in range(0, s_cap(N, r, block) + 1):
        if s > r:
            cp[s, N] = 1.0
            st[s, N] = GO
        else:
            cp[s, N] = 0.0
            st[s, N] = NOGO
    for m in range(N - 1, -1, -1):
        monitor = m >= 1 and m % block == 0
        for s in range(0, s_cap(m, r, block) + 1):
            a = cp[s + 1, m + 1]
            b = cp[s, m + 1]
            d = a if a == b else p1 * a + (1.0 - p1) * b
            if s > r:
                # go is certain; also avoids reading past the row cap between monitoring points
                d = 1.0
            if monitor:
                f = m - s
                if s > r:
                    cp[s, m] = 1.0
                    st[s, m] = GO
                    continue
                # rule-based no-go outranks a go that is merely certain from here on
                if f > N - r - 1 or (n1 >= 1 and m <= n1 and f > n1 - r1 - 1):
                    cp[s, m] = 0.0
                    st[s, m] = NOGO
                    continue
                if d == 1.0:
                    cp[s, m] = 1.0
                    st[s, m] = GO
                    continue
                if d == 0.0:
                    cp[s, m] = 0.0
                    st[s, m] = NOGO
                    continue
                if d < tf:
                    cp[s, m] = 0.0
                    st[s, m] = NOGO
                    continue
                if d > te:
                    cp[s, m] = 1.0
                    st[s, m] = GO
                    continue
            cp[s, m] = d
            st[s, m] = CONTINUE


@njit(cache=True)
def forward(N, r, block, st, p, reach):
    """Return ``(P(go), E(N))`` at response rate ``p`` for a status matrix."""
    for m in range(N + 1):
        for s in range(0, s_cap(m, r, block) + 1):
            reach[s, m] = 0.0
    reach[0, 0] = 1.0
    go = 0.0
    ess = 0.0
    comp = 0.0
    for m in range(N + 1):
        for s in range(0, s_cap(m, r, block) + 1):
            q = reach[s, m]
            if q == 0.0:
                continue
            k = st[s, m]
            if k == CONTINUE:
                reach[s + 1, m + 1] += p * q
                reach[s, m + 1] += (1.0 - p) * q
            else:
                # Kahan-compensated accumulation of m * q
                y = m * q - comp
                t = ess + y
                comp = (t - ess) - y
                ess = t
                if k == GO:
                    go += q
    return go, ess


@njit(cache=True)
def reachable(N, r, block, st, out):
    for m in range(N + 1):
        for s in range(0, s_cap(m, r, block) + 1):
            out[s, m] = False
    out[0, 0] = True
    for m in range(N):
        for s in range(0, s_cap(m, r, block) + 1):
            if out[s, m] and st[s, m] == CONTINUE:
                out[s + 1, m + 1] = True
                out[s, m + 1] = True


@njit(cache=True)
def theta_values(N, r, r1, n1, p1, block):
    """Distinct base-design CP values at reachable monitored continue points, plus 0 and 1."""
    cp = np.zeros((N + block + 2, N + 2))
    st = np.zeros((N + block + 2, N + 2), dtype=np.int8)
    backward(N, r, r1, n1, p1, 0.0, 1.0, block, cp, st)
    ok = np.zeros((N + block + 2, N + 2), dtype=np.bool_)
    reachable(N, r, block, st, ok)
    buf = np.empty((N + 1) * (N + block + 2) + 2)
    k = 0
    buf[k] = 0.0
    buf[k + 1] = 1.0
    k += 2
    for m in range(block, N + 1, block):
        for s in range(0, s_cap(m, r, block) + 1):
            if ok[s, m] and st[s, m] == CONTINUE:
                buf[k] = cp[s, m]
                k += 1
    v = np.sort(buf[:k])
    out = np.empty(k)
    n = 0
    for i in range(k):
        if n == 0 or v[i] - out[n - 1] > 1e-12:
            out[n] = v[i]
            n += 1
    return out[:n]


@njit(cache=True)
def _eval(N, r, r1, n1, p0, p1, tf, te, block, cp, st, reach):
    backward(N, r, r1, n1, p1, tf, te, block, cp, st)
    pw, e1 = forward(N, r, block, st, p1, reach)
    a, e0 = forward(N, r, block, st, p0, reach)
    return a, pw, e0, e1


@njit(cache=True)
def sweep(N, r, r1, n1, p0, p1, block, F, E, alpha_max, power_min, exhaustive):
    """Evaluate threshold pairs ``(F[i], E[j])`` with ``F[i] < E[j]``.

    Returns an array of feasible rows ``(i, j, alpha, power, ess0, ess1)``.

    Both alpha and power are nonincreasing in each threshold, so unless
    ``exhaustive`` is set the alpha-feasible lower end of ``F`` is found by
    bisection and the scan over ``F`` stops once power falls short.
    """
    cp = np.zeros((N + block + 2, N + 2))
    st = np.zeros((N + block + 2, N + 2), dtype=np.int8)
    reach = np.zeros((N + block + 2, N + 2))
    nf = F.shape[0]
    ne = E.shape[0]
    rows = np.empty((16, 6))
    k = 0
    hi_prev = nf  # alpha-feasible start is nonincreasing in E
    for j in range(ne):
        te = E[j]
        stop = nf
        while stop > 0 and F[stop - 1] >= te:
            stop -= 1
        if stop == 0:
            continue
        start = 0
        if not exhaustive:
            # smallest i with alpha(F[i], te) <= alpha_max
            lo = 0
            hi = min(hi_prev, stop)
            while lo < hi:
                mid = (lo + hi) // 2
                a, pw, e0, e1 = _eval(N, r, r1, n1, p0, p1, F[mid], te, block, cp, st, reach)
                if a <= alpha_max:
                    hi = mid
                else:
                    lo = mid + 1
            start = lo
            if start >= stop:
                # alpha never met for this te; a larger te only lowers alpha
                continue
            hi_prev = start
        for i in range(start, stop):
            a, pw, e0, e1 = _eval(N, r, r1, n1, p0, p1, F[i], te, block, cp, st, reach)
            if pw < power_min and not exhaustive:
                if i == 0:
                    # power is nonincreasing in te too, so no later pair can recover
                    return rows[:k]
                break
            if a <= alpha_max and pw >= power_min:
                if k == rows.shape[0]:
                    grown = np.empty((rows.shape[0] * 2, 6))
                    grown[:k] = rows[:k]
                    rows = grown
                rows[k, 0] = i
                rows[k, 1] = j
                rows[k, 2] = a
                rows[k, 3] = pw
                rows[k, 4] = e0
                rows[k, 5] = e1
                k += 1
    return rows[:k]


@njit(cache=True)
def batch_eval(N, r, r1, n1, p0, p1, tf, te, block):
    """Evaluate many designs sharing ``N``; ``r``, ``r1``, ``n1`` are arrays.

    Returns an ``(n, 4)`` array of ``(alpha, power, ess0, ess1)``.
    """
    n = r.shape[0]
    rmax = 0
    for i in range(n):
        rmax = max(rmax, r[i])
    cp = np.zeros((rmax + block + 2, N + 2))
    st = np.zeros((rmax + block + 2, N + 2), dtype=np.int8)
    reach = np.zeros((rmax + block + 2, N + 2))
    out = np.empty((n, 4))
    for i in range(n):
        a, pw, e0, e1 = _eval(N, r[i], r1[i], n1[i], p0, p1, tf, te, block, cp, st, reach)
        out[i, 0] = a
        out[i, 1] = pw
        out[i, 2] = e0
        out[i, 3] = e1
    return out
