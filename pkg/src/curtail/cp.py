"""Conditional power matrices and threshold sets.

Conditional power (CP) at ``(s, m)`` is the probability of an eventual go
decision given the current point, evaluated at the design response rate
``p1``.  It is computed by backward recursion from ``m = N``; points where the
design stops carry CP 1 (go) or 0 (no-go).
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from . import _kernels as K
from .design import DesignFamily, PointStatus, base_status

DEDUP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CpMatrix:
    """CP, stopping status and reachability at every lattice point.

    Arrays are ``(N + 1, N + 1)`` and indexed ``[s, m]``; entries with
    ``s > m`` lie outside the lattice and are never reachable.
    """

    design: object
    p1: float
    cp: np.ndarray
    status: np.ndarray
    reachable: np.ndarray

    @property
    def N(self):
        return self.design.N

    def points(self):
        """Yield ``(s, m)`` for every lattice point in column order."""
        for m in range(self.N + 1):
            for s in range(m + 1):
                yield s, m


def _kernel_args(design):
    f = design.family
    if f in (DesignFamily.NSC, DesignFamily.SC):
        return design.r1, design.n1
    return -1, -1


def _reach(status):
    N = status.shape[1] - 1
    out = np.zeros(status.shape, dtype=bool)
    out[0, 0] = True
    for m in range(N):
        live = out[: m + 1, m] & (status[: m + 1, m] == PointStatus.CONTINUE)
        out[: m + 1, m + 1] |= live
        out[1 : m + 2, m + 1] |= live
    return out


def _from_kernel(design, p1, tf, te):
    N, r, B = design.N, design.r, design.block
    kcp, kst = K.alloc(N, B)
    r1, n1 = _kernel_args(design)
    K.backward(N, r, r1, n1, p1, tf, te, B, kcp, kst)
    cp = np.zeros((N + 1, N + 1))
    st = np.full((N + 1, N + 1), PointStatus.STOP_GO, dtype=np.int8)
    for m in range(N + 1):
        top = K.s_cap(m, r, B)
        cp[: top + 1, m] = kcp[: top + 1, m]
        st[: top + 1, m] = kst[: top + 1, m]
        # rows above the kernel's cap are already beyond r: success is certain
        cp[top + 1 : m + 1, m] = 1.0
    return cp, st


def _from_rules(design, p1):
    """Backward recursion for families that only stop at fixed analyses."""
    N = design.N
    cp = np.zeros((N + 1, N + 1))
    st = np.zeros((N + 1, N + 1), dtype=np.int8)
    for m in range(N, -1, -1):
        for s in range(m + 1):
            k = base_status(design, (s, m))
            st[s, m] = k
            if k == PointStatus.STOP_GO:
                cp[s, m] = 1.0
            elif k == PointStatus.STOP_NOGO:
                cp[s, m] = 0.0
            else:
                a, b = cp[s + 1, m + 1], cp[s, m + 1]
                cp[s, m] = a if a == b else p1 * a + (1.0 - p1) * b
    return cp, st


def cp_matrix(design, p1):
    """CP matrix of ``design`` including any stochastic stopping."""
    if design.family.curtailed:
        cp, st = _from_kernel(design, p1, design.theta_f, design.theta_e)
    else:
        cp, st = _from_rules(design, p1)
    return CpMatrix(design, float(p1), cp, st, _reach(st))


def cp_matrix_nsc(design, p1):
    """CP matrix of the design with thresholds switched off (certainty stopping only)."""
    return cp_matrix(design.base(), p1)


def cp_matrix_sc(design, p1):
    """CP matrix with stochastic curtailment at ``(theta_f, theta_e)``.

    Stops for no-go where the one-step CP is strictly below ``theta_f`` and
    for go where it is strictly above ``theta_e``; equality continues.
    """
    if not design.family.stochastic:
        raise ValueError(f"{design.family.label} has no CP thresholds")
    return cp_matrix(design, p1)


def cp_closed_form(design, point, p1):
    """Closed-form CP of the certainty-curtailed design at ``point``.

    Within the first stage of a two-stage design the remaining first-stage
    responses ``j`` must lift ``s + j`` above ``r1``, after which the second
    stage must supply the rest; otherwise CP is a binomial tail.
    """
    s, m = point
    N, r = design.N, design.r
    if s > r:
        return 1.0
    if m - s > N - r - 1:
        return 0.0
    two = design.family in (DesignFamily.NSC, DesignFamily.SC, DesignFamily.SIMON, DesignFamily.SIMON_GO)
    if two and m <= design.n1:
        n1, r1 = design.n1, design.r1
        if m - s > n1 - r1 - 1:
            return 0.0
        k = n1 - m
        j = np.arange(k + 1)
        ok = s + j > r1
        if design.family is DesignFamily.SIMON_GO:
            # an interim go is itself a success
            stage2 = np.where(s + j > design.e1, 1.0, binom.sf(r - s - j, N - n1, p1))
        else:
            stage2 = binom.sf(r - s - j, N - n1, p1)
        return float(np.sum(binom.pmf(j, k, p1) * stage2 * ok))
    return float(binom.sf(r - s, N - m, p1))


@dataclass(frozen=True, eq=False)
class ThetaSet:
    """Sorted distinct CP values, always including 0 and 1."""

    values: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def interior(self):
        v = self.values
        return v[(v > 0.0) & (v < 1.0)]


def dedupe_sorted(values, tol=DEDUP_TOL):
    v = np.sort(np.asarray(values, dtype=float))
    keep = [v[0]] if len(v) else []
    for x in v[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    return np.array(keep)


def theta_set(cpm):
    """Distinct CP values at reachable continue points, plus 0 and 1.

    Only points where the design may stop are used: ``m >= 1`` and, for
    block designs, ``m`` a multiple of the block size.
    """
    mask = cpm.reachable & (cpm.status == PointStatus.CONTINUE)
    m = np.arange(cpm.N + 1)
    mask[:, (m == 0) | (m % cpm.design.block != 0)] = False
    return ThetaSet(dedupe_sorted(np.concatenate(([0.0, 1.0], cpm.cp[mask]))))


def search_theta_set(design, p1):
    """Threshold candidates for ``design``, computed by the compiled kernel."""
    r1, n1 = _kernel_args(design)
    return ThetaSet(K.theta_values(design.N, design.r, r1, n1, p1, design.block))


def theta_pairs(theta, p1=None, theta_e_min=0.0):
    """All ordered pairs ``theta_F < theta_E`` drawn from ``theta``.

    With ``p1`` given, ``theta_F < p1`` is also imposed.  Returns an
    ``(n, 2)`` array in lexicographic order.
    """
    v = theta.values if isinstance(theta, ThetaSet) else np.asarray(theta)
    F = v if p1 is None else v[v < p1]
    E = v[v >= theta_e_min]
    fi, ej = np.meshgrid(F, E, indexing="ij")
    keep = fi < ej
    return np.column_stack((fi[keep], ej[keep]))
