"""Exact terminal distributions and operating characteristics.

Everything here is a forward pass over the lattice: probability mass starts
at ``(0, 0)`` and flows through continue points until a stopping point
absorbs it.  No simulation is involved.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .cp import cp_matrix
from .design import DesignFamily, LatticePoint, PointStatus


@dataclass(frozen=True, eq=False)
class TerminalDistribution:
    """Terminal points with decisions and reach probabilities at rate ``p``.

    ``s``, ``m``, ``go`` and ``prob`` are parallel arrays in column order
    (by ``m``, then ``s``).
    """

    design: object
    p: float
    s: np.ndarray
    m: np.ndarray
    go: np.ndarray
    prob: np.ndarray

    @property
    def terminals(self):
        return [
            (LatticePoint(int(a), int(b)), "go" if g else "nogo", float(q))
            for a, b, g, q in zip(self.s, self.m, self.go, self.prob)
        ]

    @property
    def p_go(self):
        return float(self.prob[self.go].sum())

    @property
    def ess(self):
        return math.fsum(self.m * self.prob)


@dataclass(frozen=True)
class OperatingCharacteristics:
    alpha: float
    power: float
    ess0: float
    ess1: float
    n_max: int
    pct_ess0: Optional[float] = None
    pct_ess1: Optional[float] = None

    def feasible(self, params):
        return self.alpha <= params.alpha and self.power >= 1.0 - params.beta


def terminal_points(cpm):
    """Reachable stopping points of a CP matrix as ``(s, m, go)`` arrays in column order."""
    stop = cpm.reachable & (cpm.status != PointStatus.CONTINUE)
    m_idx, s_idx = np.nonzero(stop.T)
    go = cpm.status[s_idx, m_idx] == PointStatus.STOP_GO
    return s_idx, m_idx, go


def reach_probabilities(status, p):
    """Probability of reaching each point; mass is absorbed at stopping points."""
    N = status.shape[1] - 1
    reach = np.zeros(status.shape)
    reach[0, 0] = 1.0
    for m in range(N):
        flow = np.where(status[: m + 1, m] == PointStatus.CONTINUE, reach[: m + 1, m], 0.0)
        reach[1 : m + 2, m + 1] += p * flow
        reach[: m + 1, m + 1] += (1.0 - p) * flow
    return reach


def terminal_distribution(cpm, p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"response rate must lie in [0, 1], got {p}")
    s, m, go = terminal_points(cpm)
    reach = reach_probabilities(cpm.status, p)
    return TerminalDistribution(cpm.design, float(p), s, m, go, reach[s, m])


def _fast_oc(design, p0, p1):
    N, r, B = design.N, design.r, design.block
    r1, n1 = (design.r1, design.n1) if design.family in (DesignFamily.NSC, DesignFamily.SC) else (-1, -1)
    cp, st = K.alloc(N, B)
    reach = np.zeros_like(cp)
    return K._eval(N, r, r1, n1, p0, p1, design.theta_f, design.theta_e, B, cp, st, reach)


def operating_characteristics(design, params):
    """Exact alpha, power and expected sample sizes of ``design``."""
    if design.family.curtailed:
        a, pw, e0, e1 = _fast_oc(design, params.p0, params.p1)
    else:
        cpm = cp_matrix(design, params.p1)
        t0 = terminal_distribution(cpm, params.p0)
        t1 = terminal_distribution(cpm, params.p1)
        a, pw, e0, e1 = t0.p_go, t1.p_go, t0.ess, t1.ess
    return OperatingCharacteristics(float(a), float(pw), float(e0), float(e1), design.N)


def replay(cpm, outcomes):
    """Follow a response sequence (1 = response) to its first stopping point.

    Returns ``(m, s, decision)``; ``decision`` is None if the sequence ends
    before the design stops.
    """
    s = 0
    for m, x in enumerate(outcomes, start=1):
        if m > cpm.N:
            break
        s += int(x)
        k = cpm.status[s, m]
        if k != PointStatus.CONTINUE:
            return m, s, "go" if k == PointStatus.STOP_GO else "nogo"
    return min(len(outcomes), cpm.N), s, None


@dataclass(frozen=True, eq=False)
class PathCounts:
    """Exact path counts into each reachable terminal point.

    ``total[(s, m)]`` counts truncated paths ending at the terminal;
    ``via_first_response[(s, m)]`` counts those whose first outcome is a response.
    """

    total: dict
    via_first_response: dict


def path_counts(cpm):
    N = cpm.N
    st = cpm.status
    total = [[0] * (N + 2) for _ in range(N + 2)]
    first = [[0] * (N + 2) for _ in range(N + 2)]
    total[0][0] = 1
    out_total, out_first = {}, {}
    for m in range(N + 1):
        for s in range(m + 1):
            t = total[s][m]
            if t == 0:
                continue
            f = first[s][m]
            if st[s, m] != PointStatus.CONTINUE:
                out_total[(s, m)] = t
                out_first[(s, m)] = f
                continue
            total[s + 1][m + 1] += t
            total[s][m + 1] += t
            if m == 0:
                first[1][1] += 1
            else:
                first[s + 1][m + 1] += f
                first[s][m + 1] += f
    return PathCounts(out_total, out_first)
