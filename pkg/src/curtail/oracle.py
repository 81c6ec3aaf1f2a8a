"""Independent checks of the exact engine.

The stopping rules are re-derived here with a plain memoised recursion, and
operating characteristics are recomputed either by walking every complete
response sequence (small ``N``) or by seeded simulation.  Speed is not a goal.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .design import PointStatus, base_status
from .exact import operating_characteristics

BRUTE_FORCE_MAX_N = 20
SHARD = 100_000


def rule_status(design, p1):
    """``(N + 1, N + 1)`` status table derived directly from the stopping rules."""
    N = design.N
    tf, te = design.theta_f, design.theta_e
    stochastic = design.family.stochastic

    @lru_cache(maxsize=None)
    def node(s, m):
        k = base_status(design, (s, m))
        if k == PointStatus.STOP_GO:
            return k, 1.0
        if k == PointStatus.STOP_NOGO:
            return k, 0.0
        d = p1 * node(s + 1, m + 1)[1] + (1.0 - p1) * node(s, m + 1)[1]
        if design.family.curtailed and m >= 1 and m % design.block == 0:
            if d == 0.0 or (stochastic and d < tf):
                return PointStatus.STOP_NOGO, 0.0
            if d == 1.0 or (stochastic and d > te):
                return PointStatus.STOP_GO, 1.0
        return PointStatus.CONTINUE, d

    out = np.zeros((N + 1, N + 1), dtype=np.int8)
    for m in range(N, -1, -1):
        for s in range(m + 1):
            out[s, m] = node(s, m)[0]
    return out


@dataclass(frozen=True)
class BruteForceResult:
    p_go: float
    ess: float
    terminals: dict


def brute_force(design, p, p1=None):
    """Walk all ``2**N`` complete sequences to their first stopping point."""
    N = design.N
    if N > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for N={N} > {BRUTE_FORCE_MAX_N}")
    if design.family.stochastic and p1 is None:
        raise ValueError("p1 is needed to evaluate CP thresholds")
    st = rule_status(design, 0.5 if p1 is None else p1)
    codes = np.arange(2**N, dtype=np.int64)
    x = ((codes[:, None] >> np.arange(N)) & 1).astype(np.int16)
    S = np.concatenate((np.zeros((len(codes), 1), dtype=np.int16), np.cumsum(x, axis=1)), axis=1)
    m_idx = np.arange(N + 1)
    stopped = st[S, m_idx[None, :]] != PointStatus.CONTINUE
    m_stop = np.argmax(stopped, axis=1)
    s_stop = S[np.arange(len(codes)), m_stop]
    total = S[:, N]
    with np.errstate(divide="ignore"):
        w = np.power(p, total) * np.power(1.0 - p, N - total)
    go = st[s_stop, m_stop] == PointStatus.STOP_GO
    terminals = {}
    for s, m, q, g in zip(s_stop.tolist(), m_stop.tolist(), w.tolist(), go.tolist()):
        key = (s, m, "go" if g else "nogo")
        terminals[key] = terminals.get(key, 0.0) + q
    return BruteForceResult(math.fsum(w[go]), math.fsum(w * m_stop), terminals)


def truncated_paths(design, p1=None):
    """Distinct sequence prefixes ending at the first stopping point."""
    N = design.N
    if N > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for N={N} > {BRUTE_FORCE_MAX_N}")
    st = rule_status(design, 0.5 if p1 is None else p1)
    paths = set()
    for code in range(2**N):
        s = 0
        for m in range(1, N + 1):
            s += (code >> (m - 1)) & 1
            if st[s, m] != PointStatus.CONTINUE:
                paths.add((m, code & ((1 << m) - 1)))
                break
    return paths


@dataclass(frozen=True)
class SimulationResult:
    p: float
    n_sims: int
    seed: int
    p_go: float
    se_go: float
    ess: float
    se_ess: float


def monte_carlo(design, p, n_sims, seed, p1=None):
    """Simulate trials participant by participant with a seeded generator.

    Shards of fixed size draw from child seeds of ``seed``, so results do not
    depend on how shards are scheduled.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be positive")
    N = design.N
    st = rule_status(design, 0.5 if p1 is None else p1)
    n_shards = -(-n_sims // SHARD)
    children = np.random.SeedSequence(seed).spawn(n_shards)
    go_sum = 0
    m_sum = 0
    m_sq = 0
    for k, child in enumerate(children):
        n = min(SHARD, n_sims - k * SHARD)
        rng = np.random.default_rng(child)
        x = rng.random((n, N)) < p
        S = np.concatenate((np.zeros((n, 1), dtype=np.int64), np.cumsum(x, axis=1)), axis=1)
        stopped = st[S, np.arange(N + 1)[None, :]] != PointStatus.CONTINUE
        m_stop = np.argmax(stopped, axis=1)
        s_stop = S[np.arange(n), m_stop]
        go_sum += int(np.count_nonzero(st[s_stop, m_stop] == PointStatus.STOP_GO))
        m_sum += int(m_stop.sum())
        m_sq += int((m_stop.astype(np.int64) ** 2).sum())
    pg = go_sum / n_sims
    ess = m_sum / n_sims
    var = max(m_sq / n_sims - ess * ess, 0.0)
    return SimulationResult(
        float(p), n_sims, seed, pg, math.sqrt(pg * (1 - pg) / n_sims), ess, math.sqrt(var / n_sims)
    )


@dataclass(frozen=True)
class OracleReport:
    design: str
    method: str
    alpha: float
    power: float
    ess0: float
    ess1: float
    discrepancy: float
    n_sims: Optional[int] = None
    seed: Optional[int] = None
    max_z: Optional[float] = None

    @property
    def ok(self):
        if self.method == "brute_force":
            return self.discrepancy < 1e-10
        return self.max_z <= 4.0


def audit(design, params, method="auto", n_sims=200_000, seed=12345):
    """Compare the exact engine against brute force or simulation."""
    oc = operating_characteristics(design, params)
    if method == "auto":
        method = "brute_force" if design.N <= BRUTE_FORCE_MAX_N else "monte_carlo"
    if method == "brute_force":
        b0 = brute_force(design, params.p0, params.p1)
        b1 = brute_force(design, params.p1, params.p1)
        got = (b0.p_go, b1.p_go, b0.ess, b1.ess)
        disc = max(abs(a - b) for a, b in zip(got, (oc.alpha, oc.power, oc.ess0, oc.ess1)))
        return OracleReport(design.describe(), method, *got, disc)
    if method != "monte_carlo":
        raise ValueError(f"unknown audit method {method!r}")
    s0 = monte_carlo(design, params.p0, n_sims, seed, params.p1)
    s1 = monte_carlo(design, params.p1, n_sims, seed + 1, params.p1)
    got = (s0.p_go, s1.p_go, s0.ess, s1.ess)
    ses = (s0.se_go, s1.se_go, s0.se_ess, s1.se_ess)
    exact = (oc.alpha, oc.power, oc.ess0, oc.ess1)
    diffs = [abs(a - b) for a, b in zip(got, exact)]
    zs = [d / se if se > 0 else (0.0 if d == 0 else math.inf) for d, se in zip(diffs, ses)]
    return OracleReport(design.describe(), method, *got, max(diffs), n_sims, seed, max(zs))
