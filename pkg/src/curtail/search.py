"""Exhaustive design search, dominance reduction and loss-based selection.

Search results are tables with one row per design realisation and the
columns in ``COLUMNS``.  Integer fields that a family does not use hold -1.
"""

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binom, norm

from . import __version__
from . import _kernels as K
from .design import DesignFamily, DesignParams, DesignRealisation
from .exact import OperatingCharacteristics
from .wald import wald_boundaries

log = logging.getLogger(__name__)

COLUMNS = ("N", "r", "r1", "n1", "e1", "theta_f", "theta_e", "alpha", "power", "ess0", "ess1")
C = {name: i for i, name in enumerate(COLUMNS)}

CRITERIA = ("h0opt", "h1opt", "h0minimax", "h1minimax")

# bump when a change alters search results; part of the cache key with the kernel source
SEARCH_REVISION = 2

# feasibility prefilter slack when reusing Simon's alpha/power for NSC candidates
_PREFILTER_SLACK = 1e-9


def ahern_boundary(N, params):
    """Approximate final boundary of an uncurtailed single-stage design."""
    za = norm.ppf(1.0 - params.alpha / 2.0)
    zb = norm.ppf(1.0 - params.beta)
    return N * (params.p0 + za / (za + zb) * (params.p1 - params.p0))


def r_bounds(N, params, rule="ahern"):
    """Inclusive range ``(lo, hi)`` of final boundaries ``r`` searched at ``N``.

    May be empty (``lo > hi``) for very small ``N``.
    """
    lo = math.floor(N * params.p0)
    hi = min(math.ceil(N * params.p1), N - 1)
    if rule == "wald":
        w = wald_boundaries(params)
        lo = max(lo, math.ceil(w.s_nogo(N)))
        hi = min(hi, math.floor(w.s_go(N)))
    elif rule != "ahern":
        raise ValueError(f"unknown r-bound rule {rule!r}")
    return lo, hi


@dataclass(frozen=True)
class SearchConfig:
    """Search settings for one scenario.

    ``n_max`` maps family names (``"simon"``, ``"nsc"``, ``"sc"``,
    ``"mstage"``, ``"block"``) to their largest ``N``.  Simon and Simon go
    default to ``simon_cap`` times the ``N`` of the H0-optimal Simon design.
    """

    params: DesignParams
    n_min: int = 5
    n_max: tuple = (("nsc", 80), ("mstage", 80), ("sc", 47), ("block", 80))
    r_rule: str = "ahern"
    theta_e_min: float = 0.95
    grid_step: float = 0.01
    dominance: str = "exact"
    simon_cap: float = 1.2
    simon_probe_max: int = 80

    def __post_init__(self):
        if not isinstance(self.n_max, tuple):
            object.__setattr__(self, "n_max", tuple(sorted(dict(self.n_max).items())))
        if self.n_min < 1:
            raise ValueError("n_min must be positive")
        if not 0.0 < self.grid_step <= 0.5:
            raise ValueError("grid step must lie in (0, 0.5]")
        if self.dominance not in ("rounded", "exact"):
            raise ValueError("dominance must be 'rounded' or 'exact'")
        if self.r_rule not in ("ahern", "wald"):
            raise ValueError("r rule must be 'ahern' or 'wald'")

    def max_n(self, family):
        caps = dict(self.n_max)
        if family.value in caps:
            return caps[family.value]
        if family in (DesignFamily.SIMON, DesignFamily.SIMON_GO):
            return None
        return max(caps.values())

    def digest(self):
        """Hash of the settings that determine the feasible fronts."""
        d = asdict(self)
        for k in ("grid_step", "dominance", "n_max"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# candidate enumeration


def enumerate_candidates(config, family, n_hi=None, block=1):
    """Yield base realisations (no thresholds) in lexicographic order."""
    p = config.params
    n_hi = config.max_n(family) if n_hi is None else n_hi
    if n_hi is None:
        n_hi = config.simon_probe_max
    for N in range(config.n_min, n_hi + 1):
        if family is DesignFamily.BLOCK_SC and N % block:
            continue
        lo, hi = r_bounds(N, p, config.r_rule)
        for r in range(max(lo, 0), hi + 1):
            if not family.two_stage:
                yield DesignRealisation(family, r, N, block=block)
                continue
            for r1 in range(0, r + 1):
                for n1 in range(r1 + 1, N):
                    if family is DesignFamily.SIMON_GO:
                        for e1 in range(r1 + 1, n1 + 1):
                            yield DesignRealisation(family, r, N, r1, n1, e1)
                    else:
                        yield DesignRealisation(family, r, N, r1, n1)


# ---------------------------------------------------------------------------
# per-N evaluation tasks


def _rows(N, r, r1, n1, e1, tf, te, oc):
    n = len(oc)
    out = np.empty((n, len(COLUMNS)))
    out[:, 0] = N
    out[:, 1] = r
    out[:, 2] = r1
    out[:, 3] = n1
    out[:, 4] = e1
    out[:, 5] = tf
    out[:, 6] = te
    out[:, 7:11] = oc
    return out


def _empty():
    return np.empty((0, len(COLUMNS)))


def _simon_all(params, N, lo, hi, with_go):
    """All Simon (or Simon go) designs at ``N`` with their operating characteristics."""
    p0, p1 = params.p0, params.p1
    rs = np.arange(lo, hi + 1)
    blocks = []
    for n1 in range(1, N):
        n2 = N - n1
        k = np.arange(n1 + 1)
        stats = []
        for p in (p0, p1):
            b = binom.pmf(k, n1, p)
            g = b[None, :] * binom.sf(rs[:, None] - k[None, :], n2, p)
            # tail sums over k >= j, padded with a zero column at j = n1 + 1
            G = np.concatenate((np.cumsum(g[:, ::-1], axis=1)[:, ::-1], np.zeros((len(rs), 1))), axis=1)
            B = np.concatenate((np.cumsum(b[::-1])[::-1], [0.0]))
            stats.append((G, B))
        r1s = np.arange(0, min(hi, n1 - 1) + 1)
        if with_go:
            R, R1, E1 = np.meshgrid(np.arange(len(rs)), r1s, np.arange(n1 + 1), indexing="ij")
            ok = (R1 <= rs[R]) & (E1 > R1)
            R, R1, E1 = R[ok], R1[ok], E1[ok]
            oc = []
            for G, B in stats:
                oc.append(G[R, R1 + 1] - G[R, E1 + 1] + B[E1 + 1])
            for G, B in stats:
                oc.append(n1 + n2 * (B[R1 + 1] - B[E1 + 1]))
            e1 = E1
        else:
            R, R1 = np.meshgrid(np.arange(len(rs)), r1s, indexing="ij")
            ok = R1 <= rs[R]
            R, R1 = R[ok], R1[ok]
            oc = [G[R, R1 + 1] for G, B in stats] + [n1 + n2 * B[R1 + 1] for G, B in stats]
            e1 = -1
        blocks.append(_rows(N, rs[R], R1, n1, e1, 0.0, 1.0, np.column_stack(oc)))
    return np.concatenate(blocks) if blocks else _empty()


def _feasible(rows, params, slack=0.0):
    ok = (rows[:, C["alpha"]] <= params.alpha + slack) & (rows[:, C["power"]] >= 1.0 - params.beta - slack)
    return rows[ok]


@dataclass(frozen=True)
class _Task:
    family: str
    block: int
    N: int
    r_lo: int
    r_hi: int
    params: DesignParams
    theta_e_min: float


def _run_task(task):
    fam = DesignFamily(task.family)
    params, N = task.params, task.N
    if task.r_lo > task.r_hi:
        return _empty()
    if fam in (DesignFamily.SIMON, DesignFamily.SIMON_GO):
        rows = _feasible(_simon_all(params, N, task.r_lo, task.r_hi, fam is DesignFamily.SIMON_GO), params)
    elif fam is DesignFamily.NSC:
        cand = _feasible(_simon_all(params, N, task.r_lo, task.r_hi, False), params, _PREFILTER_SLACK)
        if len(cand):
            r = cand[:, C["r"]].astype(np.int64)
            r1 = cand[:, C["r1"]].astype(np.int64)
            n1 = cand[:, C["n1"]].astype(np.int64)
            oc = K.batch_eval(N, r, r1, n1, params.p0, params.p1, 0.0, 1.0, 1)
            cand = cand.copy()
            cand[:, 7:11] = oc
        rows = _feasible(cand, params)
    elif fam is DesignFamily.SINGLE_STAGE:
        rs = np.arange(task.r_lo, task.r_hi + 1)
        oc = np.column_stack(
            (binom.sf(rs, N, params.p0), binom.sf(rs, N, params.p1), np.full(len(rs), N), np.full(len(rs), N))
        )
        rows = _feasible(_rows(N, rs, -1, -1, -1, 0.0, 1.0, oc), params)
    else:
        rows = _threshold_rows(fam, task)
    return reduce_same_n(rows)


def _sweep_rows(N, r, r1, n1, params, block, F, E, label_r1, label_n1):
    res = K.sweep(N, r, r1, n1, params.p0, params.p1, block, F, E, params.alpha, 1.0 - params.beta, False)
    if not len(res):
        return _empty()
    i = res[:, 0].astype(np.int64)
    j = res[:, 1].astype(np.int64)
    out = _rows(N, r, label_r1, label_n1, -1, F[i], E[j], res[:, 2:6])
    return reduce_same_n(out)


def _threshold_rows(fam, task):
    params, N, B = task.params, task.N, task.block
    p1 = params.p1
    out = []
    for r in range(task.r_lo, task.r_hi + 1):
        if fam in (DesignFamily.MSTAGE, DesignFamily.BLOCK_SC):
            th = K.theta_values(N, r, -1, -1, p1, B)
            # block designs keep every theta_F; per-participant designs need theta_F < p1
            F = th[th < 1.0] if fam is DesignFamily.BLOCK_SC else th[th < p1]
            E = th[th >= task.theta_e_min]
            out.append(_sweep_rows(N, r, -1, -1, params, B, F, E, -1, -1))
            continue
        for r1 in range(0, r + 1):
            for n1 in range(r1 + 1, N):
                if n1 - r1 >= N - r:
                    # the interim clause can never bind: identical to the per-participant design,
                    # so only the lexicographically first such (r1, n1) is kept
                    if r1 > 0 or n1 > N - r:
                        continue
                th = K.theta_values(N, r, r1, n1, p1, 1)
                F = th[th < p1]
                E = th[th >= task.theta_e_min]
                out.append(_sweep_rows(N, r, r1, n1, params, 1, F, E, r1, n1))
    return np.concatenate(out) if out else _empty()


# ---------------------------------------------------------------------------
# dominance


def tie_keys(rows):
    """Tie-break keys in priority order.

    Smaller N, then r, then (r1, n1, e1), then smaller thetaF and larger
    thetaE.  Threshold pairs that give the same design therefore resolve to
    the widest continuation band.
    """
    return [rows[:, C[k]] for k in ("N", "r", "r1", "n1", "e1", "theta_f")] + [-rows[:, C["theta_e"]]]


def _lexsort(primary, rows):
    """Indices sorting by ``primary`` keys (most significant first), then tie keys."""
    keys = list(primary) + tie_keys(rows)
    return np.lexsort(keys[::-1])


def _round1(x):
    return np.floor(np.asarray(x) * 10.0 + 0.5) / 10.0


def _order(rows, mode):
    e0, e1, n = rows[:, C["ess0"]], rows[:, C["ess1"]], rows[:, C["N"]]
    if mode == "rounded":
        return _lexsort([_round1(e0), _round1(e1), n, e0, e1], rows)
    return _lexsort([e0, e1, n], rows)


def reduce_same_n(rows):
    """Two-dimensional Pareto reduction for rows sharing one ``N``.

    Exact-precision reduction here is safe for both dominance modes: a row
    dominated exactly is rounded-dominated by, or rounded-equal to, a row that
    sorts ahead of it.
    """
    if len(rows) <= 1:
        return rows
    idx = _order(rows, "exact")
    best = np.inf
    keep = []
    for i in idx:
        v = rows[i, C["ess1"]]
        if v < best:
            keep.append(i)
            best = v
    return rows[np.sort(np.array(keep))]


def pareto_reduce(rows, mode="exact"):
    """Remove dominated realisations on ``(ess0, ess1, N)``.

    A row is dropped when another is no worse on all three and better on at
    least one.  Rows equal on all three are duplicates and only the first in
    tie-break order survives.  In ``rounded`` mode expected sample sizes are
    compared at one decimal place.
    """
    if len(rows) == 0:
        return rows
    idx = _order(rows, mode)
    e1 = rows[:, C["ess1"]]
    if mode == "rounded":
        e1 = _round1(e1)
    Ns = rows[:, C["N"]].astype(np.int64)
    best = np.full(Ns.max() + 2, np.inf)
    keep = []
    for i in idx:
        n = Ns[i]
        if best[: n + 1].min() <= e1[i]:
            continue
        keep.append(i)
        if e1[i] < best[n]:
            best[n] = e1[i]
    keep = np.array(keep, dtype=np.int64)
    return rows[keep[_lexsort([], rows[keep])]]


# ---------------------------------------------------------------------------
# results


@dataclass(eq=False)
class AdmissibleSet:
    """Feasible, non-dominated realisations of one family."""

    family: DesignFamily
    block: int
    rows: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    @property
    def name(self):
        if self.family is DesignFamily.BLOCK_SC:
            return f"block{self.block}"
        return self.family.value

    def realisation(self, i):
        return row_realisation(self.family, self.rows[i], self.block)

    def characteristics(self, i):
        row = self.rows[i]
        return OperatingCharacteristics(
            float(row[C["alpha"]]), float(row[C["power"]]), float(row[C["ess0"]]), float(row[C["ess1"]]), int(row[C["N"]])
        )

    @property
    def members(self):
        return [(self.realisation(i), self.characteristics(i)) for i in range(len(self))]


def row_realisation(family, row, block=1):
    def opt(name):
        v = int(row[C[name]])
        return None if v < 0 else v

    return DesignRealisation(
        family,
        int(row[C["r"]]),
        int(row[C["N"]]),
        opt("r1"),
        opt("n1"),
        opt("e1"),
        float(row[C["theta_f"]]),
        float(row[C["theta_e"]]),
        block,
    )


def select_index(rows, criterion):
    """Row index of the optimal design under ``criterion``; None if empty."""
    if len(rows) == 0:
        return None
    e0, e1, n = rows[:, C["ess0"]], rows[:, C["ess1"]], rows[:, C["N"]]
    primary = {"h0opt": [e0], "h1opt": [e1], "h0minimax": [n, e0], "h1minimax": [n, e1]}
    if criterion not in primary:
        raise ValueError(f"unknown criterion {criterion!r}")
    return int(_lexsort(primary[criterion], rows)[0])


def select_optimal(aset, criterion):
    """``(realisation, characteristics)`` of the optimal member, or None."""
    i = select_index(aset.rows, criterion)
    if i is None:
        return None
    return aset.realisation(i), aset.characteristics(i)


def loss(oc, q0, q1):
    """Weighted loss ``q0 E(N|p0) + q1 E(N|p1) + (1 - q0 - q1) N``."""
    if q0 < 0 or q1 < 0 or q0 + q1 > 1 + 1e-12:
        raise ValueError(f"weights must satisfy q0, q1 >= 0 and q0 + q1 <= 1, got ({q0}, {q1})")
    return q0 * oc.ess0 + q1 * oc.ess1 + (1.0 - q0 - q1) * oc.n_max


# ---------------------------------------------------------------------------
# driver


def _source_digest():
    h = hashlib.sha256(f"{__version__}:{SEARCH_REVISION}".encode())
    h.update((Path(__file__).parent / "_kernels.py").read_bytes())
    return h.hexdigest()[:16]


def default_workers():
    env = os.environ.get("CURTAIL_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    # largest tasks first keeps the pool busy; results are re-ordered afterwards
    order = sorted(range(len(tasks)), key=lambda i: -tasks[i].N)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        done = list(pool.map(_run_task, [tasks[i] for i in order], chunksize=1))
    out = [None] * len(tasks)
    for i, res in zip(order, done):
        out[i] = res
    return out


def _tasks(config, family, block, n_hi):
    out = []
    for N in range(config.n_min, n_hi + 1):
        if family is DesignFamily.BLOCK_SC and N % block:
            # a block design recruits whole blocks
            continue
        lo, hi = r_bounds(N, config.params, config.r_rule)
        lo = max(lo, 0)
        if family in (DesignFamily.MSTAGE, DesignFamily.BLOCK_SC, DesignFamily.SC):
            # one task per (N, r) so the pool balances well
            out.extend(_Task(family.value, block, N, r, r, config.params, config.theta_e_min) for r in range(lo, hi + 1))
        else:
            out.append(_Task(family.value, block, N, lo, hi, config.params, config.theta_e_min))
    return out


def feasible_front(config, family, block=1, n_hi=None, workers=1):
    """Feasible rows of ``family`` after per-``N`` Pareto reduction."""
    if n_hi is None:
        n_hi = config.max_n(family)
    if n_hi is None:
        n_hi = simon_cap(config, workers)
    parts = _run(_tasks(config, family, block, n_hi), workers)
    parts = [p for p in parts if len(p)]
    return np.concatenate(parts) if parts else _empty()


def simon_cap(config, workers=1):
    """Largest ``N`` searched for Simon-type designs."""
    rows = feasible_front(config, DesignFamily.SIMON, n_hi=config.simon_probe_max, workers=workers)
    i = select_index(rows, "h0opt")
    if i is None:
        return config.simon_probe_max
    return int(math.floor(config.simon_cap * rows[i, C["N"]] + 1e-9))


def _cache_path(cache_dir, config, family, block, n_hi):
    tag = f"{family.value}-b{block}-n{n_hi}-{config.digest()}-{_source_digest()}"
    return Path(cache_dir) / f"front-{tag}.npy"


def search_family(config, family, block=1, workers=1, cache_dir=None, n_hi=None):
    """Admissible set of ``family`` under ``config``.

    Feasibility is always judged on the curtailed design.  When
    ``cache_dir`` is given the feasible front is stored there, keyed by the
    configuration and the engine source.
    """
    if n_hi is None:
        n_hi = config.max_n(family)
    if n_hi is None:
        n_hi = simon_cap(config, workers)
    path = None
    if cache_dir is not None:
        path = _cache_path(cache_dir, config, family, block, n_hi)
        if path.exists():
            front = np.load(path)
            return AdmissibleSet(family, block, pareto_reduce(front, config.dominance), {"n_max": n_hi, "cached": True})
    front = feasible_front(config, family, block, n_hi, workers)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npy")
        np.save(tmp, front)
        os.replace(tmp, path)
    return AdmissibleSet(family, block, pareto_reduce(front, config.dominance), {"n_max": n_hi, "cached": False})


# ---------------------------------------------------------------------------
# loss grid


@dataclass(eq=False)
class OmniGrid:
    """Loss minima over a simplex grid of weights.

    ``best[k, g]`` is the smallest loss of family ``names[k]`` at grid point
    ``g`` and ``choice[k, g]`` the row achieving it.  ``winner[g]`` indexes
    ``names``.
    """

    q0: np.ndarray
    q1: np.ndarray
    names: list
    best: np.ndarray
    choice: np.ndarray
    winner: np.ndarray

    @property
    def entries(self):
        out = []
        for g in range(len(self.q0)):
            k = self.winner[g]
            out.append((float(self.q0[g]), float(self.q1[g]), self.names[k], int(self.choice[k, g]), float(self.best[k, g])))
        return out

    def difference(self, a, b):
        """Per-point ``best[a] - best[b]`` for two family names."""
        return self.best[self.names.index(a)] - self.best[self.names.index(b)]


def weight_grid(step):
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"grid step must divide 1, got {step}")
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    ok = i + j <= n
    return i[ok] / n, j[ok] / n


def omni_grid(sets, step=0.01):
    """Per-family and overall loss minimisers over the weight simplex.

    ``sets`` is an ordered mapping of name to AdmissibleSet.  Equal losses
    between families (e.g. all weight on ``N``) go to the design with the
    smaller ``E(N|p0) + E(N|p1)``, then to the earlier name.
    """
    names = [k for k, v in sets.items() if len(v)]
    if not names:
        raise ValueError("omni grid needs at least one nonempty admissible set")
    q0, q1 = weight_grid(step)
    best = np.empty((len(names), len(q0)))
    choice = np.empty((len(names), len(q0)), dtype=np.int64)
    ess_sum = np.empty((len(names), len(q0)))
    for k, name in enumerate(names):
        rows = sets[name].rows
        L = (
            q0[:, None] * rows[None, :, C["ess0"]]
            + q1[:, None] * rows[None, :, C["ess1"]]
            + (1.0 - q0 - q1)[:, None] * rows[None, :, C["N"]]
        )
        # rows are stored in tie-break order so argmin picks the preferred design
        choice[k] = np.argmin(L, axis=1)
        best[k] = L[np.arange(len(q0)), choice[k]]
        ess_sum[k] = rows[choice[k], C["ess0"]] + rows[choice[k], C["ess1"]]
    order = np.broadcast_to(np.arange(len(names))[:, None], best.shape)
    winner = np.lexsort((order, ess_sum, best), axis=0)[0]
    return OmniGrid(q0, q1, names, best, choice, winner)
