"""Point estimators of the response rate at the end of a trial.

Every path into a terminal point ``(s, m)`` has probability
``p**s * (1 - p)**(m - s)``, so terminal probabilities are path counts times
that weight.  All expectations below are exact sums over terminal points.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .cp import cp_matrix
from .exact import path_counts

log = logging.getLogger(__name__)

DEFAULT_GRID = np.linspace(0.0, 1.0, 101)


class EstimatorKind(str, Enum):
    NAIVE = "naive"
    BIAS_SUBTRACTED = "bias_subtracted"
    BIAS_ADJUSTED = "bias_adjusted"
    MUE = "mue"
    UMVUE = "umvue"

    @property
    def label(self):
        return {
            "naive": "Naive",
            "bias_subtracted": "Bias subt.",
            "bias_adjusted": "Bias adj.",
            "mue": "MUE",
            "umvue": "UMVUE",
        }[self.value]


@dataclass(frozen=True, eq=False)
class Terminals:
    """Reachable terminal points with exact path counts.

    ``total`` and ``via_first`` are floats for arithmetic; ``ratio`` keeps the
    exact ``via_first / total`` as fractions for tie detection.
    """

    design: object
    s: np.ndarray
    m: np.ndarray
    total: np.ndarray
    via_first: np.ndarray
    ratio: tuple

    def probs(self, p):
        """Terminal probabilities; ``p`` may be a scalar or 1-d array (rows follow ``p``)."""
        p = np.asarray(p, dtype=float)
        pp = p[..., None]
        return self.total * np.power(pp, self.s) * np.power(1.0 - pp, self.m - self.s)

    def expect(self, est, p):
        return self.probs(p) @ est


def terminals(design, p1):
    cpm = cp_matrix(design, p1)
    pc = path_counts(cpm)
    keys = sorted(pc.total, key=lambda k: (k[1], k[0]))
    s = np.array([k[0] for k in keys], dtype=float)
    m = np.array([k[1] for k in keys], dtype=float)
    total = np.array([float(pc.total[k]) for k in keys])
    via = np.array([float(pc.via_first_response[k]) for k in keys])
    ratio = tuple(Fraction(pc.via_first_response[k], pc.total[k]) for k in keys)
    return Terminals(design, s, m, total, via, ratio)


def naive(t):
    return t.s / t.m


def naive_bias(t, p):
    """Bias of the naive estimator at rate(s) ``p``."""
    p = np.asarray(p, dtype=float)
    return t.expect(naive(t), p) - p


def bias_subtracted(t):
    """Naive estimate minus the naive bias evaluated at the naive estimate."""
    x = naive(t)
    est = x - naive_bias(t, x)
    clipped = (est < 0.0) | (est > 1.0)
    if clipped.any():
        log.debug("bias-subtracted estimate clipped at %d terminals", int(clipped.sum()))
    return np.clip(est, 0.0, 1.0)


def _solve(g, increasing):
    """Root of ``g`` on [0, 1]; returns ``(root, fallback)``.

    Without a sign change the endpoint the function points towards is returned.
    """
    a, b = g(0.0), g(1.0)
    if a == 0.0:
        return 0.0, False
    if b == 0.0:
        return 1.0, False
    if a * b > 0.0:
        if increasing:
            return (0.0 if a > 0.0 else 1.0), True
        return (1.0 if a > 0.0 else 0.0), True
    return brentq(g, 0.0, 1.0, xtol=1e-12, maxiter=200), False


def bias_adjusted(t, return_flags=False):
    """Solve ``q + Bias(naive | q) = naive estimate`` for ``q`` at each terminal.

    Where no sign change exists on [0, 1] the minimiser of the residual on a
    1e-4 grid is used and the terminal is flagged.
    """
    x = naive(t)
    est = np.empty_like(x)
    flags = np.zeros(len(x), dtype=bool)
    fine = np.linspace(0.0, 1.0, 10001)
    for i, xi in enumerate(x):
        if xi <= 0.0 or xi >= 1.0:
            est[i] = xi
            continue

        def g(q):
            return q + naive_bias(t, q) - xi

        a, b = g(0.0), g(1.0)
        if a * b > 0.0:
            resid = np.abs(fine + naive_bias(t, fine) - xi)
            est[i] = fine[np.argmin(resid)]
            flags[i] = True
        else:
            est[i], _ = _solve(g, True)
    if flags.any():
        log.debug("bias-adjusted estimate fell back to grid search at %d terminals", int(flags.sum()))
    return (est, flags) if return_flags else est


def umvue(t):
    """Rao-Blackwellised first observation: share of paths whose first outcome is a response."""
    return t.via_first / t.total


def mue(t, return_flags=False):
    """Median-unbiased estimate from the UMVUE ordering of terminal points.

    The p-value of terminal ``i`` at rate ``p`` is the probability of a larger
    UMVUE plus half the probability of an equal one (``i`` included); the
    estimate is the ``p`` at which it equals 0.5.
    """
    order = sorted(range(len(t.ratio)), key=lambda i: t.ratio[i])
    # group index per terminal, ties share a group
    group = np.empty(len(order), dtype=np.int64)
    g = -1
    prev = None
    for i in order:
        if prev is None or t.ratio[i] != prev:
            g += 1
            prev = t.ratio[i]
        group[i] = g
    ngroups = g + 1
    est = np.empty(len(order))
    flags = np.zeros(len(order), dtype=bool)
    cache = {}
    for k in range(ngroups):

        def pval(p, k=k):
            q = np.bincount(group, weights=t.probs(p), minlength=ngroups)
            return q[k + 1 :].sum() + 0.5 * q[k] - 0.5

        cache[k] = _solve(pval, True)
    for i in range(len(order)):
        est[i], flags[i] = cache[group[i]]
    return (est, flags) if return_flags else est


@dataclass(eq=False)
class EstimateTable:
    terminals: Terminals
    estimates: dict
    flags: dict = field(default_factory=dict)

    def __getitem__(self, kind):
        return self.estimates[EstimatorKind(kind)]


def estimate_table(design, p1):
    t = terminals(design, p1)
    adj, adj_flags = bias_adjusted(t, return_flags=True)
    mu, mu_flags = mue(t, return_flags=True)
    est = {
        EstimatorKind.BIAS_ADJUSTED: adj,
        EstimatorKind.BIAS_SUBTRACTED: bias_subtracted(t),
        EstimatorKind.NAIVE: naive(t),
        EstimatorKind.MUE: mu,
        EstimatorKind.UMVUE: umvue(t),
    }
    return EstimateTable(t, est, {EstimatorKind.BIAS_ADJUSTED: adj_flags, EstimatorKind.MUE: mu_flags})


def expected_estimate(table, kind, p):
    return table.terminals.expect(table[kind], p)


@dataclass(eq=False)
class AccuracyCurves:
    grid: np.ndarray
    bias: dict
    var: dict
    rmse: dict

    @property
    def max_abs_bias(self):
        return {k: float(np.max(np.abs(v))) for k, v in self.bias.items()}

    @property
    def max_rmse(self):
        return {k: float(np.max(v)) for k, v in self.rmse.items()}


def accuracy_curves(table, grid=DEFAULT_GRID):
    grid = np.asarray(grid, dtype=float)
    P = table.terminals.probs(grid)
    bias, var, rmse = {}, {}, {}
    for kind, est in table.estimates.items():
        e1 = P @ est
        e2 = P @ (est * est)
        b = e1 - grid
        v = np.maximum(e2 - e1 * e1, 0.0)
        bias[kind] = b
        var[kind] = v
        rmse[kind] = np.sqrt(b * b + v)
    return AccuracyCurves(grid, bias, var, rmse)
