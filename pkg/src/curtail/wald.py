"""Wald's sequential probability ratio test as an efficiency benchmark.

After ``m`` participants the test stops for no-go once responses fall to
``S_NOGO(m)`` and for go once they reach ``S_GO(m)``.  Both boundaries are
affine in ``m`` with a common slope.  Natural logarithms throughout.
"""

import math
from dataclasses import dataclass

from .design import DesignParams


@dataclass(frozen=True)
class WaldBoundaries:
    params: DesignParams
    d: float
    intercept_nogo: float
    intercept_go: float
    slope: float

    def s_nogo(self, m):
        return self.intercept_nogo + self.slope * m

    def s_go(self, m):
        return self.intercept_go + self.slope * m


def _check(params):
    if params.p0 <= 0.0 or params.p1 >= 1.0:
        raise ValueError("Wald boundaries need 0 < p0 and p1 < 1")


def wald_boundaries(params):
    _check(params)
    a, b, p0, p1 = params.alpha, params.beta, params.p0, params.p1
    d = math.log(p1 / p0) - math.log((1 - p1) / (1 - p0))
    slope = math.log((1 - p0) / (1 - p1)) / d
    lo = math.log(b / (1 - a)) / d
    hi = math.log((1 - b) / a) / d
    return WaldBoundaries(params, d, lo, hi, slope)


def wald_ess(params):
    """Approximate expected sample sizes ``(E(N|p0), E(N|p1))``."""
    _check(params)
    a, b, p0, p1 = params.alpha, params.beta, params.p0, params.p1
    la = math.log(b / (1 - a))
    lb = math.log((1 - b) / a)
    z1 = math.log(p1 / p0)
    z0 = math.log((1 - p1) / (1 - p0))
    ess0 = ((1 - a) * la + a * lb) / (p0 * z1 + (1 - p0) * z0)
    ess1 = (b * la + (1 - b) * lb) / (p1 * z1 + (1 - p1) * z0)
    return ess0, ess1
