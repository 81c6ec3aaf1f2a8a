"""Design families, parameters and realisations.

A trial observes binary outcomes one participant at a time.  The state after
``m`` participants with ``s`` responses is the lattice point ``(s, m)``.  A
trial ends in a *go* decision when responses exceed ``r``.
"""

from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Optional


class DesignFamily(str, Enum):
    SINGLE_STAGE = "single"
    SIMON = "simon"
    SIMON_GO = "simongo"
    NSC = "nsc"
    SC = "sc"
    MSTAGE = "mstage"
    BLOCK_SC = "block"

    @property
    def two_stage(self):
        return self in (DesignFamily.SIMON, DesignFamily.SIMON_GO, DesignFamily.NSC, DesignFamily.SC)

    @property
    def stochastic(self):
        """Families whose stopping depends on CP thresholds."""
        return self in (DesignFamily.SC, DesignFamily.MSTAGE, DesignFamily.BLOCK_SC)

    @property
    def curtailed(self):
        """Families that may stop after any monitored participant."""
        return self in (DesignFamily.NSC, DesignFamily.SC, DesignFamily.MSTAGE, DesignFamily.BLOCK_SC)

    @property
    def label(self):
        return _LABELS[self]


_LABELS = {
    DesignFamily.SINGLE_STAGE: "Single stage",
    DesignFamily.SIMON: "Simon",
    DesignFamily.SIMON_GO: "Simon go",
    DesignFamily.NSC: "NSC",
    DesignFamily.SC: "SC",
    DesignFamily.MSTAGE: "m-stage",
    DesignFamily.BLOCK_SC: "Block",
}


def parse_family(text):
    """Parse a family name such as ``"sc"``, ``"m-stage"`` or ``"block4"``.

    Returns ``(family, block_size)``.
    """
    key = text.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
    aliases = {"mstage": "mstage", "simongo": "simongo", "simonwithgo": "simongo", "singlestage": "single"}
    key = aliases.get(key, key)
    if key.startswith("block"):
        rest = key[len("block"):]
        size = int(rest) if rest else 1
        if size < 1:
            raise ValueError(f"block size must be positive: {text!r}")
        return DesignFamily.BLOCK_SC, size
    try:
        return DesignFamily(key), 1
    except ValueError:
        raise ValueError(f"unknown design family: {text!r}") from None


class PointStatus(IntEnum):
    CONTINUE = 0
    STOP_GO = 1
    STOP_NOGO = 2


@dataclass(frozen=True)
class DesignParams:
    alpha: float
    beta: float
    p0: float
    p1: float

    def __post_init__(self):
        if not 0 < self.p0 < self.p1 < 1:
            raise ValueError(f"need 0 < p0 < p1 < 1, got p0={self.p0}, p1={self.p1}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")

    @property
    def power(self):
        return 1.0 - self.beta


@dataclass(frozen=True)
class LatticePoint:
    s: int
    m: int


@dataclass(frozen=True)
class DesignRealisation:
    """One concrete design.

    ``r1``/``n1`` describe the interim analysis of two-stage families and
    ``e1`` the interim go boundary of Simon-with-go.  Threshold-free
    families keep ``theta_f = 0`` and ``theta_e = 1``.
    """

    family: DesignFamily
    r: int
    N: int
    r1: Optional[int] = None
    n1: Optional[int] = None
    e1: Optional[int] = None
    theta_f: float = 0.0
    theta_e: float = 1.0
    block: int = 1

    def __post_init__(self):
        f = self.family
        if not isinstance(f, DesignFamily):
            object.__setattr__(self, "family", DesignFamily(f))
            f = self.family
        if self.N < 1 or not 0 <= self.r < self.N:
            raise ValueError(f"need 0 <= r < N, got r={self.r}, N={self.N}")
        if f.two_stage:
            if self.r1 is None or self.n1 is None:
                raise ValueError(f"{f.label} needs r1 and n1")
            if not 0 <= self.r1 < self.n1 < self.N or self.r1 > self.r:
                raise ValueError(
                    f"need 0 <= r1 < n1 < N and r1 <= r, got r1={self.r1}, n1={self.n1}, r={self.r}, N={self.N}"
                )
        elif self.r1 is not None or self.n1 is not None:
            raise ValueError(f"{f.label} takes no interim boundaries")
        if f is DesignFamily.SIMON_GO:
            if self.e1 is None or not self.r1 < self.e1 <= self.n1:
                raise ValueError(f"Simon go needs r1 < e1 <= n1, got e1={self.e1}")
        elif self.e1 is not None:
            raise ValueError("only Simon go takes e1")
        if not 0.0 <= self.theta_f < self.theta_e <= 1.0:
            raise ValueError(f"need 0 <= theta_F < theta_E <= 1, got ({self.theta_f}, {self.theta_e})")
        if not f.stochastic and (self.theta_f != 0.0 or self.theta_e != 1.0):
            raise ValueError(f"{f.label} does not use CP thresholds")
        if self.block < 1:
            raise ValueError("block size must be positive")
        if f is not DesignFamily.BLOCK_SC and self.block != 1:
            raise ValueError("only block designs take a block size")

    @property
    def n2(self):
        return None if self.n1 is None else self.N - self.n1

    def with_thresholds(self, theta_f, theta_e):
        return replace(self, theta_f=float(theta_f), theta_e=float(theta_e))

    def base(self):
        """The same boundaries with stochastic stopping switched off."""
        return replace(self, theta_f=0.0, theta_e=1.0)

    def key(self):
        """Tuple used for deterministic ordering and tie-breaking."""
        return (
            self.N,
            self.r,
            -1 if self.r1 is None else self.r1,
            -1 if self.n1 is None else self.n1,
            -1 if self.e1 is None else self.e1,
            self.theta_f,
            self.theta_e,
        )

    def describe(self):
        parts = [self.family.label if self.family is not DesignFamily.BLOCK_SC else f"Block({self.block})"]
        if self.n1 is not None:
            parts.append(f"r1={self.r1} n1={self.n1}")
        if self.e1 is not None:
            parts.append(f"e1={self.e1}")
        parts.append(f"r={self.r} N={self.N}")
        if self.family.stochastic:
            parts.append(f"thetaF={self.theta_f:.6g} thetaE={self.theta_e:.6g}")
        return " ".join(parts)


def base_status(design, point):
    """Non-stochastic stopping classification of ``point`` under ``design``.

    Thresholds are ignored; stochastic stopping is layered on by the CP
    engine.  Block designs only stop at block boundaries and at ``m = N``.
    """
    s, m = (point.s, point.m) if isinstance(point, LatticePoint) else point
    N, r = design.N, design.r
    if not 0 <= s <= m <= N:
        raise ValueError(f"point ({s}, {m}) outside lattice of N={N}")
    f = design.family
    if m == N:
        return PointStatus.STOP_GO if s > r else PointStatus.STOP_NOGO
    if f in (DesignFamily.SINGLE_STAGE, DesignFamily.SIMON, DesignFamily.SIMON_GO):
        if f is not DesignFamily.SINGLE_STAGE and m == design.n1:
            if s <= design.r1:
                return PointStatus.STOP_NOGO
            if f is DesignFamily.SIMON_GO and s > design.e1:
                return PointStatus.STOP_GO
        return PointStatus.CONTINUE
    if m == 0 or m % design.block != 0:
        return PointStatus.CONTINUE
    if s > r:
        return PointStatus.STOP_GO
    fails = m - s
    if fails > N - r - 1:
        return PointStatus.STOP_NOGO
    if f in (DesignFamily.NSC, DesignFamily.SC) and m <= design.n1 and fails > design.n1 - design.r1 - 1:
        return PointStatus.STOP_NOGO
    return PointStatus.CONTINUE
