"""Exact search for curtailed single-arm binary-outcome trial designs."""

__version__ = "0.1.0"

from .design import DesignFamily, DesignParams, DesignRealisation, LatticePoint, PointStatus, base_status
from .cp import CpMatrix, ThetaSet, cp_closed_form, cp_matrix, cp_matrix_nsc, cp_matrix_sc, theta_pairs, theta_set
from .exact import OperatingCharacteristics, TerminalDistribution, operating_characteristics, path_counts, replay, terminal_distribution
from .wald import WaldBoundaries, wald_boundaries, wald_ess
