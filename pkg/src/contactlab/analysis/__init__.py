"""Estimators and exact checks built on top of simulated trajectories."""

from .domination import (DominationReport, allzero_curve, conditional_criterion,
                         conditional_covariance, dfkg_test)
from .mixing import MixingCurve, cone_count, cone_mixing_curve, cone_sums
from .obstruction import alpha_max, obstruction_table
from .oracle import ExactDistribution, ctmc_oracle, uniformized_oracle
from .renewal import RenewalRecord, renewal_extract, renewal_from_depths
from .surface import FSurface, f_surface
from .tails import TailFit, tail_fit

__all__ = [
    "DominationReport", "allzero_curve", "conditional_criterion", "conditional_covariance",
    "dfkg_test", "MixingCurve", "cone_count", "cone_mixing_curve", "cone_sums", "alpha_max",
    "obstruction_table", "ExactDistribution", "ctmc_oracle", "uniformized_oracle",
    "RenewalRecord", "renewal_extract", "renewal_from_depths", "FSurface", "f_surface",
    "TailFit", "tail_fit",
]
