"""Goodness-of-fit tests for max-stable random fields on square lattices."""

__version__ = "0.1.0"

from .fields import (
    MMA,
    BrownResnick,
    BrownResnickVariogram,
    LatticeField,
    simulate,
    simulate_brown_resnick,
    simulate_mma,
    theoretical_extremogram,
    known_unit_frechet,
    theoretical_spectral_density,
    to_unit_frechet,
)
from .extremal import (
    ExceedanceField,
    LagFunction,
    ThresholdPlan,
    empirical_extremogram,
    exceedances,
    extremal_periodogram,
    threshold_from_pool,
    truncated_extremogram,
)
from .integrated import FourierSurface, WeightFunction, integrated_surface
from .gof import GofConfig, TestReport, run_test, whittle_estimate
