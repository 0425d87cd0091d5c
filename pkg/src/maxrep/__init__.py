"""Simulation and inference for max-stable fields through their incremental and
mixed moving maxima representations."""

__version__ = "0.1.0"

from .core import RngStream, frechet_cdf, inv_std_normal_cdf, ks_distance, std_normal_cdf
from .grid import Field, Grid, grid_integral
from .models import DiscreteShape, ShapeMixture, ShapeModel, TabulatedShapes, VariogramModel
from .simulate import (
    SimResult,
    simulate_brown_resnick,
    simulate_extremal_gaussian,
    simulate_incremental,
    simulate_logistic_vector,
    simulate_m3,
    simulate_m3_discrete,
    simulate_mda_sample,
)
from .extract import (
    ExtremeEventSet,
    ThresholdPolicy,
    argmax_lexicographic,
    choose_threshold,
    extract_increments,
    extract_shapes,
    extract_shapes_discrete,
)
from .estimators import (
    extremal_coefficient_from_shapes,
    fit_shape_beta,
    logistic_mle,
    mean_shape,
    unit_mean_diagnostic,
    variogram_from_shapes,
)
from .switch import (
    incremental_to_m3,
    increment_law_from_exponent_measure,
    m3_to_incremental_sample,
    m3_to_v_representation,
)
