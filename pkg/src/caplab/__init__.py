"""caplab: weighted condenser capacities for divergence-form operators.

Radial (quadrature-exact) and grid (variational) capacity engines, scaling
sweeps with log-log slope fits, certification of explicit solution pairs of
the comparison inequality, and the regime decision map.
"""

from .classifier import (RegimeVerdict, classify_capacity, classify_model,
                         default_nu, exponents, model_capacity_sequences,
                         model_truth_table)
from .errors import (ArgumentError, CalibrationError, CaplabError, ConfigError,
                     DomainError, InsufficientDataError, InvalidFieldError,
                     ParameterRangeError, UnsupportedError,
                     UnsupportedExponentError)
from .grid import (DescentOptions, GridProblem, build_annulus_problem,
                   check_prop1, discrete_capacity, grid_problem_from_config,
                   refine_problem)
from .operators import (Condenser, GridSpec, WeightField, bilinear_form,
                        condenser_from_config, quadratic_form,
                        sphere_surface_area, weight_field_from_config,
                        weight_sup_norm)
from .radial import (CapacityResult, CapacitySequence, LiminfEstimate,
                     SlopeFit, capacity_scan, default_r_sweep, estimate_liminf,
                     fit_log_slope, frak_C, frak_c_scan,
                     frak_c_slope_closed_form, frak_c_slope_from_factors,
                     power_weight_capacity_slope, radial_capacity)
from .verifier import (ExamplePair, PowerTerm, TestFunction, calibrate_alpha,
                       certify, default_bump_battery, power_gap_constant,
                       residual_margin, sobolev_norm, strong_residual,
                       template_pair, weak_form_gap)

__version__ = "0.1.0"
