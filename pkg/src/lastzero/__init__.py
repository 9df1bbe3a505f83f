"""Optimal L1 prediction of the last time a spectrally negative Levy
process sits at or below zero before an independent exponential horizon.

The package solves the equivalent optimal stopping problem numerically:
scale-function machinery (``scale``), the gain function and its zero-level
curve (``gain``), time-step expectation kernels (``kernels``), backward
induction for the stopping boundary (``boundary``), value-function
evaluation (``valuation``), and Monte Carlo validation of the prediction
loss (``simulator``).  The ``lastzero`` command line drives all of it from
a config file.
"""

from .boundary import BoundaryGrid, solve_boundary_brownian, solve_boundary_jump
from .errors import (ConfigError, DomainError, InvariantError, LastZeroError,
                     NumericError, UnsupportedModelError)
from .gain import G, GainContext, h, t_b
from .kernels import K_brownian, McKernelTable, simulate_increment
from .models import (Kind, LevyModel, laplace_exponent, phi_inverse,
                     psi_prime, psi_roots)
from .scale import F_theta, ScaleContext, W, Z
from .simulator import (SimConfig, SimReport, StoppingRule, boundary_rule,
                        constant_level_rule, constant_time_rule,
                        evaluate_rules, ks_against_inf_law, zero_rule)
from .valuation import (ValueGrid, default_x_grid, expected_g,
                        optimal_prediction_value, value_brownian, value_jump,
                        value_point)

__version__ = "0.1.0"

__all__ = [
    "BoundaryGrid", "ConfigError", "DomainError", "F_theta", "G",
    "GainContext", "InvariantError", "K_brownian", "Kind", "LastZeroError",
    "LevyModel", "McKernelTable", "NumericError", "ScaleContext",
    "SimConfig", "SimReport", "StoppingRule", "UnsupportedModelError",
    "ValueGrid", "W", "Z", "boundary_rule", "constant_level_rule",
    "constant_time_rule", "default_x_grid", "evaluate_rules", "expected_g",
    "h", "ks_against_inf_law", "laplace_exponent",
    "optimal_prediction_value", "phi_inverse", "psi_prime", "psi_roots",
    "simulate_increment", "solve_boundary_brownian", "solve_boundary_jump",
    "t_b", "value_brownian", "value_jump", "value_point", "zero_rule",
]
