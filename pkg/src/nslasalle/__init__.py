"""Filippov solutions of discontinuous ODEs and numerical checks of nonsmooth
LaSalle-Yoshizawa hypotheses and conclusions."""

from .certify import (Certificate, DegenerateLevelError, DomainSpec, HypothesisResult,
                      check_corollary1, check_corollary2, compute_c, containment_check,
                      initial_set_membership, sphere_minimum)
from .convex import ConvexSet, Interval
from .expr import EvaluationError, ParseError, differentiate, evaluate, gradient, parse
from .field import (OnDiscontinuityError, PiecewiseField, SwitchingSurface, evaluate_field,
                    filippov_map, region_of, validate_field)
from .lyapunov import (ComparisonTriple, PiecewiseScalar, check_bounds, check_regularity,
                       clarke_gradient, directional_derivative,
                       generalized_directional_derivative, setvalued_derivative)
from .scenario import Scenario, ScenarioError, load_scenario, loads
from .simulate import (IntegratorConfig, IntegratorError, MultiSurfaceContactError,
                       ProvenanceError, Trajectory, barbalat_report, inclusion_check, integrate)

__version__ = "0.1.0"
