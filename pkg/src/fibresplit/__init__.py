"""Velocity-dependent horizontal/vertical decompositions of fibred-space
tangent vectors: classification, induced and subduced structures, symmetry
reduction, and constrained dynamics.

The public surface re-exports the chart/point types, the splitting
calculus, Lagrangian machinery, reduction tools, and the config loader.
Everything is plain numpy; set FIBRESPLIT_DISABLE_NUMBA=1 to force the
pure-numpy jet kernels.
"""

from .bundle import (BundleChart, DerivedField, PullbackPoint,
                     SecondTangentPoint, TangentPointM, VectorFieldM,
                     VectorFieldN, canonical_flip, complete_lift,
                     lie_bracket, liouville_fields, mu, tangent_map,
                     vertical_endomorphism, vertical_lift)
from .config import ModelConfig, load_config
from .errors import (ArityError, BasePointMismatch, BranchAmbiguity,
                     DimensionMismatch, DomainError, ExprSyntaxError,
                     FibresplitError, FlowEscape, HypothesisFailed,
                     NoConvergence, NonFiniteState, NotAffine, NotPrincipal,
                     NotSubducible, NotWellDefined, ParseError,
                     SingularHessian, SingularMatrix, UnknownIdentifier)
from .exprs import (VarContext, compile_field, fold_constants, parse,
                    substitute, to_string)
from .jets import Jet2, ScalarField, TapeField, fd_check
from .lagrangian import (InducedSplitting, LagrangianSpec, SodeSpec,
                         euler_lagrange_sode, fibre_regularity,
                         homogeneity_of_induced, induced_splitting,
                         integrate_sode, liouville_derivative,
                         projection_verify, subduce,
                         symmetry_condition_check, tangency_check)
from .nonholonomic import (AffineConstraintSpec, ConstrainedState,
                           constrained_lagrangian, integrate_constrained,
                           lagrange_dalembert_system)
from .numerics import (IvpProblem, LinearSystem, NewtonProblem,
                       TrajectoryRecord, linear_solve, newton_solve,
                       rk4_integrate)
from .reduction import (ActionSpec, BaseSode, MagneticModel,
                        base_euler_lagrange, connection_test_domega,
                        decoupling_check, integrate_base, integrate_magnetic,
                        invariance_check, magnetic_induced_splitting,
                        magnetic_lp_system, momentum_map, omega,
                        principal_check, unreduce, vilms_of_sode,
                        vilms_principal_check, xi_field)
from .splitting import (AffineSplittingData, SplittingSpec,
                        affine_curvature_coefficients, affine_decompose,
                        classify, curvature_pointwise, curvature_rbar,
                        horizontal_lift_curve, horizontal_lift_field,
                        horizontal_map, lifted_field, project_horizontal,
                        project_vertical, vilms_complete_lift_check,
                        vilms_horizontal, vilms_lift,
                        vilms_vertical_projector)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
