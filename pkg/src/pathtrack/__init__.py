"""Multithreaded path tracking for polynomial homotopies in binary64 and double-double."""
from .corrector import NewtonConfig, NewtonOutcome, newton_correct, residual_norm
from .evaldiff import Evaluator, OldBaselineEvaluator, eval_monomial_with_partials, suffix_prefix_products
from .linsolve import SingularMatrixError, back_substitute, ge_partial_pivot, solve
from .metrics import cores_for_fixed_time, quality_up, quality_up_factor, speedup
from .polysys import (CONSTANT, ExponentVector, Homotopy, SupportedSystem, SystemSpec, generate_system,
                      newton_homotopy, random_point, read_system, with_constant_term, write_system)
from .predictor import PathHistory, predict_quadratic, predict_secant
from .scalar import ComplexScalar, DoubleDouble, PrecisionLevel
from .team import WorkerTeam
from .tracker import PathStats, PathTracker, TrackerConfig, TrackResult, step_size_control, track_path

__version__ = "0.1.0"
