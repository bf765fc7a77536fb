"""Discrete nonlocal diffusion operators with state-dependent dispersal radius:
operator assembly, principal eigenpairs, and sup/inf ratio checks."""

from .errors import (ConfigError, ConvergenceError, NLHarnackError, NoChainError, NotSupermedianError,
                     PreconditionError, ResolutionError)
from .kernel import KernelProfile, unit_ball_volume
from .grid import DomainGrid, ScenarioFields, sample_field
from .operator import (DiscreteOperator, EllipticMoments, ValidationReport, apply_L, assemble_operator,
                       elliptic_moments, exit_rate, validate_hypotheses)
from .geometry import (BallChain, ChainConstants, CompactSet, ConeSpec, CoverReport, ball_cover,
                       chain_constant, chain_of_balls, contraction_constant, dilate, erode,
                       inner_cone_check, level_set)
from .eigen import (EigenPair, ExhaustionSchedule, MollifierSchedule, ReducibilityWarning,
                    UnboundedScenario, dense_eigenpair, mollify, power_iterate, solve_bounded,
                    solve_exhaustion)
from .harnack import (HarnackReport, LemmaCheckReport, ball_comparability_check, boundary_harnack,
                      dirac_counterexample, harnack_ratio, l1_contraction_check, local_domination_check,
                      pointwise_lower_check, supermedian_ratio)
from .scenario import Scenario, build_scenario, load_config

__version__ = "0.1.0"
