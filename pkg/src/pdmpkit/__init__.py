"""Simulation and verification toolkit for piecewise deterministic
Markov processes: flows, hazards with point atoms, jump kernels,
exponential change-of-measure machinery, and Monte Carlo cross-checks.
"""
from .errors import (
    AllExploded, BadParameters, BadStochasticMatrix, CemeteryInput,
    DegenerateJump, DomainViolation, EnvelopeViolation, HorizonExceeded,
    InversionFailure, MissingEnvelope, MissingOracle, PdmpError,
    QuadratureFailure, StiffnessFailure, UnsupportedState, ZeroQh,
)
from .flow import (
    CEMETERY, Flow, PathFunctional, State, af_eval, af_linear, boundary_state,
    flow_eval, integrate_along_flow, interior, merge_atoms,
)
from .generator import (
    DomainReport, TestFunction, carre_du_champ, check_domain,
    constant_function, dynkin_process, exp_function, generator_apply,
    generator_continuous, jump_variation, label_function,
    linear_combination, product_function, reciprocal_function,
)
from .harness import (
    EXPERIMENTS, Estimate, ExperimentReport, dumps_report, estimate,
    experiment_dynkin_check, experiment_generator_forms,
    experiment_is_consistency, experiment_martingale_check,
    experiment_reverse_check, experiment_simulate, write_report,
)
from .hazard import (
    DENSITY_1D, DISCRETE, MOMENT_ORACLE, HazardLaw, JumpKernel,
    cumulative_hazard, kernel_integrate, kernel_sample, sample_jump_time,
    survival, terminal_forced,
)
from .models import (
    REGISTRY, ModelBundle, cl_drift_exponent, ctmc_feynman_kac_oracle,
    doob_transform_matrix, get_bundle, make_aimd, make_boundary_reset,
    make_cramer_lundberg, make_ctmc, make_step_chain, step_chain_oracle,
)
from .rng import AUXILIARY, DESTINATION, HOLDING, UniformStream, replication_streams
from .simulate import (
    COMPLETED, EXPLODED, Event, PdmpModel, Skeleton, eval_L, path_state,
    path_state_pre, segments, simulate_skeleton,
)
from .tilting import (
    GoodFunctionReport, check_good_function, exp_martingale, hunt_martingale,
    ito_martingale, reverse_martingale, step_martingale, tilt_model,
    tilted_generator,
)

__version__ = "0.1.0"
