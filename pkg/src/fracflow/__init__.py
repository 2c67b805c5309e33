"""Time-fractional gradient flows on non-uniform partitions.

Deconvolution discretisation of the Caputo derivative, an implicit
minimizing-movements stepper, a posteriori estimators and adaptive steps.
"""

from .adaptive import AdaptiveConfig, StepRecord, adaptive_solve
from .caputo import (
    CaputoKernel,
    assemble_kernel,
    basis_eval,
    basis_matrix,
    caputo_kernel,
    check_kernel_properties,
    discrete_caputo,
    interpolant_eval,
    invert_kernel,
    reconstruct,
)
from .energy import (
    Circle,
    Custom,
    Energy,
    Entropy,
    Perturbation,
    PowerP,
    ProxConfig,
    Quadratic,
    QuadraticForm,
    perturbation_avg,
    phi_value,
    prox,
    prox_solve,
    rho,
    sigma,
)
from .errors import *  # noqa: F401,F403
from .estimate import (
    EstimatorTrace,
    aposteriori_bound,
    error_vs_reference,
    estimator_D,
    estimator_pointwise,
    estimator_tilde,
)
from .flow import FlowProblem, FlowResult, PiecewiseConstant, average_forcing, interpolate_result, solve_flow
from .partition import (
    Partition,
    geometric_partition,
    insert_node,
    locate,
    make_partition,
    random_partition,
    uniform_partition,
)
from .quadform_bench import QuadFormProblem, eigen_reference, run_quadform_rate
from .special import frac_integral_pc, gamma_fn, lp_alpha_norm, lp_norm_pc, mittag_leffler

__version__ = "0.1.0"
