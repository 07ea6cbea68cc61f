"""Critical points of regularized deep matrix factorization, built and classified."""

from .problem import NumericFailure, Problem, ProblemError, SpectralDecomposition
from .model import (
    end_to_end_product,
    grad_F,
    grad_G,
    gradient,
    hessian_quadform,
    loss,
    loss_F,
    loss_G,
    rescale_F_to_G,
    rescale_G_to_F,
)
from .scalar import (
    RootKind,
    RootLabel,
    lambda_critical,
    root_profile,
    scalar_argmin_g,
    thresholds,
)
from .critical import (
    CriticalSpec,
    Dressing,
    InvalidSpec,
    balancedness_residual,
    canonical_dressing,
    construct,
    enumerate_specs,
    global_specs,
    random_dressing,
    validate_spec,
)

__version__ = "0.1.0"
