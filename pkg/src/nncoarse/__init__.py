"""Two-level FAS solver for nonlinear diffusion-reaction problems in which
the Galerkin coarse operator can be replaced by locally trained networks."""

from .fas import (
    FasConfig,
    FasReport,
    PretrainedCoarse,
    TrainInsideCoarse,
    TrueCoarse,
    perturbed_initial_guess,
    tl_fas,
)
from .fem import COEFFICIENTS, EXACT_SOLUTIONS, FineOperator, triangle_quadrature
from .linsolve import GmresOutcome, gmres
from .mesh import (
    MeshHierarchy,
    StructuredGrid,
    Subdomain,
    TransferOperators,
    build_hierarchy,
    build_transfer,
    extend_local,
    restrict_local,
)
from .neural import Dataset, Mlp, TrainingConfig, forward, relative_errors, train
from .sampling import SampleSpec, SobolGenerator, sample_ball, sample_box, sobol_points
from .surrogate import (
    GlobalSurrogate,
    LocalSurrogate,
    RefineConfig,
    build_local_dataset,
    evaluate_global,
    evaluate_local,
    fit_local_surrogate,
    surrogate_error_study,
    train_all,
)

__version__ = "0.1.0"
