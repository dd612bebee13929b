"""Width-independent packing solvers and robust sub-Gaussian PCA.

The package has three layers: entropic mirror-descent solvers for packing
feasibility over the simplex (vector p-norms, Schatten p-norms, and a boxed
mixed-norm variant), robust covariance estimation built on those solvers,
and a data/CLI harness for reproducible experiments. Hot loops run under
numba when available; set SCHATPACK_BACKEND=numpy to force the pure numpy
fallback (see schatpack.BACKEND for the active choice).
"""

from ._backend import BACKEND
from .boxed import (
    BoxedConfig,
    BoxedOptimizeResult,
    boxed_schatten_decide,
    boxed_schatten_optimize,
    check_boxed_certificate,
    check_boxed_point,
    mixed_gradient,
    mixed_potential,
)
from .datagen import (
    AdversaryStrategy,
    CorruptedDataset,
    DistributionSpec,
    corrupt,
    make_corrupted_dataset,
    make_spiked_covariance,
    pair_difference,
    sample_dataset,
)
from .errors import (
    ConvergenceFailureError,
    DegenerateInputError,
    InfeasibleAfterPreprocessingError,
    InvalidInputError,
    SchatpackError,
    UnsupportedOrderError,
)
from .linalg import (
    schatten_norm,
    schatten_dual_witness,
    simultaneous_power_iteration,
    spectral_decomposition,
    weighted_gram_apply,
)
from .outcomes import CertificateReport, SolveOutcome, in_box, in_simplex
from .packing_lp import (
    check_lp_certificate,
    lp_objective,
    lp_potential,
    packing_lp_solve,
    pnorm_packing_solve,
    preprocess_entry_bound,
)
from .packing_sdp import (
    MatrixInstance,
    check_sdp_certificate,
    preprocess_spectral_bound,
    schatten_objective,
    schatten_packing_solve,
    sdp_potential,
    validate_psd_instance,
)
from .robust import (
    CandidateSet,
    PcaFilterResult,
    RobustPcaConfig,
    RobustPcaResult,
    downweight,
    one_d_robust_variance,
    pca_filter,
    prune_heavy_tails,
    robust_pca_fast,
    weighted_covariance,
)
from .sketch import JlSketch, jl_inner_products, jl_trace_estimate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "SchatpackError",
    "InvalidInputError",
    "DegenerateInputError",
    "UnsupportedOrderError",
    "InfeasibleAfterPreprocessingError",
    "ConvergenceFailureError",
    "SolveOutcome",
    "CertificateReport",
    "in_simplex",
    "in_box",
    "schatten_norm",
    "schatten_dual_witness",
    "spectral_decomposition",
    "weighted_gram_apply",
    "simultaneous_power_iteration",
    "JlSketch",
    "jl_trace_estimate",
    "jl_inner_products",
    "packing_lp_solve",
    "pnorm_packing_solve",
    "preprocess_entry_bound",
    "lp_objective",
    "lp_potential",
    "check_lp_certificate",
    "MatrixInstance",
    "schatten_packing_solve",
    "preprocess_spectral_bound",
    "schatten_objective",
    "sdp_potential",
    "validate_psd_instance",
    "check_sdp_certificate",
    "BoxedConfig",
    "BoxedOptimizeResult",
    "boxed_schatten_decide",
    "boxed_schatten_optimize",
    "mixed_potential",
    "mixed_gradient",
    "check_boxed_point",
    "check_boxed_certificate",
    "one_d_robust_variance",
    "downweight",
    "weighted_covariance",
    "prune_heavy_tails",
    "pca_filter",
    "PcaFilterResult",
    "RobustPcaConfig",
    "RobustPcaResult",
    "CandidateSet",
    "robust_pca_fast",
    "DistributionSpec",
    "AdversaryStrategy",
    "CorruptedDataset",
    "make_spiked_covariance",
    "sample_dataset",
    "corrupt",
    "make_corrupted_dataset",
    "pair_difference",
]
