"""Tensor-train completion of tensors observed fiber-wise along the last mode.

The package computes the decomposition of a partially observed tensor using
only deterministic linear algebra, provided each last-mode fiber is either
fully observed or entirely missing, and validates the observation-pattern
conditions under which recovery is guaranteed.
"""

from .completion import (
    CompletionConfig,
    check_ranks,
    complete,
    parallel_tt_svd,
    reconstruct_fibers,
    tt_svd,
)
from .errors import (
    CompletionError,
    FormatError,
    IdentifiabilityError,
    InsufficientFibersError,
    MaskMismatchError,
    PatternValidationError,
    RankDeficientError,
)
from .harness import (
    ExperimentSpec,
    TrialResult,
    add_noise,
    median_errors,
    random_tt,
    relative_error,
    run_sweep,
)
from .io import read_dtns, write_dtns, write_trials_csv
from .linalg import (
    TruncatedSVD,
    lstsq,
    principal_angles,
    trailing_left_singvecs,
    truncated_svd,
)
from .patterns import (
    ConditionReport,
    FiberPattern,
    SliceObservation,
    full_pattern,
    mask_apply,
    random_pattern,
    slice_observations,
    validate_pattern,
)
from .subspace import (
    ObservedSubmatrix,
    SubspaceEstimate,
    combine_slice_pairs,
    constraint_basis,
    intersection_basis,
)
from .tensor import (
    TensorTrain,
    fold,
    reshape3,
    tt_entry,
    tt_left_matrix,
    tt_to_dense,
    unfold,
)

__version__ = "0.1.0"

__all__ = [
    "CompletionConfig",
    "CompletionError",
    "ConditionReport",
    "ExperimentSpec",
    "FiberPattern",
    "FormatError",
    "IdentifiabilityError",
    "InsufficientFibersError",
    "MaskMismatchError",
    "ObservedSubmatrix",
    "PatternValidationError",
    "RankDeficientError",
    "SliceObservation",
    "SubspaceEstimate",
    "TensorTrain",
    "TrialResult",
    "TruncatedSVD",
    "add_noise",
    "check_ranks",
    "combine_slice_pairs",
    "complete",
    "constraint_basis",
    "fold",
    "full_pattern",
    "intersection_basis",
    "lstsq",
    "mask_apply",
    "median_errors",
    "parallel_tt_svd",
    "principal_angles",
    "random_pattern",
    "random_tt",
    "read_dtns",
    "reconstruct_fibers",
    "relative_error",
    "reshape3",
    "run_sweep",
    "slice_observations",
    "trailing_left_singvecs",
    "truncated_svd",
    "tt_entry",
    "tt_left_matrix",
    "tt_svd",
    "tt_to_dense",
    "unfold",
    "validate_pattern",
    "write_dtns",
    "write_trials_csv",
]
