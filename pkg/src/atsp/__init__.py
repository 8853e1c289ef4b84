"""Feature-dimension reduction for symmetric softmax attention.

Given a wide matrix X (n rows, d columns, d >> n) whose Gram matrix has
small entries, the package selects and reweights a near-linear-in-n subset
of columns so that the row-normalized entrywise exponential of the Gram
matrix (the attention matrix) changes by at most a small multiple of that
entry radius. Two pipelines are provided: randomized leverage-score
sampling and a deterministic two-sided barrier selection. A verifier
measures every step of the error chain and certifies the concrete bounds.
"""

from .attention import AttentionErrorReport, AttentionPair, attention_matrix, verify_reduction
from .errors import (
    ContractViolationError,
    InternalInvariantError,
    ParseError,
    RadiusValidationError,
    SketchRankError,
)
from .estimators import DeterministicAttentionSparsifier, RandomizedAttentionSparsifier
from .leverage import (
    LeverageScores,
    SamplingPlan,
    approx_leverage,
    build_probabilities,
    chernoff_trials,
    exact_leverage,
    sample_gram,
)
from .linalg import (
    SymEig,
    entrywise_exp,
    gram,
    inf_norm,
    matmul,
    psd_sandwich_check,
    qr_decompose,
    sym_eig,
)
from .sketch import SketchMatrix, SketchSpec, apply_left, apply_right, make_sketch
from .sparsify import (
    BssState,
    InputMatrix,
    ReducedMatrix,
    bss_select,
    sparsify_deterministic,
    sparsify_randomized,
    whiten,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionErrorReport",
    "AttentionPair",
    "BssState",
    "ContractViolationError",
    "DeterministicAttentionSparsifier",
    "InputMatrix",
    "InternalInvariantError",
    "LeverageScores",
    "ParseError",
    "RadiusValidationError",
    "RandomizedAttentionSparsifier",
    "ReducedMatrix",
    "SamplingPlan",
    "SketchMatrix",
    "SketchRankError",
    "SketchSpec",
    "SymEig",
    "approx_leverage",
    "attention_matrix",
    "apply_left",
    "apply_right",
    "bss_select",
    "build_probabilities",
    "chernoff_trials",
    "entrywise_exp",
    "exact_leverage",
    "gram",
    "inf_norm",
    "make_sketch",
    "matmul",
    "psd_sandwich_check",
    "qr_decompose",
    "sample_gram",
    "sparsify_deterministic",
    "sparsify_randomized",
    "sym_eig",
    "verify_reduction",
    "whiten",
]
