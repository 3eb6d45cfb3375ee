"""Iterative geometric mean decomposition (IGMD) and a ZF-THP MIMO harness."""

__version__ = "0.1.0"

from .gmdref import exact_gmd
from .igmd import (
    OmegaKind,
    RotationPair,
    SweepTrace,
    geometric_mean_target,
    igmd,
    mse_diag,
    omega,
    rotation_pair,
    stage_update,
    sweep,
)
from .init import InitKind, init_decompose, interleave_permutation, vblast_order
from .matcore import (
    MatrixError,
    RankError,
    conj_transpose,
    matmul,
    qr_decompose,
    svd_2x2_upper,
    svd_full,
)
from .triple import DecompositionTriple

__all__ = [
    "DecompositionTriple",
    "InitKind",
    "MatrixError",
    "OmegaKind",
    "RankError",
    "RotationPair",
    "SweepTrace",
    "conj_transpose",
    "exact_gmd",
    "geometric_mean_target",
    "igmd",
    "init_decompose",
    "interleave_permutation",
    "matmul",
    "mse_diag",
    "omega",
    "qr_decompose",
    "rotation_pair",
    "stage_update",
    "svd_2x2_upper",
    "svd_full",
    "sweep",
    "vblast_order",
]
