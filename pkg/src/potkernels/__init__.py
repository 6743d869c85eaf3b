"""Structured Markov-chain potential kernels and their permanental limits.

Build and validate the kernel families (min, exponential, autoregressive,
killed walk, and their shifted/scaled/rank-one variants), classify excessive
functions, compute the analytic constants behind the limsup theorems, run
the symmetrization ledger, and drive seeded Monte Carlo experiments that
track the predicted normalizers and constants.
"""

from .argen import (
    CStarResult,
    PartialFractionTable,
    PhiSequence,
    RootSet,
    c_star,
    char_roots,
    partial_fractions,
    phi_closed,
    phi_recursive,
)
from .excessive import (
    DensitySequence,
    ExcessiveClassification,
    PotentialFunction,
    apply_potential,
    classify_excessive,
    recover_density,
    rho,
    riesz_decompose,
)
from .identities import IDENTITIES, IdentityError, describe
from .kernels import (
    AR1,
    AR1Shifted,
    ARk,
    ARkGen,
    DenseKernelWindow,
    ExpKernel,
    GeneratorMatrix,
    KernelSpec,
    KilledWalk,
    MinKernel,
    RankOneUpdate,
    ScaledMinKernel,
    ShiftedScaled,
    Window,
    build_generator,
    build_kernel,
    check_inverse_m_matrix,
    check_q_matrix,
    decay_envelope,
    decide_shift_admissible,
    killed_walk_potential,
    rank_one_update,
    verify_duality,
    window_inverse,
)
from .mcsim import (
    ExperimentConfig,
    GammaMarginalReport,
    SampleBatch,
    SubsequenceResult,
    TrendReport,
    analytic_median_band,
    calibration_band,
    gamma_marginal_test,
    kernel_diagonal,
    limsup_experiment,
    sample_gaussian,
    sample_permanental,
    sparse_subsequence,
)
from .normalizers import NoTheorem, Prediction, RegimeReport, koval, predict, regime
from .symmetrize import (
    SandwichWeights,
    SymmetrizationLedger,
    analyze,
    extend,
    sandwich_factor,
)

__version__ = "0.1.0"

__all__ = [
    "AR1",
    "AR1Shifted",
    "ARk",
    "ARkGen",
    "CStarResult",
    "DenseKernelWindow",
    "DensitySequence",
    "ExcessiveClassification",
    "ExpKernel",
    "ExperimentConfig",
    "GammaMarginalReport",
    "GeneratorMatrix",
    "IDENTITIES",
    "IdentityError",
    "KernelSpec",
    "KilledWalk",
    "MinKernel",
    "NoTheorem",
    "PartialFractionTable",
    "PhiSequence",
    "PotentialFunction",
    "Prediction",
    "RankOneUpdate",
    "RegimeReport",
    "RootSet",
    "SampleBatch",
    "SandwichWeights",
    "ScaledMinKernel",
    "ShiftedScaled",
    "SubsequenceResult",
    "SymmetrizationLedger",
    "TrendReport",
    "Window",
    "analyze",
    "analytic_median_band",
    "apply_potential",
    "build_generator",
    "build_kernel",
    "c_star",
    "calibration_band",
    "char_roots",
    "check_inverse_m_matrix",
    "check_q_matrix",
    "classify_excessive",
    "decay_envelope",
    "decide_shift_admissible",
    "describe",
    "extend",
    "gamma_marginal_test",
    "kernel_diagonal",
    "killed_walk_potential",
    "koval",
    "limsup_experiment",
    "partial_fractions",
    "phi_closed",
    "phi_recursive",
    "predict",
    "rank_one_update",
    "recover_density",
    "regime",
    "rho",
    "riesz_decompose",
    "sample_gaussian",
    "sample_permanental",
    "sandwich_factor",
    "sparse_subsequence",
    "verify_duality",
    "window_inverse",
]
