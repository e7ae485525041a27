"""Quasi-pure decomposition certificates for uniform mixtures of k copies of
the d x d maximally entangled basis states, with exact entanglement values
and an independent numeric verification oracle."""

from .modmath import GcdSplit, gcd, split_gcd, decompose_m, t_permutation, split_index, join_index, factorize
from .labels import (
    MesLabel,
    LabelWord,
    bxor_labels,
    script_b,
    dual_label,
    shift_m,
    shift_n,
    factor_label,
)
from .ensemble import (
    BranchEnsemble,
    FlagKind,
    FlagSubspace,
    LocalDiscriminationProtocol,
    MalformedEnsembleError,
    canonical_mixture,
    apply_to_ensemble,
    group_by_flag,
)
from .decompose import (
    BxorRound,
    DecompositionTree,
    DimensionSplit,
    DualBasis,
    ExactEntanglement,
    FlagMeasurement,
    Leaf,
    LocalShiftM,
    SeparableFactor,
    TagRecord,
    decompose,
    entanglement,
    entanglement_of_tree,
    is_separable_point,
)
from .oracle import (
    DenseOperator,
    ResourceLimitError,
    SparseState,
    VerificationReport,
    apply_bxor,
    apply_dual_basis,
    apply_local_permutation,
    apply_local_phase,
    build_mes,
    density_from_ensemble,
    flag_projector,
    mes_word_state,
    partial_transpose_min_eig,
    reduced_density,
    verify_decomposition,
)

__version__ = "0.1.0"
