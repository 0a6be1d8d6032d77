"""Bit-packed Boolean tensor clustering with rank-1 centroids."""

from .bintensor import (
    BinaryMatrix,
    BinaryTensor3,
    FactorTriple,
    TuckerModel,
    as_weight,
    bcp_reconstruct,
    boolean_matrix_product,
    fold,
    from_triples,
    integer_matrix_product,
    khatri_rao,
    kronecker,
    kronecker_matrix,
    reshape_col_major,
    similarity,
    tucker_reconstruct,
    unfold,
    vec_col_major,
    weighted_cost,
    weighted_similarity,
)
from .mdl import MdlRecord, MdlReport, baseline_length, description_length, select_k
from .metrics import (
    cohens_kappa,
    contingency,
    hungarian,
    match_labels,
    nmi_joint,
    reconstruction_error,
    relative_similarity,
)
from .rank1 import (
    Rank1Pair,
    pair_similarity,
    rank1_approx,
    rank1_brute,
    rank1_ptas,
    solve_a_given_b,
    solve_b_given_a,
)
from .saboteur import (
    ClusterModel,
    UnrestrictedModel,
    as_unrestricted,
    assign_clusters,
    iterative_updates,
    majority_updates,
    predict,
    rescore,
    saboteur,
    split_slices,
    unrestricted_btc,
)
from .synthgen import SynthConfig, SynthInstance, apply_noise, gen_instance
from .tnsio import FormatError, parse_tns, preprocess, read_labels, read_model, write_labels, write_model, write_tns

__version__ = "0.1.0"
