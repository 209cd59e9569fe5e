"""Marginal MAP inference by truncated Bethe and TRW free energies."""

from .beliefs import (
    Beliefs,
    ConcavityCertificate,
    FreeEnergyWeights,
    MixedMarginals,
    check_provably_concave,
    consistency_residual,
    eval_free_energy,
    mutual_info,
    node_entropy,
    weights_bethe_truncated,
    weights_sum_bethe,
    weights_trw_truncated,
)
from .exact import (
    ExactResult,
    StateSpaceExceeded,
    exact_marginals,
    log_partition_bruteforce,
    marginal_map_bruteforce,
    q_of_xb,
)
from .generators import gen_ab_tree, gen_hmm, gen_ising
from .mixed_mp import (
    SolveConfig,
    SolveReport,
    SolverError,
    Verdict,
    anneal_solve,
    certify_global,
    certify_local,
    check_reparam,
    decode,
    limit_map,
    mixed_mp_fixed_point,
    weighted_mp_fixed_point,
)
from .model import (
    EdgeClassification,
    ModelError,
    NodeType,
    PairwiseModel,
    classify_edges,
    is_ab_tree,
    load_model,
    save_model,
)
from .optimizers import (
    EmState,
    EntropyDecomposition,
    cccp_solve,
    default_decomposition,
    em_solve,
    trw_decomposition,
)
from .trees import (
    ABSubtree,
    EdgeAppearance,
    compute_rho,
    enumerate_type1,
    enumerate_type2,
    mix_collections,
    rho_bethe,
    rho_trw1,
    rho_trw2,
)

__version__ = "0.1.0"
