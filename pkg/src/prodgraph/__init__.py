"""prodgraph: learning and factorizing Cartesian product graphs.

Estimates the two factor Laplacians of a Cartesian product graph from
multi-domain data under a smoothness model (optionally with prescribed
connected-component counts), factorizes a given Laplacian into a nearest
Kronecker sum, and supports spectral clustering and graph-regularized
missing-data imputation on the product graph.
"""

from .clustering import (
    ClusterLabels,
    EmbeddingPair,
    connected_components,
    kmeans,
    product_labels,
    smallest_eigpairs,
)
from .factorization import (
    TildeMatrix,
    assemble_kronfact,
    factorize,
    factorize_rank_constrained,
    project_to_laplacian,
    tilde_transform,
)
from .imputation import (
    ImputeConfig,
    ImputeResult,
    impute_fixed_graphs,
    impute_step,
    joint_impute_learn,
    knn_graph,
)
from .laplacian import (
    DuplicationMatrix,
    GraphLaplacian,
    LaplacianError,
    MultiDomainData,
    ValidationTol,
    duplication_matrix,
    from_dense,
    from_vech,
    kron_sum,
    laplacian_from_adjacency,
    smoothness,
    to_vech,
)
from .learning import (
    AlternationResult,
    CovariancePair,
    LearnConfig,
    LearnResult,
    RankLearnConfig,
    SolverFailure,
    assemble_pgl_factor,
    learn_product_graph,
    learn_rank_constrained,
    learn_single_graph,
    sample_covariances,
)
from .metrics import (
    EdgeSet,
    edges_of,
    f_score,
    imputation_error,
    iterate_error,
    nmi,
)
from .qp import (
    DiagQpProblem,
    KktResiduals,
    QpSolution,
    SolverConfig,
    kkt_residuals,
    solve_diag_qp,
)
from .synth import (
    CommunityGraphSpec,
    MaskedData,
    apply_mask,
    generate_smooth_signals,
    planted_labels,
    random_community_graph,
)

__version__ = "0.1.0"
