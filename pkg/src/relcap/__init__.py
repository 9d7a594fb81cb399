"""relcap: does relational structure carry salary information that box scores miss?

The package builds a temporally masked knowledge graph over player-seasons,
learns node embeddings three ways (random-walk, translation-in-rotation,
message-passing), feeds them next to identical tabular features, and audits
where the graph rescues a stats-only model (and where it misleads it).
"""

__version__ = "0.1.0"

from .core import (
    DEFAULT_SPLIT,
    Dataset,
    FeatureSchema,
    PlayerSeasonRecord,
    SplitSpec,
    invert_target,
    make_target,
    shared_test_intersection,
    split_by_season,
)
from .datagen import LeagueConfig, generate_league
from .embed_gnn import GnnModel, infer_inductive, load_gnn, save_gnn, train_gnn
from .embed_static import (
    EmbeddingTable,
    load_embedding,
    node2vec_walks,
    save_embedding,
    train_node2vec,
    train_rotate,
)
from .evaluate import (
    ResidualPool,
    TriStateReport,
    cold_start_subset,
    compute_tau,
    delta_e,
    r2,
    rmse,
    tri_state,
    tri_state_report,
)
from .kg import (
    Edge,
    GraphView,
    KnowledgeGraph,
    VARIANTS,
    admissible,
    build_graph,
    export_graph,
    import_graph,
    season_view,
)
from .pipeline import (
    CONFIG_NAMES,
    REGRESSORS,
    SUITE_SEEDS,
    ModelConfig,
    PredictionSet,
    baseline_residual_pool,
    run_config,
    run_suite,
    train_embedding,
)
from .profiling import TraitProfile, cliffs_delta, mann_whitney_u, top_traits
from .regress import (
    fit_encoder_imputer,
    fit_gbt,
    fit_random_forest,
    fuse_features,
    load_model,
    save_model,
)

__all__ = [
    "CONFIG_NAMES",
    "DEFAULT_SPLIT",
    "Dataset",
    "Edge",
    "EmbeddingTable",
    "FeatureSchema",
    "GraphView",
    "KnowledgeGraph",
    "LeagueConfig",
    "ModelConfig",
    "PlayerSeasonRecord",
    "PredictionSet",
    "REGRESSORS",
    "ResidualPool",
    "SUITE_SEEDS",
    "SplitSpec",
    "TraitProfile",
    "TriStateReport",
    "VARIANTS",
    "admissible",
    "baseline_residual_pool",
    "build_graph",
    "cliffs_delta",
    "cold_start_subset",
    "compute_tau",
    "delta_e",
    "export_graph",
    "fit_encoder_imputer",
    "fit_gbt",
    "fit_random_forest",
    "fuse_features",
    "generate_league",
    "GnnModel",
    "import_graph",
    "infer_inductive",
    "invert_target",
    "load_embedding",
    "load_gnn",
    "load_model",
    "make_target",
    "mann_whitney_u",
    "node2vec_walks",
    "r2",
    "rmse",
    "run_config",
    "run_suite",
    "save_embedding",
    "save_gnn",
    "save_model",
    "season_view",
    "shared_test_intersection",
    "split_by_season",
    "top_traits",
    "train_embedding",
    "train_gnn",
    "train_node2vec",
    "train_rotate",
    "tri_state",
    "tri_state_report",
    "__version__",
]
