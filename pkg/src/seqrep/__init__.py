"""Unsupervised activity representations from feature-vector sequences.

Pipeline: exact temporally-constrained sequence matching proposes frame
correspondences, a small normalized embedding network reconciles them via
triplet training, and a gated recurrent predictor models the temporal
transitions. A deterministic synthetic benchmark with latent ground truth
drives the evaluation suite.
"""

from .core import (
    ConfigError,
    Dataset,
    DegenerateInputError,
    DimensionError,
    FormatError,
    ResourceLimitError,
    RngState,
    Sequence,
    l2_normalize,
    squared_l2,
)
from .align import (
    Chunk,
    CostBreakdown,
    Matching,
    MatchPenalties,
    alignment_cost,
    chunk_target,
    default_penalties,
    match_pair,
    match_features,
    solve_bruteforce,
    solve_exact_dp,
)
from .embed import (
    EmbeddingModel,
    TrainConfig,
    TrainLog,
    Triplet,
    Whitener,
    augment,
    embed_batch,
    embed_forward,
    fit_whitener,
    init_embedding_model,
    sample_triplets,
    sequence_neighbors,
    train,
    triplet_grad,
    triplet_loss,
)
from .dynamics import (
    Context,
    PredictorConfig,
    RecurrentPredictor,
    init_predictor,
    interpolate_features,
    predict_next,
    rnn_forward,
    rnn_forward_batch,
    rnn_loss,
    synthesize,
    train_predictor,
)
from .synthdata import (
    GeneratorConfig,
    alignment_pair_config,
    generate_dataset,
    max_latent_step,
    reference_config,
    resample_pair,
)
from .evaluate import (
    EvalReport,
    agglomerative_representatives,
    alignment_accuracy,
    default_pose_epsilon,
    knn_prediction_curve,
    merge_chunk_assignments,
    nearest_neighbor_assignment,
    pca_project_2d,
    retrieval_auc,
    retrieval_auc_from_features,
    roc_auc,
    zero_shot_pose_error,
)
from .seqpack import (
    load_model,
    load_predictor,
    read_seqpack,
    save_model,
    save_predictor,
    write_seqpack,
)
from .config import (
    EvalConfig,
    PenaltyConfig,
    RunConfig,
    load_config,
    reference_run_config,
)

__version__ = "0.1.0"
