"""Graph convolutional embeddings for multi-dimensional (multi-relation) graphs."""

from .estimator import MultiDimGCN
from .evaluation import (
    EvalReport,
    auc_score,
    f1_scores,
    hadamard_features,
    link_prediction_eval,
    logreg_predict,
    logreg_scores,
    node_classification_eval,
    train_logreg,
)
from .graph import (
    LinkSplit,
    MultiDimGraph,
    aggregate_dimensions,
    generate_synthetic,
    load_edge_file,
    load_edge_lists,
    load_labels,
    normalize_adjacency,
    sample_neighbors,
    save_edge_file,
    save_edge_lists,
    save_labels,
    split_links,
)
from .model import (
    LayerParams,
    ModelParams,
    across_dim_aggregate,
    attention_weights,
    blend,
    combine_dimensions,
    dimension_representation,
    forward,
    init_params,
    link_probability,
    project_to_dimensions,
    within_dim_aggregate,
    within_dim_aggregate_sampled,
)
from .seeding import derive_seed, ensure_generator, named_stream
from .serialize import load_checkpoint, load_embedding, save_checkpoint, save_embedding
from .training import (
    AdamState,
    MiniBatch,
    TrainConfig,
    Triplet,
    adam_step,
    batch_forward,
    build_minibatch,
    compute_gradients,
    compute_loss,
    finite_difference_gradients,
    sample_negatives,
    train,
)

__version__ = "0.1.0"
