"""Graph contrastive node representation learning with centrality-adaptive augmentation.

Two stochastically corrupted views of an input graph (edges removed,
feature dimensions masked, both skewed toward low-centrality parts) are
pushed through a shared two-layer GCN encoder and a projector; the model
is trained to maximize a node-level InfoNCE-style agreement objective,
and the frozen embeddings are scored with an L2-regularized logistic
probe.
"""

from gca.graph import (
    DatasetError,
    Graph,
    NormAdjacency,
    Split,
    load_dataset,
    normalized_adjacency,
    random_split,
    save_dataset,
)
from gca.centrality import (
    ConvergenceError,
    EdgeWeights,
    NodeCentrality,
    degree_centrality,
    edge_centrality,
    eigenvector_centrality,
    pagerank_centrality,
)
from gca.augment import (
    AugmentationPlan,
    build_plan,
    edge_drop_probs,
    feature_mask_probs,
    feature_weights,
    sample_view,
)
from gca.encoder import ModelParams, encode, project, backward, load_checkpoint, save_checkpoint
from gca.objective import LossReport, contrastive_objective, infonce_estimate, triplet_surrogate
from gca.trainer import TrainConfig, glorot_init, adam_step, train, embed
from gca.probe import ProbeResult, fit_logistic, evaluate

__version__ = "0.1.0"
