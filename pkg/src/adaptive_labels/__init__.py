"""Learning with adaptive labels: centroid label vectors trained jointly with an encoder."""
from .kernels import BACKEND
from .tensor import Tensor, backward, grad_check
from .encoder import EncoderConfig, init_encoder, forward, l2_penalty
from .lwal import (
    LabelTable,
    TrainConfig,
    TrainerState,
    compute_centroids,
    init_label_table,
    lwal_loss,
    lwal_probabilities,
    predict,
    repel_loss,
    std_train_step,
    train_step,
)
from .analysis import (
    HierarchyTree,
    average_linkage,
    correlation_score,
    export_newick,
    kendall_tau_b,
    label_distances,
    tree_distances,
)
from .data import Dataset, SynthSpec, gen_synthetic, load_csv, load_idx, split, batches
from .harness import RunConfig, auac, time_reduction

__version__ = "0.1.0"
