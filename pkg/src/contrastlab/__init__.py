"""contrastlab: contrastive-loss laboratory.

Loss kernels (fixed-temperature, learnable-temperature, temperature-free)
with exact analytical gradients, closed-form gradient-scale analysis of
the reduced one-variable scenario, a finite-difference oracle, and a
desk-scale contrastive training + kNN evaluation harness.
"""

from .data import AugmentationConfig, Dataset, generate_clusters, load_features_csv, make_views
from .errors import ContrastLabError
from .evaluation import knn_top1, split_dataset
from .gradcheck import GradCheckReport, central_difference, check_loss_gradients
from .losses import (
    LossResult,
    TemperatureParam,
    backprop_to_embeddings,
    evaluate_loss,
    learnable_temp_loss,
    ntxent_loss,
    tf_infonce_loss,
)
from .numerics import (
    DEFAULT_CLAMP_EPS,
    clamp_for_logit,
    cosine_similarity_matrix,
    l2_normalize,
    log_sum_exp,
    logit_map,
    logit_map_derivative,
    sigmoid,
    softmax,
)
from .scenario import (
    CurveData,
    ScenarioPoint,
    figure_curves,
    find_vanishing_region,
    sample_curve,
    scenario_grad_scale,
    scenario_loss,
)
from .trainer import (
    EncoderConfig,
    RunReport,
    TrainConfig,
    cosine_lr,
    embed_dataset,
    init_weights,
    mlp_backward,
    mlp_forward,
    sgd_step,
    train_contrastive,
)

__version__ = "0.1.0"
