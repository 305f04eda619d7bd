"""Tractable discrete two-layer generative models with LOD diagnostics.

The package provides exact dense probability tables over small product
spaces, four two-layer model families (single-latent, independent-latent,
conditionally-independent, and both), EM and exact-expectation wake-sleep
trainers, the latent-observed dissimilarity (LOD) score alongside mutual
information and log likelihood, higher-layer stacking, and the experiment
CLI that ties them together.
"""

from .space import StateSpace
from .pmf import Cpt, Pmf, condition, entropy, kl_divergence, marginalize
from .models import (
    GenerativeModel,
    ModelShape,
    construct_expanding,
    construct_shrinking,
    load_model,
    save_model,
)
from .measures import (
    EvalScores,
    LatentSurprise,
    evaluate_model,
    expected_latent_information,
    lod,
    loglik,
    mi_data,
    model_mi,
)
from .training import TrainConfig, TrainReport, em_fit, fit_model, random_init, wake_sleep_fit
from .stacking import (
    Bijection,
    StackedModel,
    connected_scores,
    encoder_scores,
    fit_higher,
    pushforward_latent,
    sl_to_binary,
)
from .stats import CorrelationResult, offset_removal, pearson
from .ingestion import (
    EmpiricalDataset,
    PatchSpec,
    default_patch_locations,
    load_idx_images,
    parse_idx_images,
    quantize_and_extract,
    synthetic_dataset,
)
from .experiments import ExperimentConfig, run_stacking, run_two_layer
from .estimators import CIModel, ICIModel, ILModel, SLModel

__version__ = "0.1.0"

__all__ = [
    "StateSpace",
    "Pmf",
    "Cpt",
    "kl_divergence",
    "entropy",
    "marginalize",
    "condition",
    "ModelShape",
    "GenerativeModel",
    "construct_expanding",
    "construct_shrinking",
    "save_model",
    "load_model",
    "LatentSurprise",
    "EvalScores",
    "expected_latent_information",
    "lod",
    "mi_data",
    "model_mi",
    "loglik",
    "evaluate_model",
    "TrainConfig",
    "TrainReport",
    "random_init",
    "em_fit",
    "wake_sleep_fit",
    "fit_model",
    "Bijection",
    "StackedModel",
    "pushforward_latent",
    "sl_to_binary",
    "fit_higher",
    "connected_scores",
    "encoder_scores",
    "CorrelationResult",
    "offset_removal",
    "pearson",
    "EmpiricalDataset",
    "PatchSpec",
    "default_patch_locations",
    "parse_idx_images",
    "load_idx_images",
    "quantize_and_extract",
    "synthetic_dataset",
    "ExperimentConfig",
    "run_two_layer",
    "run_stacking",
    "SLModel",
    "ILModel",
    "CIModel",
    "ICIModel",
    "__version__",
]
