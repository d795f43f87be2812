"""Pre-training, fine-tuning, metrics and the attention probe."""

from .loop import (
    MODES,
    History,
    TrainConfig,
    TrainingDiverged,
    effective_lambda,
    evaluate,
    evaluate_pretrain,
    finetune,
    normalize_mode,
    predict,
    pretrain,
    pretrain_losses,
)
from .masking import MaskSpec, mask_batch, mask_count, mask_sample
from .metrics import MetricsReport, binary_auroc, compute_metrics
from .optim import Adam
from .probe import ProbeReport, attention_maps, disentanglement_probe, patch_overlap

__all__ = [
    "Adam",
    "History",
    "MODES",
    "MaskSpec",
    "MetricsReport",
    "ProbeReport",
    "TrainConfig",
    "TrainingDiverged",
    "attention_maps",
    "binary_auroc",
    "compute_metrics",
    "disentanglement_probe",
    "effective_lambda",
    "evaluate",
    "evaluate_pretrain",
    "finetune",
    "mask_batch",
    "mask_count",
    "mask_sample",
    "normalize_mode",
    "patch_overlap",
    "predict",
    "pretrain",
    "pretrain_losses",
]
