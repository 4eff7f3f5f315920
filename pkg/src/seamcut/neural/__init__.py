"""Point-cloud conditioned autoregressive seam model (desk scale)."""

from .checkpoint import CheckpointError, ConfigMismatchError, load_checkpoint, save_checkpoint
from .config import ADVISORY_RATIO, GenerationConfig, ModelConfig, TrainConfig
from .generate import GenerationResult, generate
from .model import NonFiniteError, SeamModel, ShapeEmbedding, legal_mask, level_lengths
from .synthetic import SyntheticShape, make_synthetic_dataset
from .train import Example, TrainingError, TrainResult, augment, make_example, teacher_forced_accuracy, train

__all__ = [
    "ADVISORY_RATIO", "CheckpointError", "ConfigMismatchError", "Example", "GenerationConfig",
    "GenerationResult", "ModelConfig", "NonFiniteError", "SeamModel", "ShapeEmbedding",
    "SyntheticShape", "TrainConfig", "TrainResult", "TrainingError", "augment", "generate",
    "legal_mask", "level_lengths", "load_checkpoint", "make_example", "make_synthetic_dataset",
    "save_checkpoint", "teacher_forced_accuracy", "train",
]
