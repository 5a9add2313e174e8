"""Few-shot handwritten text-line synthesis, evaluation and HTR boosting."""

from .alphabet import Alphabet, PaddedText, pad_text
from .config import TrainingConfig, desk_config
from .data import (
    CURRICULUM_CATEGORIES,
    Manifest,
    StyleSet,
    TextLineSample,
    assign_category,
    load_manifest,
    load_samples,
    ngram_crop,
)
from .imaging import normalize_image, periodic_pad
from .metrics import cer, frechet_from_features, vfid, wer
from .toydata import make_toy_dataset
from .training import SynthesisModel, Trainer, load_checkpoint, run_curriculum, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "PaddedText",
    "pad_text",
    "TrainingConfig",
    "desk_config",
    "CURRICULUM_CATEGORIES",
    "Manifest",
    "StyleSet",
    "TextLineSample",
    "assign_category",
    "load_manifest",
    "load_samples",
    "ngram_crop",
    "normalize_image",
    "periodic_pad",
    "cer",
    "wer",
    "vfid",
    "frechet_from_features",
    "make_toy_dataset",
    "SynthesisModel",
    "Trainer",
    "load_checkpoint",
    "run_curriculum",
    "save_checkpoint",
    "__version__",
]
