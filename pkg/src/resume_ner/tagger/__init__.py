"""Trainable sequence tagger: features, Viterbi decoding, perceptron, seeds."""

from .features import extract_features, word_shape
from .perceptron import (
    Example,
    ModelFormatError,
    TaggerModel,
    TrainConfig,
    TrainingLog,
    UnsupportedModelVersion,
    load_model,
    make_example,
    predict,
    save_model,
    train,
)
from .seeds import DEFAULT_DATE_PATTERNS, default_gazetteers, seed_preannotate
from .viterbi import (
    BACKEND_ENV,
    HAS_NUMBA,
    TransitionMask,
    active_backend,
    decode_indices,
    viterbi_decode,
)

__all__ = [
    "BACKEND_ENV",
    "DEFAULT_DATE_PATTERNS",
    "Example",
    "HAS_NUMBA",
    "ModelFormatError",
    "TaggerModel",
    "TrainConfig",
    "TrainingLog",
    "TransitionMask",
    "UnsupportedModelVersion",
    "active_backend",
    "decode_indices",
    "default_gazetteers",
    "extract_features",
    "load_model",
    "make_example",
    "predict",
    "save_model",
    "seed_preannotate",
    "train",
    "viterbi_decode",
    "word_shape",
]
