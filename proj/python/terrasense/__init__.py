"""Self-supervised terrain segmentation from audio: Python bindings."""

from ._terrasense import (
    ConfigError,
    InputError,
    StageError,
    canonical_config,
    clustering_accuracy,
    config_hash,
    experiment,
    generate,
    hungarian,
    kmeans,
    nmi,
    plan,
    run,
    run_stage,
    stft,
    triplet_correctness,
    write_bundle,
)

STAGES = (
    "spectrogram",
    "features",
    "triplets",
    "train-encoder",
    "cluster",
    "label",
    "train-seg",
    "evaluate",
    "map",
    "all",
)

__all__ = [
    "ConfigError",
    "InputError",
    "StageError",
    "STAGES",
    "canonical_config",
    "clustering_accuracy",
    "config_hash",
    "experiment",
    "generate",
    "hungarian",
    "kmeans",
    "nmi",
    "plan",
    "run",
    "run_stage",
    "stft",
    "triplet_correctness",
    "write_bundle",
]
