"""Task definitions, deterministic generators, oracles, dataset format."""

from .io import Dataset, FormatError, build_dataset, dataset_read, dataset_write, fnv1a64, generate_sample
from .rng import NS_RELAY, NS_SELFGEN, NS_TEST, NS_TRAIN, sample_rng
from .samples import (
    Sample,
    TaskKind,
    ValidationError,
    complexity,
    make_arithmetic,
    make_edit_distance,
    make_lis,
    oracle_answer,
    problem_length,
    validate_sample,
)
from .vocab import EOS, PAD, SEP, TASK_TAGS, VOCAB, Token, Vocabulary

__all__ = [
    "Dataset",
    "FormatError",
    "Sample",
    "TaskKind",
    "Token",
    "ValidationError",
    "Vocabulary",
    "VOCAB",
    "PAD",
    "EOS",
    "SEP",
    "TASK_TAGS",
    "NS_TRAIN",
    "NS_TEST",
    "NS_RELAY",
    "NS_SELFGEN",
    "build_dataset",
    "complexity",
    "dataset_read",
    "dataset_write",
    "fnv1a64",
    "generate_sample",
    "make_arithmetic",
    "make_edit_distance",
    "make_lis",
    "oracle_answer",
    "problem_length",
    "sample_rng",
    "validate_sample",
]
