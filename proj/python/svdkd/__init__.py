"""SVD-guided knowledge distillation for cross-modal re-identification."""

import json

from . import _svdkd
from ._svdkd import (
    EmbeddingSet,
    Student,
    SvdkdError,
    config_schema,
    cosine_loss,
    evaluate_retrieval,
    fr_loss,
    id_loss,
    load_set,
    load_student,
    pcm_loss,
    save_set,
    sdm_total,
    spectrum_report,
    thin_svd,
    top_k_basis,
    triplet_loss,
)

__all__ = [
    "EmbeddingSet",
    "Student",
    "SvdkdError",
    "config_schema",
    "cosine_loss",
    "evaluate_retrieval",
    "fr_loss",
    "generate_dataset",
    "generate_split",
    "id_loss",
    "load_set",
    "load_student",
    "pcm_loss",
    "save_set",
    "sdm_total",
    "spectrum_report",
    "thin_svd",
    "top_k_basis",
    "train_distill",
    "triplet_loss",
]


def generate_dataset(synth=None):
    """Synthetic teacher set from a dict of `synth` config keys."""
    return _svdkd.generate_dataset(json.dumps({"synth": synth or {}}))


def generate_split(synth, heldout_identities):
    """(train, heldout) sets sharing one synthetic world."""
    return _svdkd.generate_split(json.dumps({"synth": synth or {}}), heldout_identities)


def train_distill(teacher, train=None, heldout=None):
    """Distills a student from `teacher`; returns (Student, log dict)."""
    return _svdkd.train_distill(teacher, json.dumps({"train": train or {}}), heldout)
