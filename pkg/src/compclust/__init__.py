"""Compositional clustering: CAP, CKM and GCR, plus the CRI score.

Labels are *sets*.  An example carrying label ``(1, 3)`` is modelled as a
composition of classes 1 and 3 through a composition function ``g``.
"""
from .cap import CapResult, cap_cluster, cap_subset, find_all_maxes
from .ckm import CentroidSet, CkmConfig, ckm_assign, ckm_cluster, ckm_gradient_step, ckm_init
from .compose import CompositionFn, SUM, compose, compose_gradient, make_composition
from .core import (
    Assignment, CompClustError, CompositionCatalog, Dataset, InvalidInputError,
    InvalidParameterError, ParseError, UnsupportedGradientError, build_catalog,
    build_similarity, check_feasible, read_dataset, write_dataset,
)
from .gcr import GcrConfig, gcr_cluster, gcr_reassign, ward_agglomerative
from .metrics import cri, evaluate, osc_labels, rand_and_ari
from .synth import SynthConfig, generate_trial, load_trial, save_trial

__version__ = "0.1.0"

__all__ = [
    "Assignment", "CapResult", "CentroidSet", "CkmConfig", "CompClustError",
    "CompositionCatalog", "CompositionFn", "Dataset", "GcrConfig", "InvalidInputError",
    "InvalidParameterError", "ParseError", "SUM", "SynthConfig", "UnsupportedGradientError",
    "build_catalog", "build_similarity", "cap_cluster", "cap_subset", "check_feasible",
    "ckm_assign", "ckm_cluster", "ckm_gradient_step", "ckm_init", "compose",
    "compose_gradient", "cri", "evaluate", "find_all_maxes", "gcr_cluster", "gcr_reassign",
    "generate_trial", "load_trial", "make_composition", "osc_labels", "rand_and_ari",
    "read_dataset", "save_trial", "ward_agglomerative", "write_dataset",
]
