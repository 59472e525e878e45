"""Synthetic compositional embeddings with known label sets.

Singleton class centers are drawn in a centered hypercube; every label set
of size up to ``d`` sits at the composition of its members' centers, and
examples are that point plus isotropic Gaussian noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compose import SUM, CompositionFn, compose_catalog
from .core import (
    CompClustError, Dataset, InvalidParameterError, build_catalog, pairwise_distance,
    read_dataset, write_dataset,
)

MAX_ATTEMPTS = 100_000


class SeparationInfeasibleError(CompClustError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    l: int = 5
    d: int = 2
    per_cluster: int = 10
    p: int = 8
    separation: float = 1.0
    sigma: float = 0.0
    g: CompositionFn = field(default=SUM)
    seed: int = 0
    balanced: bool = True
    # enforce the separation between every pair of label-set centers, not
    # just between singleton centers
    separate_all: bool = True

    def __post_init__(self):
        if self.l < 2:
            raise InvalidParameterError("need at least two singleton classes")
        if not 1 <= self.d <= self.l:
            raise InvalidParameterError("need 1 <= d <= l")
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be non-negative")
        if self.separation <= 0:
            raise InvalidParameterError("separation must be positive")
        if self.per_cluster < 1 or self.p < 1:
            raise InvalidParameterError("per_cluster and p must be positive")

    @property
    def n_label_sets(self):
        return sum(math.comb(self.l, j) for j in range(1, self.d + 1))

    @property
    def n(self):
        return self.per_cluster * self.n_label_sets

    def as_dict(self):
        return {"l": self.l, "d": self.d, "per_cluster": self.per_cluster, "p": self.p,
                "separation": self.separation, "sigma": self.sigma,
                "g": self.g.describe(), "seed": self.seed, "balanced": self.balanced,
                "separate_all": self.separate_all}


@dataclass(frozen=True)
class Trial:
    dataset: Dataset
    centers: np.ndarray          # (l, p) singleton centers
    label_sets: tuple            # every label set, catalog order
    set_centers: np.ndarray      # composed center per label set
    config: SynthConfig


def _draw_centers(cfg: SynthConfig, rng):
    catalog = build_catalog(cfg.l, cfg.d)
    count = len(catalog) if cfg.separate_all else cfg.l
    side = 2.0 * cfg.separation * max(1.0, count ** (1.0 / cfg.p))
    for _ in range(MAX_ATTEMPTS):
        centers = rng.uniform(-side / 2, side / 2, size=(cfg.l, cfg.p))
        pts = compose_catalog(cfg.g, centers, catalog) if cfg.separate_all else centers
        dist = pairwise_distance(pts, pts)
        np.fill_diagonal(dist, np.inf)
        if dist.min() >= cfg.separation:
            return centers, catalog
    raise SeparationInfeasibleError(
        f"no center layout with separation {cfg.separation} after {MAX_ATTEMPTS} draws")


def generate_trial(cfg: SynthConfig) -> Trial:
    rng = np.random.default_rng(cfg.seed)
    centers, catalog = _draw_centers(cfg, rng)
    set_centers = compose_catalog(cfg.g, centers, catalog)
    if cfg.balanced:
        counts = np.full(len(catalog), cfg.per_cluster)
    else:
        probs = rng.dirichlet(np.ones(len(catalog)))
        counts = rng.multinomial(cfg.n, probs)
    which = np.repeat(np.arange(len(catalog)), counts)
    rng.shuffle(which)
    points = set_centers[which] + cfg.sigma * rng.standard_normal((which.size, cfg.p))
    labels = tuple(catalog.members[w] for w in which)
    return Trial(Dataset(points, labels), centers, catalog.members, set_centers, cfg)


def trial_paths(prefix):
    prefix = Path(prefix)
    if prefix.suffix == ".csv":
        prefix = prefix.with_suffix("")
    return prefix.with_suffix(".csv"), prefix.with_name(prefix.name + ".labels.json")


def save_trial(dataset: Dataset, prefix):
    """Write ``<prefix>.csv`` and, if labeled, ``<prefix>.labels.json``."""
    csv_path, labels_path = trial_paths(prefix)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, csv_path, labels_path)
    return csv_path, labels_path


def load_trial(prefix) -> Dataset:
    csv_path, labels_path = trial_paths(prefix)
    return read_dataset(csv_path, labels_path)
