"""Compositional k-means.

Alternates nearest-centroid assignment over singleton and composed
centroids with gradient descent on the singleton centroids only.  The
descent uses full batches and halves the step until the sum of squared
distances does not increase, so the objective is monotone across
alternations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .compose import SUM, CompositionFn, compose_catalog
from .core import (
    CLUSTER, Assignment, CompositionCatalog, Dataset, InvalidParameterError,
    build_catalog, pairwise_distance,
)

MAX_HALVINGS = 20


@dataclass(frozen=True)
class CkmConfig:
    k: int
    d: int = 2
    learning_rate: float = 0.01
    restarts: int = 100
    max_alternations: int = 100
    gradient_steps: int = 10
    seed: int = 0
    catalog: Optional[CompositionCatalog] = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError("k must be positive")
        if self.learning_rate <= 0:
            raise InvalidParameterError("learning rate must be positive")
        if self.restarts < 1 or self.max_alternations < 1 or self.gradient_steps < 1:
            raise InvalidParameterError("restarts, alternations and steps must be positive")
        if self.catalog is None:
            object.__setattr__(self, "catalog", build_catalog(self.k, min(self.d, self.k)))
        elif self.catalog.base != self.k:
            raise InvalidParameterError("catalog must be over the k singleton clusters")

    def as_dict(self):
        return {"k": self.k, "d": self.catalog.max_size, "learning_rate": self.learning_rate,
                "restarts": self.restarts, "max_alternations": self.max_alternations,
                "gradient_steps": self.gradient_steps, "seed": self.seed}


@dataclass(frozen=True)
class CentroidSet:
    singletons: np.ndarray
    catalog: CompositionCatalog
    g: CompositionFn = SUM

    @property
    def all(self) -> np.ndarray:
        """Centroid of every catalog member, recomputed from the singletons."""
        return compose_catalog(self.g, self.singletons, self.catalog)

    def moved(self, singletons):
        return CentroidSet(np.asarray(singletons, dtype=float), self.catalog, self.g)


def ckm_init(dataset: Dataset, k: int, seed=0, catalog=None, g=SUM) -> CentroidSet:
    """Singleton centroids copied from ``k`` examples drawn without replacement."""
    if k > dataset.n:
        raise InvalidParameterError(f"k={k} exceeds n={dataset.n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pick = rng.choice(dataset.n, size=k, replace=False)
    catalog = catalog if catalog is not None else build_catalog(k, min(2, k))
    return CentroidSet(dataset.points[pick].copy(), catalog, g)


def assign_positions(points, centroids: CentroidSet, counter=None) -> np.ndarray:
    """Catalog position of the nearest centroid per point (first wins ties)."""
    allc = centroids.all
    if counter is not None:
        counter["distances"] = counter.get("distances", 0) + points.shape[0] * allc.shape[0]
    return pairwise_distance(points, allc, "squared").argmin(axis=1)


def ckm_assign(dataset: Dataset, centroids: CentroidSet, catalog=None) -> Assignment:
    catalog = catalog if catalog is not None else centroids.catalog
    if catalog is not centroids.catalog:
        centroids = CentroidSet(centroids.singletons, catalog, centroids.g)
    pos = assign_positions(dataset.points, centroids)
    return Assignment(tuple(catalog.members[p] for p in pos), CLUSTER)


def _positions(assignment, catalog):
    if isinstance(assignment, Assignment):
        return np.array([catalog.position(lab) for lab in assignment.labels])
    return np.asarray(assignment, dtype=np.intp)


def ssd(points, centroids: CentroidSet, positions) -> float:
    diff = points - centroids.all[positions]
    return float(np.einsum("ij,ij->", diff, diff))


def ssd_gradient(points, centroids: CentroidSet, positions) -> np.ndarray:
    """Gradient of the SSD w.r.t. every singleton centroid, shape (k, p)."""
    catalog, g = centroids.catalog, centroids.g
    allc = centroids.all
    m, p = allc.shape
    resid = np.zeros((m, p))
    np.add.at(resid, positions, allc[positions] - points)
    grad = np.zeros_like(centroids.singletons)
    used = np.zeros(m, dtype=bool)
    used[positions] = True
    for size in range(1, catalog.max_size + 1):
        rows = np.flatnonzero(used & (catalog.sizes == size))
        if rows.size == 0:
            continue
        idx = catalog.index[rows, :size]
        if size == 1:
            np.add.at(grad, idx[:, 0], 2.0 * resid[rows])
            continue
        jac = g.jacobians(centroids.singletons[idx])          # (M, size, p, p)
        contrib = 2.0 * np.einsum("mtab,ma->mtb", jac, resid[rows])
        np.add.at(grad, idx.ravel(), contrib.reshape(-1, p))
    return grad


def ckm_gradient_step(dataset: Dataset, centroids: CentroidSet, assignment, g=None,
                      learning_rate=0.01, steps=10):
    """Gradient descent on the singletons with the labels held fixed.

    Each step halves the rate (up to 20 times) until the SSD does not
    increase; a halved rate carries over to later steps of the same call.
    Returns ``(centroids, ssd)``.
    """
    if g is not None and g is not centroids.g:
        centroids = CentroidSet(centroids.singletons, centroids.catalog, g)
    x = dataset.points
    pos = _positions(assignment, centroids.catalog)
    current = ssd(x, centroids, pos)
    lr = learning_rate
    for _ in range(steps):
        grad = ssd_gradient(x, centroids, pos)
        if not np.any(grad):
            break
        for _ in range(MAX_HALVINGS + 1):
            trial = centroids.moved(centroids.singletons - lr * grad)
            value = ssd(x, trial, pos)
            if value <= current:
                break
            lr *= 0.5
        else:
            break
        if value == current:
            break
        centroids, current = trial, value
    return centroids, current


def _reseed_empty(points, centroids: CentroidSet, positions) -> CentroidSet:
    """Move singletons that no used label mentions onto the worst-fit points."""
    catalog = centroids.catalog
    mentioned = np.zeros(catalog.base, dtype=bool)
    idx = catalog.index[np.unique(positions)]
    mentioned[idx[idx >= 0]] = True
    empty = np.flatnonzero(~mentioned)
    if empty.size == 0:
        return centroids
    diff = points - centroids.all[positions]
    far = np.argsort(-np.einsum("ij,ij->i", diff, diff), kind="stable")
    new = centroids.singletons.copy()
    new[empty] = points[far[:empty.size]]
    return centroids.moved(new)


@dataclass
class CkmRun:
    positions: np.ndarray
    centroids: CentroidSet
    ssd: float
    ssd_history: list
    alternations: int
    converged: bool
    seed: int = 0


def ckm_single(dataset: Dataset, centroids: CentroidSet, learning_rate=0.01,
               max_alternations=100, gradient_steps=10, counter=None) -> CkmRun:
    """One restart of the alternation from the given starting centroids."""
    x = dataset.points
    pos = assign_positions(x, centroids, counter)
    history = [ssd(x, centroids, pos)]
    converged = False
    alt = 0
    for alt in range(1, max_alternations + 1):
        centroids = _reseed_empty(x, centroids, pos)
        centroids, _ = ckm_gradient_step(dataset, centroids, pos, None,
                                         learning_rate, gradient_steps)
        new_pos = assign_positions(x, centroids, counter)
        history.append(ssd(x, centroids, new_pos))
        if np.array_equal(new_pos, pos):
            converged = True
            break
        pos = new_pos
    return CkmRun(pos, centroids, history[-1], history, alt, converged)


@dataclass
class CkmResult:
    assignment: Assignment
    ssd: float
    best_seed: int
    run: CkmRun
    restart_ssd: list = field(default_factory=list)


def restart_seeds(seed, restarts):
    return [int(s.generate_state(1)[0])
            for s in np.random.SeedSequence(seed).spawn(restarts)]


def ckm_cluster(dataset: Dataset, config: CkmConfig, g=SUM) -> CkmResult:
    """Best-of-``restarts`` compositional k-means by final SSD."""
    best = None
    all_ssd = []
    for s in restart_seeds(config.seed, config.restarts):
        start = ckm_init(dataset, config.k, s, config.catalog, g)
        run = ckm_single(dataset, start, config.learning_rate,
                         config.max_alternations, config.gradient_steps)
        run.seed = s
        all_ssd.append(run.ssd)
        if not np.isfinite(run.ssd):
            continue
        if best is None or run.ssd < best.ssd:
            best = run
    if best is None:
        raise RuntimeError("every CKM restart diverged")
    cat = config.catalog
    labels = Assignment(tuple(cat.members[p] for p in best.positions), CLUSTER)
    return CkmResult(labels, best.ssd, best.seed, best, all_ssd)
