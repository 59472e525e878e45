"""Greedy compositional reassignment on top of Ward agglomerative clustering.

The base clustering proposes k clusters.  Each cluster whose centroid lies
within ``tau`` of a composition of other centroids is relabelled as that
composition, nearest first, until a consistency check fails.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .compose import SUM, compose_catalog
from .core import (
    CLUSTER, Assignment, CompositionCatalog, Dataset, InvalidParameterError,
    build_catalog, pairwise_distance,
)


@dataclass(frozen=True)
class GcrConfig:
    base_k: Optional[int] = None
    distance_threshold: Optional[float] = None
    tau: float = 1.0
    d: int = 2

    def __post_init__(self):
        if (self.base_k is None) == (self.distance_threshold is None):
            raise InvalidParameterError("set exactly one of base_k and distance_threshold")
        if self.base_k is not None and self.base_k < 1:
            raise InvalidParameterError("base_k must be positive")
        if self.distance_threshold is not None and self.distance_threshold < 0:
            raise InvalidParameterError("distance_threshold must be non-negative")
        if self.tau < 0:
            raise InvalidParameterError("tau must be non-negative")
        if self.d < 1:
            raise InvalidParameterError("d must be positive")

    def as_dict(self):
        return {"base_k": self.base_k, "distance_threshold": self.distance_threshold,
                "tau": self.tau, "d": self.d}


@dataclass(frozen=True)
class WardResult:
    centroids: np.ndarray     # (k, p) cluster means
    labels: np.ndarray        # 0-based cluster per example
    merges: np.ndarray        # (n - k, 3): merged ids and Ward distance

    @property
    def k(self):
        return self.centroids.shape[0]


def ward_agglomerative(dataset: Dataset, k=None, threshold=None) -> WardResult:
    """Bottom-up Ward clustering with Lance-Williams updates.

    Merge heights follow the usual convention
    ``sqrt(2 n_u n_v / (n_u + n_v)) * ||mean_u - mean_v||``.  Merging stops
    at ``k`` clusters, or before the first merge whose height exceeds
    ``threshold``.  Clusters are numbered by first appearance in the data.
    """
    x = dataset.points
    n = x.shape[0]
    if (k is None) == (threshold is None):
        raise InvalidParameterError("give exactly one of k and threshold")
    if k is not None and not 1 <= k <= n:
        raise InvalidParameterError(f"k={k} must lie in [1, n={n}]")
    stop_k = k if k is not None else 1

    # squared Ward heights; inf marks inactive rows and the diagonal
    d2 = pairwise_distance(x, x, "squared")
    np.fill_diagonal(d2, np.inf)
    size = np.ones(n)
    owner = np.arange(n)
    active = np.ones(n, dtype=bool)
    merges = []
    for _ in range(n - stop_k):
        flat = int(np.argmin(d2))
        u, v = divmod(flat, n)
        if u > v:
            u, v = v, u
        height = np.sqrt(d2[u, v])
        if threshold is not None and height > threshold:
            break
        merges.append((u, v, height))
        nu, nv = size[u], size[v]
        nw = size
        new = ((nu + nw) * d2[u] + (nv + nw) * d2[v] - nw * d2[u, v]) / (nu + nv + nw)
        new[~active] = np.inf
        new[u] = np.inf
        d2[u, :] = new
        d2[:, u] = new
        d2[v, :] = np.inf
        d2[:, v] = np.inf
        active[v] = False
        size[u] = nu + nv
        owner[owner == v] = u

    _, first = np.unique(owner, return_index=True)
    order = owner[np.sort(first)]
    relabel = np.empty(n, dtype=np.intp)
    relabel[order] = np.arange(order.size)
    labels = relabel[owner]
    centroids = np.stack([x[labels == j].mean(axis=0) for j in range(order.size)])
    return WardResult(centroids, labels, np.array(merges).reshape(-1, 3))


@dataclass(frozen=True)
class Reassignment:
    cluster_labels: tuple     # 1-based label set per base cluster
    processed: tuple          # 1-based clusters read as compositions, in order
    best: tuple               # b_j per cluster (None when no candidate exists)
    dist: np.ndarray          # d_j per cluster

    @property
    def mapping(self):
        return {j: self.cluster_labels[j - 1] for j in self.processed}


def best_compositions(centroids, catalog: CompositionCatalog, g=SUM):
    """Nearest composition ``b_j`` (excluding ones containing j) and its distance."""
    k = centroids.shape[0]
    rows = np.flatnonzero(catalog.sizes >= 2)
    best = [None] * k
    dist = np.full(k, np.inf)
    if rows.size == 0:
        return best, dist
    composed = compose_catalog(g, centroids, catalog)[rows]
    table = pairwise_distance(centroids, composed, "unsquared")
    idx = catalog.index[rows]
    for j in range(k):
        ok = ~np.any(idx == j, axis=1)
        if not ok.any():
            continue
        cand = np.flatnonzero(ok)
        pick = cand[int(np.argmin(table[j, cand]))]
        best[j] = catalog.members[rows[pick]]
        dist[j] = table[j, pick]
    return best, dist


def gcr_reassign_clusters(centroids, catalog: CompositionCatalog, g=SUM, tau=1.0) -> Reassignment:
    centroids = np.asarray(centroids, dtype=float)
    k = centroids.shape[0]
    if catalog.base != k:
        raise InvalidParameterError("catalog must be over the k base clusters")
    best, dist = best_compositions(centroids, catalog, g)
    labels = [(j,) for j in range(1, k + 1)]
    singles, comps = set(), set()
    processed = []
    for j0 in np.argsort(dist, kind="stable"):
        j = int(j0) + 1
        b = best[j0]
        if not dist[j0] < tau or j in singles or b is None or comps.intersection(b):
            break
        labels[j0] = b
        singles.update(b)
        comps.add(j)
        processed.append(j)
    return Reassignment(tuple(labels), tuple(processed), tuple(best), dist)


def gcr_reassign(centroids, labels, catalog: CompositionCatalog, g=SUM, tau=1.0) -> Assignment:
    """Relabel examples of base clusters (0-based ``labels``) after reassignment."""
    r = gcr_reassign_clusters(centroids, catalog, g, tau)
    return Assignment(tuple(r.cluster_labels[int(c)] for c in labels), CLUSTER)


def total_distance(points, centroids, assignment, g=SUM) -> float:
    """Sum over examples of the distance to the (composed) centroid of their label."""
    centroids = np.asarray(centroids, dtype=float)
    total = 0.0
    cache = {}
    for x, lab in zip(points, assignment.labels):
        if lab not in cache:
            cache[lab] = g.fold(centroids[[v - 1 for v in lab]][None])[0]
        total += float(np.linalg.norm(x - cache[lab]))
    return total


@dataclass
class GcrResult:
    assignment: Assignment
    base: WardResult
    reassignment: Reassignment
    total_distance: float


def gcr_cluster(dataset: Dataset, config: GcrConfig, g=SUM) -> GcrResult:
    base = ward_agglomerative(dataset, config.base_k, config.distance_threshold)
    catalog = build_catalog(base.k, min(config.d, base.k))
    r = gcr_reassign_clusters(base.centroids, catalog, g, config.tau)
    labels = Assignment(tuple(r.cluster_labels[c] for c in base.labels), CLUSTER)
    return GcrResult(labels, base, r, total_distance(dataset.points, base.centroids, labels, g))


def ward_singletons(dataset: Dataset, k=None, threshold=None) -> Assignment:
    """Base Ward clustering read as one singleton label per cluster."""
    base = ward_agglomerative(dataset, k, threshold)
    return Assignment(tuple((int(c) + 1,) for c in base.labels), CLUSTER)
