"""Slow, obviously-correct references for the fast code paths.

Nothing here is used by the clustering algorithms themselves.  Every
exhaustive search refuses inputs past a hard cap instead of running for
hours.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, permutations, product

import numpy as np

from .core import (
    EXEMPLAR, NEG_INF, Assignment, BudgetExceededError, SimilarityTable, check_feasible,
)


@dataclass(frozen=True)
class OracleBudget:
    max_n: int = 10
    max_k: int = 7
    max_d: int = 3
    max_product_states: int = 2_000_000


DEFAULT_BUDGET = OracleBudget()


def _values(S):
    return S.values if isinstance(S, SimilarityTable) else np.asarray(S, dtype=float)


# -- subset maxima ------------------------------------------------------------

def naive_find_all_maxes(q_row, catalog):
    q_row = np.asarray(q_row, dtype=float)
    r = np.full(catalog.base, NEG_INF)
    s = np.full(catalog.base, NEG_INF)
    for k in range(catalog.base):
        inside = catalog.phi[k]
        outside = catalog.phi_bar(k)
        if inside.size:
            r[k] = q_row[inside].max()
        if outside.size:
            s[k] = q_row[outside].max()
    return r, s


# -- messages -----------------------------------------------------------------

def naive_rho(S, catalog, alpha):
    """rho[i, k, c] = S(i, c) + sum over k' != k of alpha[i, k', c]."""
    S = _values(S)
    n, m = S.shape
    rho = np.empty((n, n, m))
    for i in range(n):
        for k in range(n):
            for c in range(m):
                total = S[i, c]
                for kk in range(n):
                    if kk != k:
                        total += alpha[i, kk, c]
                rho[i, k, c] = total
    return rho


def naive_alpha(S, catalog, rho, budget=DEFAULT_BUDGET):
    """Constraint-to-variable messages from explicit ``rho`` tables.

    Four cases by whether ``i == k`` and whether label ``c`` contains ``k``.
    For ``i == k`` and a label containing ``k`` other than ``{k}`` the
    constraint is violated outright and the message is ``-inf``.
    """
    S = _values(S)
    n, m = S.shape
    if n > budget.max_n:
        raise BudgetExceededError(f"naive_alpha refuses n={n} > {budget.max_n}")
    members = [set(v - 1 for v in mem) for mem in catalog.members]
    single = [catalog.position((k + 1,)) for k in range(n)]

    def best(row, k, avoid_k):
        vals = [row[c] for c in range(m) if not (avoid_k and k in members[c])]
        return max(vals) if vals else NEG_INF

    alpha = np.empty((n, n, m))
    for i in range(n):
        for k in range(n):
            for c in range(m):
                has_k = k in members[c]
                if i == k and has_k:
                    if c != single[k]:
                        alpha[i, k, c] = NEG_INF
                        continue
                    alpha[i, k, c] = sum(best(rho[j, k], k, False)
                                         for j in range(n) if j != k)
                elif i == k:
                    alpha[i, k, c] = sum(best(rho[j, k], k, True)
                                         for j in range(n) if j != k)
                elif has_k:
                    alpha[i, k, c] = rho[k, k, single[k]] + sum(
                        best(rho[j, k], k, False) for j in range(n) if j not in (i, k))
                else:
                    not_exemplar = best(rho[k, k], k, True) + sum(
                        best(rho[j, k], k, True) for j in range(n) if j not in (i, k))
                    exemplar = rho[k, k, single[k]] + sum(
                        best(rho[j, k], k, False) for j in range(n) if j not in (i, k))
                    alpha[i, k, c] = max(not_exemplar, exemplar)
    return alpha


def enumerated_alpha(catalog, rho, max_states=200_000):
    """alpha by maximizing over every joint label of the other variables."""
    n, _, m = rho.shape
    if m ** (n - 1) * n * n * m > max_states * 50:
        raise BudgetExceededError("enumerated_alpha is for tiny instances only")
    members = [set(v - 1 for v in mem) for mem in catalog.members]
    single = [catalog.position((k + 1,)) for k in range(n)]
    alpha = np.full((n, n, m), NEG_INF)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for k in range(n):
            for c in range(m):
                best = NEG_INF
                for combo in product(range(m), repeat=n - 1):
                    labels = dict(zip(others, combo))
                    labels[i] = c
                    used = any(k in members[labels[j]] for j in range(n))
                    if used and labels[k] != single[k]:
                        continue
                    val = sum(rho[j, k, labels[j]] for j in others)
                    best = max(best, val)
                alpha[i, k, c] = best
    return alpha


def naive_message_passing(S, catalog, iterations, normalize=False):
    """Undamped max-sum on full message tables; yields alpha after each round."""
    S = _values(S)
    n, m = S.shape
    alpha = np.zeros((n, n, m))
    history = []
    for _ in range(iterations):
        rho = naive_rho(S, catalog, alpha)
        alpha = naive_alpha(S, catalog, rho)
        if normalize:
            # shift each message so its value on labels avoiding k is zero
            for i in range(n):
                for k in range(n):
                    ref = alpha[i, k, catalog.phi_bar(k)[0]] if len(catalog.phi_bar(k)) else 0.0
                    alpha[i, k] -= ref
        history.append((rho, alpha.copy()))
    return history


def alpha_to_stats(alpha, catalog):
    """Collapse a full alpha table to the (a, a_bar) pair."""
    n = alpha.shape[0]
    a = np.empty((n, n))
    a_bar = np.empty((n, n))
    for i in range(n):
        for k in range(n):
            inside = catalog.position((k + 1,)) if i == k else catalog.phi[k][0]
            a[i, k] = alpha[i, k, inside]
            outside = catalog.phi_bar(k)
            a_bar[i, k] = alpha[i, k, outside[0]] if outside.size else NEG_INF
    return a, a_bar


def rho_to_stats(rho, catalog):
    """(b, b_bar, h) read directly off explicit rho tables."""
    n = rho.shape[0]
    b = rho.max(axis=2)
    b_bar = np.empty((n, n))
    for k in range(n):
        outside = catalog.phi_bar(k)
        b_bar[:, k] = rho[:, k, outside].max(axis=1) if outside.size else NEG_INF
    h = np.array([rho[k, k, catalog.position((k + 1,))] for k in range(n)])
    return b, b_bar, h


# -- exact MAP ----------------------------------------------------------------

def _objective(S, positions):
    return float(sum(S[i, p] for i, p in enumerate(positions)))


def brute_force_cap_map(S, catalog, budget=DEFAULT_BUDGET, method="exemplar-sets"):
    """Best feasible assignment and its objective ``sum_i S(i, c_i)``.

    ``method="exemplar-sets"`` walks every non-empty set of self-designated
    exemplars; once that set is fixed the remaining examples decouple, so
    each one independently takes its best label drawn from the set.
    ``method="product"`` walks all ``|C|^n`` label tuples and keeps feasible
    ones; it exists to cross-check the first method on tiny inputs.
    Ties go to the tuple of catalog positions that sorts first.
    """
    S = _values(S)
    n, m = S.shape
    if n > budget.max_n:
        raise BudgetExceededError(f"brute_force_cap_map refuses n={n} > {budget.max_n}")
    best_val, best_pos = NEG_INF, None
    if method == "product":
        if m ** n > budget.max_product_states:
            raise BudgetExceededError(f"{m}^{n} label tuples exceed the budget")
        for combo in product(range(m), repeat=n):
            labels = [catalog.members[c] for c in combo]
            if not check_feasible(labels):
                continue
            val = _objective(S, combo)
            if val > best_val:
                best_val, best_pos = val, combo
    elif method == "exemplar-sets":
        units = range(n)
        for size in range(1, n + 1):
            for ex in combinations(units, size):
                allowed = np.flatnonzero(catalog.subsets_of(ex))
                ex_set = set(ex)
                pos = []
                for i in range(n):
                    if i in ex_set:
                        pos.append(i)
                    else:
                        row = S[i, allowed]
                        pos.append(int(allowed[int(np.argmax(row))]))
                val = _objective(S, pos)
                pos = tuple(pos)
                if val > best_val or (val == best_val and pos < best_pos):
                    best_val, best_pos = val, pos
    else:
        raise ValueError(f"unknown method {method!r}")
    assignment = Assignment(tuple(catalog.members[p] for p in best_pos), EXEMPLAR)
    return assignment, best_val


# -- reassignment -------------------------------------------------------------

def count_reassignment_maps(k: int, d: int) -> int:
    """Number of (compositional subset, one-to-one map) pairs over k clusters."""
    total = 0
    for i in range(k + 1):
        targets = sum(math.comb(k - i, dd) for dd in range(2, d + 1))
        total += math.comb(k, i) * math.perm(targets, i)
    return total


@dataclass(frozen=True)
class ReassignmentResult:
    singletons: tuple        # 1-based clusters left as singletons
    mapping: dict            # 1-based cluster -> 1-based composition
    total: float
    visited: int

    def labels(self, k):
        return tuple(self.mapping.get(j, (j,)) for j in range(1, k + 1))


def reassignment_cost(centroids, g, mapping, tau, weights=None):
    """Cost of a reassignment: distance to the composition, or ``tau`` if left alone."""
    centroids = np.asarray(centroids, dtype=float)
    k = centroids.shape[0]
    w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
    total = 0.0
    for j in range(1, k + 1):
        if j in mapping:
            target = g.fold(centroids[[v - 1 for v in mapping[j]]][None])[0]
            total += w[j - 1] * float(np.linalg.norm(centroids[j - 1] - target))
        else:
            total += w[j - 1] * tau
    return total


def _point_costs(points, cluster_of, centroids, g, catalog):
    """Per-cluster summed point distance to its own centroid and to each composition."""
    points = np.asarray(points, dtype=float)
    cluster_of = np.asarray(cluster_of, dtype=np.intp)
    k = centroids.shape[0]
    own = np.array([np.linalg.norm(points[cluster_of == j] - centroids[j], axis=1).sum()
                    for j in range(k)])
    to = {}
    for mem in catalog.members:
        if len(mem) >= 2:
            vec = g.fold(centroids[[v - 1 for v in mem]][None])[0]
            for j in range(1, k + 1):
                to[(j, mem)] = float(np.linalg.norm(points[cluster_of == j - 1] - vec,
                                                    axis=1).sum())
    return own, to


def brute_force_reassignment(centroids, g, catalog, tau=1.0, weights=None,
                             budget=DEFAULT_BUDGET, points=None, cluster_of=None,
                             injective=True) -> ReassignmentResult:
    """Exhaustive search over compositional subsets and maps onto compositions.

    Two objectives are available.  With ``points`` and ``cluster_of``
    (0-based base cluster per point) the cost is the summed distance from
    every point to the centroid its cluster ends up with.  Without them a
    cluster mapped to a composition pays its centroid's distance to that
    composition and a cluster left alone pays ``tau``; this is the quantity
    the greedy threshold acts on.

    ``injective=True`` walks one-to-one maps only, and ``visited`` then
    equals :func:`count_reassignment_maps`.  ``injective=False`` also walks
    maps that send several clusters to the same composition.
    """
    centroids = np.asarray(centroids, dtype=float)
    k = centroids.shape[0]
    d = catalog.max_size
    if k > budget.max_k:
        raise BudgetExceededError(f"brute_force_reassignment refuses k={k} > {budget.max_k}")
    if catalog.base != k:
        raise ValueError("catalog must be over the k clusters")
    if points is not None:
        if cluster_of is None:
            raise ValueError("points need cluster_of")
        own, dist = _point_costs(points, cluster_of, centroids, g, catalog)
    else:
        w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
        own = tau * w
        dist = {}
        for mem in catalog.members:
            if len(mem) >= 2:
                vec = g.fold(centroids[[v - 1 for v in mem]][None])[0]
                for j in range(1, k + 1):
                    dist[(j, mem)] = w[j - 1] * float(np.linalg.norm(centroids[j - 1] - vec))
    visited = 0
    best = None
    clusters = range(1, k + 1)
    for i in range(k + 1):
        for comp in combinations(clusters, i):
            rest = [j for j in clusters if j not in comp]
            targets = [mem for size in range(2, d + 1)
                       for mem in combinations(rest, size)]
            base_cost = float(sum(own[j - 1] for j in rest))
            maps = permutations(targets, i) if injective else product(targets, repeat=i)
            for image in maps:
                visited += 1
                cost = base_cost + sum(dist[(j, mem)] for j, mem in zip(comp, image))
                if best is None or cost < best[0]:
                    best = (cost, comp, image)
    cost, comp, image = best
    mapping = dict(zip(comp, image))
    singles = tuple(j for j in clusters if j not in mapping)
    return ReassignmentResult(singles, mapping, cost, visited)
