"""Randomized comparisons of the fast code paths against the oracles.

Each suite draws small instances from one generator, runs both sides and
returns an :class:`AuditReport`.  The test suite and the ``oracle``
subcommand share these functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cap import MessageState, cap_messages, compute_alpha_stats, compute_rho_stats, find_all_maxes
from .compose import SUM
from .core import Dataset, build_catalog, build_similarity, check_feasible
from .gcr import GcrConfig, gcr_cluster
from .oracle import (
    alpha_to_stats, brute_force_cap_map, brute_force_reassignment, count_reassignment_maps,
    naive_find_all_maxes, naive_message_passing, reassignment_cost, rho_to_stats,
)


@dataclass
class AuditReport:
    suite: str
    checked: int = 0
    failures: int = 0
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.checked > 0 and self.failures == 0)

    def as_dict(self):
        return {"suite": self.suite, "passed": self.passed, "checked": int(self.checked),
                "failures": int(self.failures), **self.details}


def _close(x, y, rtol):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    same_inf = np.isinf(x) & np.isinf(y) & (np.sign(x) == np.sign(y))
    gap = np.where(same_inf, 0.0, np.abs(x - y))
    scale = np.maximum(1.0, np.where(same_inf, 1.0, np.abs(y)))
    return bool(np.all(gap <= rtol * scale))


def random_q_row(rng, catalog, p_inf=0.1):
    q = rng.normal(size=len(catalog))
    if rng.random() < 0.5:
        q = np.round(q, 1)  # force ties
    q[rng.random(len(catalog)) < p_inf] = -np.inf
    return q


def audit_maxes(instances=1000, max_n=12, max_d=3, seed=0) -> AuditReport:
    """find_all_maxes against its per-k loop, exact equality."""
    rng = np.random.default_rng(seed)
    rep = AuditReport("maxes")
    for _ in range(instances):
        n = int(rng.integers(1, max_n + 1))
        cat = build_catalog(n, int(rng.integers(1, min(max_d, n) + 1)))
        q = random_q_row(rng, cat)
        r, s = find_all_maxes(q, cat)
        r0, s0 = naive_find_all_maxes(q, cat)
        rep.checked += 1
        rep.failures += not (np.array_equal(r, r0) and np.array_equal(s, s0))
    return rep


def random_similarity(rng, n, d=2, p=2):
    cat = build_catalog(n, min(d, n))
    x = rng.normal(size=(n, p))
    gamma = -rng.uniform(0.2, 3.0)
    return build_similarity(Dataset(x), cat, SUM, gamma).values, cat


def fast_messages(S, catalog, iterations):
    """Undamped, unnormalized statistics after each iteration."""
    n = S.shape[0]
    state = MessageState.zeros(n)
    out = []
    for _ in range(iterations):
        b, b_bar, h = compute_rho_stats(S, catalog, state)
        a, a_bar, _ = compute_alpha_stats(catalog, b, b_bar, h, with_q=False)
        out.append((b, b_bar, h, a, a_bar))
        state = MessageState(a, a_bar)
    return out


def audit_messages(instances=200, max_n=6, iterations=3, rtol=1e-9, seed=0) -> AuditReport:
    """Statistics-based updates against explicit message tables."""
    rng = np.random.default_rng(seed)
    rep = AuditReport("alpha", details={"iterations": iterations, "rtol": rtol})
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, max_n + 1))
        S, cat = random_similarity(rng, n)
        fast = fast_messages(S, cat, iterations)
        slow = naive_message_passing(S, cat, iterations)
        ok = True
        for (b, b_bar, h, a, a_bar), (rho, alpha) in zip(fast, slow):
            want = rho_to_stats(rho, cat) + alpha_to_stats(alpha, cat)
            for got, ref in zip((b, b_bar, h, a, a_bar), want):
                ok &= _close(got, ref, rtol)
                fin = np.isfinite(ref)
                if fin.any():
                    err = np.abs(got[fin] - ref[fin]) / np.maximum(1.0, np.abs(ref[fin]))
                    worst = max(worst, float(err.max()))
        rep.checked += 1
        rep.failures += not ok
    rep.details["max_rel_error"] = worst
    return rep


def audit_cap(instances=200, max_n=8, d=2, min_match=0.7, seed=0, damping=0.65) -> AuditReport:
    """CAP's decode against the exhaustive optimum.

    A failure is an infeasible decode or an objective above the optimum;
    the match rate is reported and must reach ``min_match``.
    """
    rng = np.random.default_rng(seed)
    rep = AuditReport("cap")
    matches = 0
    for _ in range(instances):
        n = int(rng.integers(2, max_n + 1))
        S, cat = random_similarity(rng, n, d)
        res = cap_messages(S, cat, damping=damping)
        _, opt = brute_force_cap_map(S, cat)
        rep.checked += 1
        rep.failures += not (check_feasible(res.assignment) and res.objective <= opt + 1e-9)
        matches += abs(res.objective - opt) <= 1e-9 * max(1.0, abs(opt))
    rate = matches / max(instances, 1)
    rep.details["match_rate"] = rate
    if rate < min_match:
        rep.failures += 1
    return rep


def audit_reassign(max_k=6, instances=50, seed=0, count_k=range(2, 7)) -> AuditReport:
    """Visited-state counts and the greedy-versus-exhaustive bound.

    The bound is checked twice: on summed point distances against the
    one-to-one search, and on the thresholded centroid cost against the
    search that also allows many-to-one maps (the greedy pass can send two
    clusters to the same composition).
    """
    rng = np.random.default_rng(seed)
    rep = AuditReport("reassign")
    for k in count_k:
        cat = build_catalog(k, 2)
        res = brute_force_reassignment(rng.normal(size=(k, 2)), SUM, cat, tau=1.0)
        rep.checked += 1
        rep.failures += res.visited != count_reassignment_maps(k, 2)
    for _ in range(instances):
        k = int(rng.integers(2, max_k + 1))
        n = int(rng.integers(k, 4 * k + 1))
        x = rng.normal(size=(n, 2)) * rng.uniform(0.5, 2.0)
        tau = float(rng.uniform(0.1, 2.0))
        res = gcr_cluster(Dataset(x), GcrConfig(base_k=k, tau=tau))
        cat = build_catalog(k, 2)
        m = res.base.centroids
        opt = brute_force_reassignment(m, SUM, cat, points=x, cluster_of=res.base.labels)
        loose = brute_force_reassignment(m, SUM, cat, tau, injective=False)
        cost = reassignment_cost(m, SUM, res.reassignment.mapping, tau)
        rep.checked += 1
        rep.failures += (res.total_distance < opt.total - 1e-9) or (cost < loose.total - 1e-9)
    return rep


SUITES = {"maxes": audit_maxes, "alpha": audit_messages, "cap": audit_cap,
          "reassign": audit_reassign}
