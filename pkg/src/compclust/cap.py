"""Compositional affinity propagation.

Max-sum message passing over the exemplar factor graph, carried out through
per-(i, k) sufficient statistics instead of the full message tables:

* ``a[i, k]`` / ``a_bar[i, k]`` - the message from constraint ``k`` to
  variable ``i`` evaluated on labels containing / not containing ``k``;
* ``q[i, c]`` - the sum of all incoming constraint messages for label ``c``;
* ``b``, ``b_bar``, ``h`` - the maxima of the variable-to-constraint messages
  needed to rebuild ``a`` and ``a_bar``.

One iteration costs ``O(d n^(d+1))``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .compose import SUM
from .core import (
    EXEMPLAR, NEG_INF, Assignment, CompositionCatalog, Dataset, InvalidParameterError,
    SimilarityTable, build_catalog, build_similarity, check_feasible, pairwise_distance,
)

# elements per scratch tensor in the blocked kernels
_BLOCK_ELEMS = 1 << 22


@dataclass
class MessageState:
    a: np.ndarray
    a_bar: np.ndarray
    q: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    b_bar: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, n, n_members=None):
        q = None if n_members is None else np.zeros((n, n_members))
        return cls(np.zeros((n, n)), np.zeros((n, n)), q)


class _MaxPlan:
    """Index tables for the subset-maxima kernel of one catalog."""

    def __init__(self, catalog: CompositionCatalog):
        n, m = catalog.base, len(catalog)
        self.n, self.m = n, m
        pad = m  # points at an appended -inf column
        L = max(len(p) for p in catalog.phi)
        self.phi_pad = np.full((n, L), pad, dtype=np.intp)
        for k, pos in enumerate(catalog.phi):
            self.phi_pad[k, :len(pos)] = pos
        # groups psi_tau: members of one size sharing the prefix tau
        self.groups = []
        for size in range(1, catalog.max_size + 1):
            rows = np.flatnonzero(catalog.sizes == size)
            if rows.size == 0:
                continue
            idx = catalog.index[rows, :size]
            if size == 1:
                starts = np.array([0])
            else:
                prefix = idx[:, :-1]
                change = np.any(prefix[1:] != prefix[:-1], axis=1)
                starts = np.concatenate([[0], np.flatnonzero(change) + 1])
            ends = np.concatenate([starts[1:], [rows.size]])
            G, Lg = starts.size, int((ends - starts).max())
            members = np.full((G, Lg), pad, dtype=np.intp)
            last = np.zeros((G, Lg), dtype=np.intp)
            in_prefix = np.zeros((G, n), dtype=bool)
            for g, (lo, hi) in enumerate(zip(starts, ends)):
                members[g, :hi - lo] = rows[lo:hi]
                last[g, :hi - lo] = idx[lo:hi, -1]
                in_prefix[g, idx[lo, :-1]] = True
            self.groups.append((members, last, in_prefix))

    def block_rows(self):
        widest = max([self.phi_pad.shape[1] * self.n]
                     + [g[0].shape[0] * max(g[0].shape[1], self.n) for g in self.groups])
        return max(1, _BLOCK_ELEMS // max(widest, 1))


_plans: dict = {}


def _plan(catalog) -> _MaxPlan:
    key = id(catalog)
    hit = _plans.get(key)
    if hit is None or hit[0] is not catalog:
        if len(_plans) > 8:
            _plans.clear()
        hit = (catalog, _MaxPlan(catalog))
        _plans[key] = hit
    return hit[1]


def _maxes_block(V: np.ndarray, plan: _MaxPlan):
    """(r, s) for a (B, |C|) block of rows."""
    B = V.shape[0]
    Vext = np.concatenate([V, np.full((B, 1), NEG_INF)], axis=1)
    r = Vext[:, plan.phi_pad].max(axis=2)
    s = np.full((B, plan.n), NEG_INF)
    rows = np.arange(B)[:, None]
    for members, last, in_prefix in plan.groups:
        Vg = Vext[:, members]                        # (B, G, Lg)
        c1 = Vg.argmax(axis=2)                       # (B, G)
        v1 = np.take_along_axis(Vg, c1[..., None], 2)[..., 0]
        l1 = last[np.arange(members.shape[0])[None, :], c1]
        np.put_along_axis(Vg, c1[..., None], NEG_INF, 2)
        v2 = Vg.max(axis=2)
        # k in tau: no member of the group avoids k.  k == last(c1): the
        # runner-up is the best member avoiding k.  otherwise: c1 itself.
        contrib = np.where(in_prefix[None], NEG_INF, v1[..., None])  # (B, G, n)
        contrib[rows, np.arange(members.shape[0])[None, :], l1] = v2
        np.maximum(s, contrib.max(axis=1), out=s)
    return r, s


def find_all_maxes(q_row, catalog: CompositionCatalog):
    """Max of ``q_row`` over members containing / avoiding each unit.

    ``q_row`` may be one row of length |C| or a (B, |C|) block.  Returns
    ``(r, s)`` with ``r[k] = max q(phi(k))`` and ``s[k] = max q(phi_bar(k))``
    (``-inf`` where the set is empty).
    """
    V = np.asarray(q_row, dtype=float)
    single = V.ndim == 1
    V = np.atleast_2d(V)
    plan = _plan(catalog)
    step = plan.block_rows()
    r = np.empty((V.shape[0], catalog.base))
    s = np.empty_like(r)
    for lo in range(0, V.shape[0], step):
        r[lo:lo + step], s[lo:lo + step] = _maxes_block(V[lo:lo + step], plan)
    if single:
        return r[0], s[0]
    return r, s


def _q_block(a, a_bar, catalog, rows):
    """q(i, .) for the given rows from the alpha statistics."""
    diff = a[rows] - a_bar[rows]
    diff = np.concatenate([diff, np.zeros((diff.shape[0], 1))], axis=1)
    q = np.repeat(a_bar[rows].sum(axis=1)[:, None], len(catalog), axis=1)
    for t in range(catalog.max_size):
        q += diff[:, catalog.index[:, t]]
    return q


def q_table(a, a_bar, catalog):
    """Full n x |C| table ``q(i, c) = q*(i) + sum_{k in c} (a - a_bar)(i, k)``."""
    return _q_block(a, a_bar, catalog, slice(None))


def _rho_pass(S: np.ndarray, catalog, a, a_bar, want_decode=False):
    n = S.shape[0]
    plan = _plan(catalog)
    step = plan.block_rows()
    b = np.empty((n, n))
    b_bar = np.empty((n, n))
    decode = np.empty(n, dtype=np.intp) if want_decode else None
    for lo in range(0, n, step):
        rows = slice(lo, min(n, lo + step))
        V = S[rows] + _q_block(a, a_bar, catalog, rows)
        r, s = _maxes_block(V, plan)
        b[rows] = np.maximum(r - a[rows], s - a_bar[rows])
        b_bar[rows] = s - a_bar[rows]
        if want_decode:
            decode[rows] = V.argmax(axis=1)
    diag = np.arange(n)
    # q(k, {k}) - a(k, k) = q*(k) - a_bar(k, k)
    h = S[diag, diag] + a_bar.sum(axis=1) - a_bar[diag, diag]
    return b, b_bar, h, decode


def compute_rho_stats(S, catalog, state: MessageState):
    """Return ``(b, b_bar, h)`` from the current alpha statistics."""
    values = S.values if isinstance(S, SimilarityTable) else np.asarray(S)
    b, b_bar, h, _ = _rho_pass(values, catalog, state.a, state.a_bar)
    return b, b_bar, h


def compute_alpha_stats(catalog, b, b_bar, h, with_q=True):
    """Return ``(a, a_bar, q)``; ``q`` is None when ``with_q`` is False."""
    n = b.shape[0]
    diag = np.arange(n)
    e = b.sum(axis=0) - b[diag, diag]
    e_bar = b_bar.sum(axis=0) - b_bar[diag, diag]
    with_k = h[None, :] + e[None, :] - b
    a = with_k.copy()
    a_bar = np.maximum(b_bar[diag, diag][None, :] + e_bar[None, :] - b_bar, with_k)
    a[diag, diag] = e
    a_bar[diag, diag] = e_bar
    q = q_table(a, a_bar, catalog) if with_q else None
    return a, a_bar, q


def decode_labels(S: np.ndarray, catalog, a, a_bar) -> np.ndarray:
    """Raw MAP decode: catalog position maximizing ``S + q`` per example."""
    n = S.shape[0]
    out = np.empty(n, dtype=np.intp)
    step = max(1, _BLOCK_ELEMS // max(len(catalog), 1))
    for lo in range(0, n, step):
        rows = slice(lo, min(n, lo + step))
        out[rows] = (S[rows] + _q_block(a, a_bar, catalog, rows)).argmax(axis=1)
    return out


def repair(S: np.ndarray, catalog, positions, margin=None) -> np.ndarray:
    """Make a decode feasible.

    Self-designated examples become the exemplar set; every other example
    is reassigned to the best member composed only of exemplars.  An empty
    exemplar set is seeded with the example of largest ``margin`` (or the
    largest self-similarity when no margin is given).
    """
    n = S.shape[0]
    positions = np.asarray(positions, dtype=np.intp)
    exemplars = np.flatnonzero(positions == np.arange(n))
    if exemplars.size == 0:
        score = margin if margin is not None else S[np.arange(n), np.arange(n)]
        exemplars = np.array([int(np.argmax(score))])
    allowed = np.flatnonzero(catalog.subsets_of(exemplars))
    out = allowed[np.argmax(S[:, allowed], axis=1)]
    out[exemplars] = exemplars
    return out


def positions_to_assignment(catalog, positions) -> Assignment:
    return Assignment(tuple(catalog.members[p] for p in positions), EXEMPLAR)


@dataclass
class CapResult:
    assignment: Assignment
    positions: np.ndarray
    objective: float
    converged: bool
    iterations: int
    diagnostics: list = field(default_factory=list)

    def diagnostics_json(self):
        return {"converged": self.converged, "iterations": self.iterations,
                "objective": self.objective, "per_iteration": self.diagnostics}


def cap_messages(S: np.ndarray, catalog, damping=0.65, max_iter=200, stall_window=10,
                 normalize=True, callback=None):
    """Run the message-passing loop on a similarity array; see :func:`cap_cluster`."""
    if not 0.0 <= damping < 1.0:
        raise InvalidParameterError("damping must lie in [0, 1)")
    if max_iter < 1 or stall_window < 1:
        raise InvalidParameterError("max_iter and stall_window must be positive")
    n = S.shape[0]
    diag = np.arange(n)
    if n == 1:
        pos = np.zeros(1, dtype=np.intp)
        return CapResult(positions_to_assignment(catalog, pos), pos,
                         float(S[0, 0]), True, 0, [])
    a = np.zeros((n, n))
    a_bar = np.zeros((n, n))
    stats = None
    prev = None
    stable = 0
    best = None
    log = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        t0 = time.perf_counter()
        b, b_bar, h, raw = _rho_pass(S, catalog, a, a_bar, want_decode=True)
        if stats is not None and damping > 0:
            b = damping * stats[0] + (1 - damping) * b
            b_bar = damping * stats[1] + (1 - damping) * b_bar
            h = damping * stats[2] + (1 - damping) * h
        stats = (b, b_bar, h)
        new_a, new_a_bar, _ = compute_alpha_stats(catalog, b, b_bar, h, with_q=False)
        if normalize:
            # a constant shift of each constraint-to-variable message leaves
            # every argmax unchanged and keeps the statistics bounded
            new_a -= new_a_bar
            new_a_bar = np.zeros_like(new_a_bar)
        if damping > 0:
            new_a = damping * a + (1 - damping) * new_a
            new_a_bar = damping * a_bar + (1 - damping) * new_a_bar
        a, a_bar = new_a, new_a_bar
        elapsed = time.perf_counter() - t0
        if not (np.isfinite(a).all() and np.isfinite(a_bar).all()):
            raise FloatingPointError("non-finite CAP statistics")

        # `raw` is the decode under the statistics this iteration started from
        margin = S[diag, diag] + a[diag, diag] - a_bar[diag, diag]
        fixed = repair(S, catalog, raw, margin=margin)
        objective = float(S[diag, fixed].sum())
        changes = n if prev is None else int(np.count_nonzero(raw != prev))
        log.append({"iteration": it, "objective": objective,
                    "label_changes": changes, "wall_ms": 1000.0 * elapsed})
        if best is None or objective > best[0]:
            best = (objective, fixed)
        if callback is not None:
            callback(it, a, a_bar, raw)
        stable = stable + 1 if prev is not None and changes == 0 else 0
        prev = raw
        if stable >= stall_window:
            converged = True
            break
    if converged:
        positions = repair(S, catalog, prev, margin=margin)
    else:
        positions = best[1]
    objective = float(S[diag, positions].sum())
    return CapResult(positions_to_assignment(catalog, positions), positions, objective,
                     converged, it, log)


def cap_cluster(dataset: Dataset, catalog: Optional[CompositionCatalog] = None, g=SUM,
                gamma=-1.0, damping=0.65, max_iter=200, stall_window=10,
                metric="unsquared", d=2) -> CapResult:
    """Cluster ``dataset`` with compositional affinity propagation.

    Parameters
    ----------
    catalog : CompositionCatalog, optional
        Candidate exemplar sets over the examples; built from ``d`` when
        omitted.
    gamma : float or array
        Preference ``S(i, {i})``; more negative values give fewer exemplars.
    damping : float
        ``new = old * damping + computed * (1 - damping)``.

    Returns
    -------
    CapResult
        Feasible labels over example indices, their objective
        ``sum_i S(i, c_i)`` and per-iteration diagnostics.  If the decode
        never stays fixed for ``stall_window`` iterations, the best-objective
        repaired decode is returned and ``converged`` is False.
    """
    if catalog is None:
        catalog = build_catalog(dataset.n, min(d, dataset.n))
    table = build_similarity(dataset, catalog, g, gamma, metric)
    result = cap_messages(table.values, catalog, damping, max_iter, stall_window)
    assert check_feasible(result.assignment)
    return result


def cap_subset(dataset: Dataset, d=2, g=SUM, gamma=-1.0, subset_size=150, seed=0,
               damping=0.65, max_iter=200, stall_window=10, metric="unsquared",
               subset_indices=None) -> Assignment:
    """CAP on a random subset, then nearest-exemplar assignment for everyone.

    ``subset_indices`` (0-based) overrides the random draw.  Returned labels
    use original 1-based example indices.
    """
    n = dataset.n
    if subset_indices is None:
        if subset_size < 2:
            raise InvalidParameterError("subset_size must be at least 2")
        if subset_size >= n:
            return cap_cluster(dataset, None, g, gamma, damping, max_iter,
                               stall_window, metric, d).assignment
        rng = np.random.default_rng(seed)
        subset = np.sort(rng.choice(n, size=subset_size, replace=False))
    else:
        subset = np.sort(np.asarray(subset_indices, dtype=np.intp))
    gam = np.asarray(gamma, dtype=float)
    sub_gamma = gam if gam.ndim == 0 else gam[subset]
    sub = Dataset(dataset.points[subset])
    res = cap_cluster(sub, None, g, sub_gamma, damping, max_iter, stall_window,
                      metric, d)
    # unique inferred exemplars, in original 0-based indices
    used = sorted(set(res.assignment.labels))
    exemplar_sets = [tuple(int(subset[v - 1]) for v in lab) for lab in used]
    pts = dataset.points
    centers = np.array([g.fold(pts[list(e)][None])[0] for e in exemplar_sets])
    dist = pairwise_distance(pts, centers, metric)
    choice = dist.argmin(axis=1)
    labels = [tuple(v + 1 for v in exemplar_sets[c]) for c in choice]
    for e in exemplar_sets:
        if len(e) == 1:
            labels[e[0]] = (e[0] + 1,)
    return Assignment(tuple(labels), EXEMPLAR)


def time_iterations(S, catalog, iterations=3, damping=0.65):
    """Wall-clock seconds of each message-passing iteration."""
    res = cap_messages(S, catalog, damping=damping, max_iter=iterations,
                       stall_window=iterations + 1)
    return [row["wall_ms"] / 1000.0 for row in res.diagnostics]
