"""Clustering scores over label *sets*.

The compositional Rand index counts ordered pairs ``i != j`` on which the
prediction and the truth agree about whether label ``i`` contains label
``j``.  Rand and adjusted Rand treat each distinct set as an opaque
category and use unordered pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .core import CLUSTER, Assignment, InvalidInputError


@dataclass(frozen=True)
class MetricReport:
    cri: float
    rand: float
    ari: float
    n_pairs: int

    def as_dict(self):
        return {"cri": self.cri, "rand": self.rand, "ari": self.ari, "n_pairs": self.n_pairs}


def _label_list(labels):
    if isinstance(labels, Assignment):
        return list(labels.labels)
    return [tuple(sorted(lab)) if not isinstance(lab, (int, np.integer)) else (int(lab),)
            for lab in labels]


def _codes(labels):
    """Integer code per example plus the list of distinct sets."""
    distinct = {}
    codes = np.empty(len(labels), dtype=np.intp)
    for i, lab in enumerate(labels):
        codes[i] = distinct.setdefault(lab, len(distinct))
    return codes, list(distinct)


def _subsumes(labels):
    """Boolean n x n matrix with entry (i, j) true iff labels[i] contains labels[j]."""
    codes, sets = _codes(labels)
    fs = [frozenset(s) for s in sets]
    table = np.array([[a >= b for b in fs] for a in fs], dtype=bool)
    return table[codes[:, None], codes[None, :]]


def cri(c, y) -> float:
    """Compositional Rand index of prediction ``c`` against truth ``y``."""
    c, y = _label_list(c), _label_list(y)
    n = len(c)
    if n != len(y):
        raise InvalidInputError("labelings differ in length")
    if n < 2:
        raise InvalidInputError("need at least two examples")
    agree = _subsumes(c) == _subsumes(y)
    np.fill_diagonal(agree, False)
    return float(agree.sum()) / (n * (n - 1))


def _contingency(c_codes, y_codes):
    table = np.zeros((c_codes.max() + 1, y_codes.max() + 1), dtype=np.int64)
    np.add.at(table, (c_codes, y_codes), 1)
    return table


def rand_and_ari(c, y):
    """Unordered-pair Rand index and its chance-adjusted form."""
    c, y = _label_list(c), _label_list(y)
    n = len(c)
    if n != len(y):
        raise InvalidInputError("labelings differ in length")
    if n < 2:
        raise InvalidInputError("need at least two examples")
    table = _contingency(_codes(c)[0], _codes(y)[0])
    pairs = comb(n, 2)
    both = sum(comb(int(v), 2) for v in table.ravel())
    same_c = sum(comb(int(v), 2) for v in table.sum(axis=1))
    same_y = sum(comb(int(v), 2) for v in table.sum(axis=0))
    rand = (pairs + 2 * both - same_c - same_y) / pairs
    expected = same_c * same_y / pairs
    top = 0.5 * (same_c + same_y)
    if top == expected:
        # both labelings are all-one-cluster or all-singletons
        ari = 1.0
    else:
        ari = (both - expected) / (top - expected)
    return float(rand), float(ari)


def ordered_pair_rand(c, y) -> float:
    """Rand index over ordered pairs with same-category as the relation."""
    c_codes = _codes(_label_list(c))[0]
    y_codes = _codes(_label_list(y))[0]
    n = len(c_codes)
    agree = (c_codes[:, None] == c_codes[None, :]) == (y_codes[:, None] == y_codes[None, :])
    np.fill_diagonal(agree, False)
    return float(agree.sum()) / (n * (n - 1))


def osc_labels(y) -> Assignment:
    """Oracle singleton clustering: each distinct true set becomes a fresh singleton."""
    codes, _ = _codes(_label_list(y))
    return Assignment(tuple((int(v) + 1,) for v in codes), CLUSTER)


def evaluate(c, y) -> MetricReport:
    n = len(_label_list(c))
    rand, ari = rand_and_ari(c, y)
    return MetricReport(cri(c, y), rand, ari, n * (n - 1))


def osc_cri_closed_form(n: int) -> float:
    """OSC score on balanced five-class, pairs-allowed data of size ``n``."""
    return 1.0 - (4.0 * n / 45.0) / (n - 1)
