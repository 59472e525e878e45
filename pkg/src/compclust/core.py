"""Shared domain types: datasets, composition catalogs, similarity tables.

Indices are 1-based everywhere a user can see them (label sets, catalog
members, files).  The numpy arrays hanging off a catalog are 0-based.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

NEG_INF = -np.inf

EXEMPLAR = "exemplar"
CLUSTER = "cluster"

Label = tuple  # sorted tuple of 1-based ints


class CompClustError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(CompClustError, ValueError):
    pass


class InvalidInputError(CompClustError, ValueError):
    pass


class UnsupportedGradientError(CompClustError, NotImplementedError):
    pass


class BudgetExceededError(CompClustError):
    """An exhaustive search was asked to run beyond its hard cap."""


class ParseError(CompClustError, ValueError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


def _normalize_label(label) -> Label:
    if isinstance(label, (int, np.integer)):
        label = (label,)
    out = tuple(sorted(int(v) for v in label))
    if not out:
        raise InvalidInputError("label sets must be non-empty")
    if len(set(out)) != len(out):
        raise InvalidInputError(f"duplicate index in label set {out}")
    return out


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError("points must form a non-empty n x p array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = tuple(_normalize_label(lab) for lab in self.labels)
            if len(labels) != pts.shape[0]:
                raise InvalidInputError(
                    f"{len(labels)} label sets for {pts.shape[0]} points")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.points, other.points)
                and self.labels == other.labels)

    __hash__ = None


@dataclass(frozen=True)
class Assignment:
    """One label set per example.

    ``label_space`` is ``"exemplar"`` when the indices name examples (CAP)
    and ``"cluster"`` when they name singleton clusters (CKM, GCR, ground
    truth).
    """
    labels: tuple
    label_space: str = CLUSTER

    def __post_init__(self):
        if self.label_space not in (EXEMPLAR, CLUSTER):
            raise InvalidParameterError(f"unknown label space {self.label_space!r}")
        object.__setattr__(self, "labels",
                           tuple(_normalize_label(lab) for lab in self.labels))
        if any(v < 1 for lab in self.labels for v in lab):
            raise InvalidInputError("label indices are 1-based")

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __getitem__(self, i):
        return self.labels[i]

    def as_lists(self):
        return [list(lab) for lab in self.labels]


class CompositionCatalog:
    """All index subsets of ``[base]`` with sizes ``1..max_size``.

    Members are ordered by size, then lexicographically, so the singletons
    come first and ``members[i] == (i + 1,)`` for ``i < base``.

    Attributes
    ----------
    index : ndarray of shape (|C|, max_size)
        0-based member indices, padded with -1.
    sizes : ndarray of shape (|C|,)
    phi : list of ndarray
        ``phi[k]`` holds the catalog positions of members containing unit
        ``k`` (0-based unit).  The complement is produced by :meth:`phi_bar`
        on demand since storing it costs ``base * |C|``.
    """

    def __init__(self, base: int, max_size: int, members: Sequence[Sequence[int]]):
        self.base = int(base)
        self.max_size = int(max_size)
        self.members = tuple(tuple(m) for m in members)
        m = len(self.members)
        self.index = np.full((m, self.max_size), -1, dtype=np.intp)
        self.sizes = np.empty(m, dtype=np.intp)
        for pos, mem in enumerate(self.members):
            self.index[pos, :len(mem)] = np.asarray(mem) - 1
            self.sizes[pos] = len(mem)
        self.index.setflags(write=False)
        self.sizes.setflags(write=False)
        self._position = {mem: pos for pos, mem in enumerate(self.members)}
        if len(self._position) != m:
            raise InvalidInputError("catalog members must be unique")
        for i in range(1, self.base + 1):
            if (i,) not in self._position:
                raise InvalidInputError(f"catalog is missing singleton {{{i}}}")
        self.phi = [[] for _ in range(self.base)]
        for pos, mem in enumerate(self.members):
            for v in mem:
                self.phi[v - 1].append(pos)
        self.phi = [np.asarray(lst, dtype=np.intp) for lst in self.phi]

    def __len__(self):
        return len(self.members)

    def __repr__(self):
        return f"CompositionCatalog(base={self.base}, max_size={self.max_size}, size={len(self)})"

    def position(self, member) -> int:
        """Catalog position of a 1-based member (any iterable of ints)."""
        return self._position[tuple(sorted(member))]

    def phi_bar(self, k: int) -> np.ndarray:
        """Positions of members *not* containing 0-based unit ``k``."""
        mask = np.ones(len(self), dtype=bool)
        mask[self.phi[k]] = False
        return np.flatnonzero(mask)

    def membership(self) -> np.ndarray:
        """Dense boolean (|C|, base) incidence matrix."""
        out = np.zeros((len(self), self.base), dtype=bool)
        rows = np.repeat(np.arange(len(self)), self.max_size)
        cols = self.index.ravel()
        keep = cols >= 0
        out[rows[keep], cols[keep]] = True
        return out

    def subsets_of(self, allowed) -> np.ndarray:
        """Boolean mask of members whose units all lie in ``allowed`` (0-based)."""
        ok = np.zeros(self.base + 1, dtype=bool)
        ok[np.asarray(list(allowed), dtype=np.intp)] = True
        ok[-1] = True  # the -1 pad
        return ok[self.index].all(axis=1)

    def restricted(self, max_size: int) -> "CompositionCatalog":
        return build_catalog(self.base, max_size)


def build_catalog(base: int, d: int) -> CompositionCatalog:
    """Catalog of every subset of ``[base]`` with size between 1 and ``d``."""
    if isinstance(base, bool) or isinstance(d, bool):
        raise InvalidParameterError("base and d must be integers")
    base, d = int(base), int(d)
    if base < 1:
        raise InvalidParameterError("base must be positive")
    if d < 1 or d > base:
        raise InvalidParameterError(f"need 1 <= d <= base, got d={d}, base={base}")
    members = []
    for size in range(1, d + 1):
        members.extend(combinations(range(1, base + 1), size))
    return CompositionCatalog(base, d, members)


def catalog_size(base: int, d: int) -> int:
    return sum(math.comb(base, j) for j in range(1, d + 1))


@dataclass(frozen=True)
class SimilarityTable:
    values: np.ndarray
    gamma: np.ndarray
    metric: str = "unsquared"

    @property
    def n(self):
        return self.values.shape[0]

    def objective(self, positions) -> float:
        """Sum of S(i, c_i) for catalog positions ``positions``."""
        positions = np.asarray(positions, dtype=np.intp)
        return float(self.values[np.arange(self.n), positions].sum())


def _gamma_vector(gamma, n):
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        return np.full(n, float(g))
    if g.shape != (n,):
        raise InvalidInputError(f"gamma must be a scalar or have length {n}")
    return g.copy()


def pairwise_distance(x, y, metric="unsquared"):
    """Distances between the rows of ``x`` and the rows of ``y``."""
    if metric not in ("unsquared", "squared"):
        raise InvalidParameterError(f"unknown metric {metric!r}")
    sq = (np.einsum("ij,ij->i", x, x)[:, None]
          + np.einsum("ij,ij->i", y, y)[None, :]
          - 2.0 * (x @ y.T))
    np.maximum(sq, 0.0, out=sq)
    if metric == "squared":
        return sq
    return np.sqrt(sq, out=sq)


def build_similarity(dataset: Dataset, catalog: CompositionCatalog, g,
                     gamma, metric: str = "unsquared",
                     block: int = 1 << 22) -> SimilarityTable:
    """Negative distance from every example to every composed exemplar.

    ``S(i, {i})`` is the preference ``gamma`` and ``S(i, c)`` is ``-inf``
    whenever ``c`` contains ``i`` without being ``{i}``.
    """
    from .compose import compose_catalog

    n = dataset.n
    if catalog.base != n:
        raise InvalidInputError(f"catalog over {catalog.base} units for {n} examples")
    gam = _gamma_vector(gamma, n)
    centers = compose_catalog(g, dataset.points, catalog)
    if centers.shape[1] != dataset.p:
        raise InvalidInputError("composition output dimension differs from the data")
    m = len(catalog)
    S = np.empty((n, m))
    step = max(1, block // max(m, 1))
    x = dataset.points
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        S[lo:hi] = -pairwise_distance(x[lo:hi], centers, metric)
    for t in range(catalog.max_size):
        rows = catalog.index[:, t]
        keep = np.flatnonzero((rows >= 0) & (catalog.sizes > 1))
        S[rows[keep], keep] = NEG_INF
    S[np.arange(n), np.arange(n)] = gam
    S.setflags(write=False)
    return SimilarityTable(S, gam, metric)


def check_feasible(assignment) -> bool:
    """True iff every example referenced by some label designates itself."""
    labels = assignment.labels if isinstance(assignment, Assignment) else assignment
    labels = [tuple(lab) for lab in labels]
    n = len(labels)
    for lab in labels:
        for k in lab:
            if k < 1 or k > n or labels[k - 1] != (k,):
                return False
    return True


def read_dataset(csv_path, labels_path=None) -> Dataset:
    """Read the CSV point file and, when given, its JSON label sidecar."""
    csv_path = Path(csv_path)
    rows = []
    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty dataset file", line=1) from None
        p = len(header)
        for expected, name in enumerate(header):
            if name.strip() != f"dim{expected}":
                raise ParseError(f"bad header name {name!r}", line=1, field=expected)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p:
                raise ParseError(f"expected {p} fields, found {len(row)}", line=lineno)
            vals = []
            for col, txt in enumerate(row):
                try:
                    vals.append(float(txt))
                except ValueError:
                    raise ParseError(f"not a number: {txt!r}", line=lineno,
                                     field=col) from None
            rows.append(vals)
    if not rows:
        raise ParseError("dataset has no rows", line=2)
    labels = None
    if labels_path is not None and Path(labels_path).exists():
        try:
            raw = json.loads(Path(labels_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        if not isinstance(raw, list) or len(raw) != len(rows):
            raise ParseError(f"labels must be a list of {len(rows)} arrays")
        for pos, lab in enumerate(raw):
            if (not isinstance(lab, list) or not lab
                    or not all(isinstance(v, int) and v >= 1 for v in lab)
                    or lab != sorted(set(lab))):
                raise ParseError("label must be a sorted non-empty list of "
                                 "distinct positive ints", field=pos)
        labels = tuple(tuple(lab) for lab in raw)
    return Dataset(np.array(rows, dtype=float), labels)


def write_dataset(dataset: Dataset, csv_path, labels_path=None):
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"dim{j}" for j in range(dataset.p)])
        for row in dataset.points:
            writer.writerow([format(float(v), ".17g") for v in row])
    if labels_path is not None and dataset.labels is not None:
        Path(labels_path).write_text(json.dumps([list(lab) for lab in dataset.labels]),
                                     encoding="utf-8")
