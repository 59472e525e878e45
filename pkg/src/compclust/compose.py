"""Composition functions mapping a set of embeddings to one embedding.

Every kind is the identity on singletons.  Sets with two or more members are
combined by a left fold over the members in ascending index order, which
fixes the result for kinds that are not associative (``bilinear``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import InvalidInputError, InvalidParameterError, UnsupportedGradientError

KINDS = ("sum", "max", "mean", "bilinear")


@dataclass(frozen=True, eq=False)
class CompositionFn:
    kind: str = "sum"
    W1: Optional[np.ndarray] = None
    W2: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown composition kind {self.kind!r}")
        if self.kind == "bilinear":
            if self.W1 is None or self.W2 is None:
                raise InvalidParameterError("bilinear composition needs W1 and W2")
            W1 = np.array(self.W1, dtype=float)
            W2 = np.array(self.W2, dtype=float)
            if W1.ndim != 2 or W1.shape[0] != W1.shape[1] or W1.shape != W2.shape:
                raise InvalidParameterError("W1 and W2 must be equal-sized square matrices")
            W1.setflags(write=False)
            W2.setflags(write=False)
            object.__setattr__(self, "W1", W1)
            object.__setattr__(self, "W2", W2)

    @property
    def differentiable(self) -> bool:
        return self.kind != "max"

    @property
    def dim(self) -> Optional[int]:
        return None if self.W1 is None else self.W1.shape[0]

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "bilinear":
            out["p"] = self.dim
        return out

    # -- batched primitives; stacks have shape (M, j, p) ---------------------

    def _check_dim(self, p):
        if self.kind == "bilinear" and p != self.dim:
            raise InvalidInputError(
                f"bilinear weights are {self.dim}-dimensional, inputs are {p}")

    def _binary(self, xa, xb):
        if self.kind == "sum":
            return xa + xb
        if self.kind == "max":
            return np.maximum(xa, xb)
        # bilinear
        return (xa + xb) @ self.W1.T + (xa * xb) @ self.W2.T

    def fold(self, stack: np.ndarray) -> np.ndarray:
        """Compose each row-set of ``stack`` (shape (M, j, p)) into (M, p)."""
        stack = np.asarray(stack, dtype=float)
        M, j, p = stack.shape
        self._check_dim(p)
        if j == 1:
            return stack[:, 0].copy()
        if self.kind == "mean":
            return stack.mean(axis=1)
        out = stack[:, 0]
        for t in range(1, j):
            out = self._binary(out, stack[:, t])
        return out

    def jacobians(self, stack: np.ndarray) -> np.ndarray:
        """Jacobian of :meth:`fold` w.r.t. every member, shape (M, j, p, p)."""
        if not self.differentiable:
            raise UnsupportedGradientError("elementwise max has no gradient")
        stack = np.asarray(stack, dtype=float)
        M, j, p = stack.shape
        self._check_dim(p)
        eye = np.broadcast_to(np.eye(p), (M, p, p))
        if j == 1:
            return np.array(eye)[:, None]
        if self.kind == "sum":
            return np.array(np.broadcast_to(np.eye(p), (M, j, p, p)))
        if self.kind == "mean":
            return np.array(np.broadcast_to(np.eye(p) / j, (M, j, p, p)))
        # bilinear: y_1 = x_1, y_t = g(y_{t-1}, x_t); go forward collecting
        # local Jacobians, then chain from the back.
        W1, W2 = self.W1, self.W2
        partial_prev = []  # d y_t / d y_{t-1}
        partial_new = []   # d y_t / d x_t
        y = stack[:, 0]
        for t in range(1, j):
            x = stack[:, t]
            partial_prev.append(W1[None] + W2[None] * x[:, None, :])
            partial_new.append(W1[None] + W2[None] * y[:, None, :])
            y = self._binary(y, x)
        out = np.empty((M, j, p, p))
        acc = np.array(eye)  # d y_final / d y_t, starting at t = j
        for t in range(j - 1, 0, -1):
            out[:, t] = acc @ partial_new[t - 1]
            acc = acc @ partial_prev[t - 1]
        out[:, 0] = acc
        return out


SUM = CompositionFn("sum")


def make_composition(kind: str = "sum", weights=None) -> CompositionFn:
    """Build a composition function; ``weights`` is a path or dict for bilinear."""
    if kind != "bilinear":
        return CompositionFn(kind)
    if weights is None:
        raise InvalidParameterError("bilinear composition needs a weights file")
    return load_bilinear(weights)


def random_bilinear(p: int, seed=0, scale: float = 0.5) -> CompositionFn:
    """Bilinear composition with fixed random weights near ``W1 = I``."""
    rng = np.random.default_rng(seed)
    W1 = np.eye(p) + scale * rng.standard_normal((p, p)) / np.sqrt(p)
    W2 = scale * rng.standard_normal((p, p)) / np.sqrt(p)
    return CompositionFn("bilinear", W1, W2)


def load_bilinear(source) -> CompositionFn:
    if isinstance(source, dict):
        params = source
    else:
        params = json.loads(Path(source).read_text(encoding="utf-8"))
    try:
        p = int(params["p"])
        W1 = np.asarray(params["W1"], dtype=float)
        W2 = np.asarray(params["W2"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed bilinear weights: {exc}") from None
    if W1.size != p * p or W2.size != p * p:
        raise InvalidInputError(f"weights must hold {p * p} values each")
    return CompositionFn("bilinear", W1.reshape(p, p), W2.reshape(p, p))


def save_bilinear(g: CompositionFn, path):
    if g.kind != "bilinear":
        raise InvalidParameterError("only bilinear weights can be saved")
    payload = {"p": g.dim, "W1": g.W1.ravel().tolist(), "W2": g.W2.ravel().tolist()}
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def _as_stack(inputs):
    if len(inputs) == 0:
        raise InvalidInputError("cannot compose an empty set")
    try:
        arr = np.array([np.asarray(v, dtype=float).ravel() for v in inputs])
    except ValueError:
        raise InvalidInputError("inputs do not share a dimension") from None
    if arr.ndim != 2:
        raise InvalidInputError("inputs do not share a dimension")
    return arr[None]


def compose(g: CompositionFn, inputs) -> np.ndarray:
    """Compose a sequence of vectors, already in ascending index order."""
    return g.fold(_as_stack(inputs))[0]


def compose_gradient(g: CompositionFn, inputs, which: int) -> np.ndarray:
    """Jacobian of ``compose(g, inputs)`` w.r.t. ``inputs[which]`` (0-based)."""
    stack = _as_stack(inputs)
    if not 0 <= which < stack.shape[1]:
        raise InvalidParameterError(f"member position {which} out of range")
    return g.jacobians(stack)[0, which]


def compose_catalog(g: CompositionFn, units: np.ndarray, catalog) -> np.ndarray:
    """Composed vector for every catalog member, shape (|C|, p)."""
    units = np.asarray(units, dtype=float)
    out = np.empty((len(catalog), units.shape[1]))
    for size in range(1, catalog.max_size + 1):
        rows = np.flatnonzero(catalog.sizes == size)
        if rows.size:
            out[rows] = g.fold(units[catalog.index[rows, :size]])
    return out
