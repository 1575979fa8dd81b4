"""Minimal dense float64 tensor with reverse-mode automatic differentiation.

Nodes form a tape: each op records its parents and a closure producing the
parent gradients.  A graph is consumed by a single ``backward`` pass; running
the forward computation again builds a fresh graph.

Two implementation rules keep results exactly reproducible:

* matrix products go through ``np.einsum``, whose per-element reduction does
  not depend on how many other rows are present (BLAS gemm kernels do), and
* reductions that must be invariant under reordering of the reduced axis
  (attention softmax denominators, the attention-weighted combination) sum
  their operands in sorted order.
"""

from __future__ import annotations

import itertools

import numpy as np


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


class NumericError(FloatingPointError):
    """A value or gradient became NaN or infinite."""


class GraphError(RuntimeError):
    """Backward was run over an already-consumed graph."""


_ids = itertools.count()


def _as_values(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


def _check_finite(values: np.ndarray, op: str) -> None:
    if not np.isfinite(values).all():
        raise NumericError(f"non-finite values produced by {op}")


def _sorted_sum(a: np.ndarray, axis: int) -> np.ndarray:
    # Pairwise summation over sorted values: bitwise invariant under any
    # permutation of the reduced axis.
    return np.sum(np.sort(a, axis=axis), axis=axis)


class Tensor:
    """Dense float64 array node in a computation graph."""

    __slots__ = ("values", "_grad", "_parents", "_grad_fn", "_consumed", "node_id")

    def __init__(self, data, _parents=(), _grad_fn=None, _op="leaf"):
        self.values = _as_values(data)
        _check_finite(self.values, _op)
        self._grad = None
        self._parents = _parents
        self._grad_fn = _grad_fn
        self._consumed = False
        self.node_id = next(_ids)

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.values)
        return self._grad

    def zero_grad(self) -> None:
        self._grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self._grad is None:
            self._grad = np.zeros_like(self.values)
        self._grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.values.shape}, id={self.node_id})"

    # -- elementwise ------------------------------------------------------

    def exp(self) -> "Tensor":
        out_vals = np.exp(self.values)
        out = Tensor(out_vals, (self,), lambda g: (g * out_vals,), "exp")
        return out

    def log(self) -> "Tensor":
        bad = self.values <= 0.0
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DomainError(
                f"log of non-positive value {self.values[idx]!r} at index {idx}"
            )
        x = self.values
        return Tensor(np.log(x), (self,), lambda g: (g / x,), "log")

    def sigmoid(self) -> "Tensor":
        out_vals = 1.0 / (1.0 + np.exp(-self.values))
        return Tensor(
            out_vals, (self,), lambda g: (g * out_vals * (1.0 - out_vals),), "sigmoid"
        )

    def tanh(self) -> "Tensor":
        out_vals = np.tanh(self.values)
        return Tensor(
            out_vals, (self,), lambda g: (g * (1.0 - out_vals * out_vals),), "tanh"
        )

    def relu(self) -> "Tensor":
        mask = self.values > 0.0
        return Tensor(
            np.where(mask, self.values, 0.0), (self,), lambda g: (g * mask,), "relu"
        )

    def neg(self) -> "Tensor":
        return Tensor(-self.values, (self,), lambda g: (-g,), "neg")

    def add_const(self, c) -> "Tensor":
        # c is a constant scalar or array broadcastable to self.shape.
        c = np.asarray(c, dtype=np.float64)
        out_vals = self.values + c
        if out_vals.shape != self.values.shape:
            raise ShapeError(f"constant {c.shape} does not broadcast into {self.shape}")
        return Tensor(out_vals, (self,), lambda g: (g,), "add_const")

    def mul_const(self, c) -> "Tensor":
        c = np.asarray(c, dtype=np.float64)
        out_vals = self.values * c
        if out_vals.shape != self.values.shape:
            raise ShapeError(f"constant {c.shape} does not broadcast into {self.shape}")
        return Tensor(out_vals, (self,), lambda g: (g * c,), "mul_const")

    # -- binary -----------------------------------------------------------

    def _require_same_shape(self, other: "Tensor", op: str) -> None:
        if self.values.shape != other.values.shape:
            raise ShapeError(f"{op}: shapes {self.shape} and {other.shape} differ")

    def __add__(self, other: "Tensor") -> "Tensor":
        self._require_same_shape(other, "add")
        return Tensor(
            self.values + other.values, (self, other), lambda g: (g, g), "add"
        )

    def __sub__(self, other: "Tensor") -> "Tensor":
        self._require_same_shape(other, "sub")
        return Tensor(
            self.values - other.values, (self, other), lambda g: (g, -g), "sub"
        )

    def __mul__(self, other: "Tensor") -> "Tensor":
        self._require_same_shape(other, "mul")
        a, b = self.values, other.values
        return Tensor(a * b, (self, other), lambda g: (g * b, g * a), "mul")

    def add_rowvec(self, vec: "Tensor") -> "Tensor":
        """(r, c) + (c,) broadcast over rows; used for bias terms."""
        if self.values.ndim != 2 or vec.values.shape != (self.values.shape[1],):
            raise ShapeError(f"add_rowvec: {self.shape} + {vec.shape}")
        return Tensor(
            self.values + vec.values[None, :],
            (self, vec),
            lambda g: (g, g.sum(axis=0)),
            "add_rowvec",
        )

    def add_colvec(self, vec: "Tensor") -> "Tensor":
        """(r, c) + (r,) broadcast over columns."""
        if self.values.ndim != 2 or vec.values.shape != (self.values.shape[0],):
            raise ShapeError(f"add_colvec: {self.shape} + {vec.shape}")
        return Tensor(
            self.values + vec.values[:, None],
            (self, vec),
            lambda g: (g, g.sum(axis=1)),
            "add_colvec",
        )

    def matmul(self, other: "Tensor") -> "Tensor":
        a, b = self.values, other.values
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
        out_vals = np.einsum("mk,kn->mn", a, b)

        def grad_fn(g):
            return (np.einsum("mn,kn->mk", g, b), np.einsum("mk,mn->kn", a, g))

        return Tensor(out_vals, (self, other), grad_fn, "matmul")

    def scores(self, keys: "Tensor") -> "Tensor":
        """Row-pair dot products: (m, k) x (n, k) -> (m, n) = self . keysᵀ.

        Each output element is reduced independently over the shared feature
        axis, so permuting key rows permutes output columns bitwise.
        """
        a, b = self.values, keys.values
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
            raise ShapeError(f"scores: {a.shape} vs {b.shape}")
        out_vals = np.sum(a[:, None, :] * b[None, :, :], axis=2)

        def grad_fn(g):
            return (np.einsum("mn,nk->mk", g, b), np.einsum("mn,mk->nk", g, a))

        return Tensor(out_vals, (self, keys), grad_fn, "scores")

    def attend(self, values: "Tensor") -> "Tensor":
        """Weighted combination (m, n) @ (n, k) with an order-canonical sum.

        Products are sorted before summation, so the result is bitwise
        invariant under a simultaneous permutation of weight columns and
        value rows (set invariance of attention).
        """
        a, v = self.values, values.values
        if a.ndim != 2 or v.ndim != 2 or a.shape[1] != v.shape[0]:
            raise ShapeError(f"attend: {a.shape} @ {v.shape}")
        out_vals = _sorted_sum(a[:, :, None] * v[None, :, :], axis=1)

        def grad_fn(g):
            return (np.einsum("mk,nk->mn", g, v), np.einsum("mn,mk->nk", a, g))

        return Tensor(out_vals, (self, values), grad_fn, "attend")

    # -- row ops ----------------------------------------------------------

    def softmax_rows(self, temperature=1.0) -> "Tensor":
        """Shift-stable row softmax of values / T with T a positive constant.

        T is a scalar or per-row vector and receives no gradient.
        """
        x = self.values
        if x.ndim != 2:
            raise ShapeError(f"softmax_rows needs a matrix, got {self.shape}")
        t = np.asarray(temperature, dtype=np.float64)
        if t.ndim == 0:
            t = np.full(x.shape[0], float(t))
        if t.shape != (x.shape[0],):
            raise ShapeError(f"temperature shape {t.shape} for {x.shape[0]} rows")
        if np.any(t <= 0.0):
            raise DomainError("softmax temperature must be positive")
        scaled = x / t[:, None]
        shifted = scaled - scaled.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        out_vals = e / _sorted_sum(e, axis=1)[:, None]

        def grad_fn(g):
            inner = np.sum(g * out_vals, axis=1, keepdims=True)
            return (out_vals * (g - inner) / t[:, None],)

        return Tensor(out_vals, (self,), grad_fn, "softmax_rows")

    def l2_normalize_rows(self) -> "Tensor":
        x = self.values
        if x.ndim != 2:
            raise ShapeError(f"l2_normalize_rows needs a matrix, got {self.shape}")
        norms = np.sqrt(np.sum(x * x, axis=1))
        denom = np.where(norms < 1e-12, norms + 1e-12, norms)
        out_vals = x / denom[:, None]

        def grad_fn(g):
            inner = np.sum(g * out_vals, axis=1, keepdims=True)
            return ((g - out_vals * inner) / denom[:, None],)

        return Tensor(out_vals, (self,), grad_fn, "l2_normalize_rows")

    def row_sum(self) -> "Tensor":
        if self.values.ndim != 2:
            raise ShapeError(f"row_sum needs a matrix, got {self.shape}")
        cols = self.values.shape[1]
        return Tensor(
            self.values.sum(axis=1),
            (self,),
            lambda g: (np.repeat(g[:, None], cols, axis=1),),
            "row_sum",
        )

    def pick_per_row(self, indices) -> "Tensor":
        """Select one column per row: out[i] = values[i, indices[i]]."""
        x = self.values
        idx = np.asarray(indices, dtype=np.int64)
        if x.ndim != 2 or idx.shape != (x.shape[0],):
            raise ShapeError(f"pick_per_row: {x.shape} with indices {idx.shape}")
        if idx.min(initial=0) < 0 or idx.max(initial=-1) >= x.shape[1]:
            raise IndexError(f"pick_per_row index out of range for {x.shape[1]} columns")
        rows = np.arange(x.shape[0])

        def grad_fn(g):
            gx = np.zeros_like(x)
            np.add.at(gx, (rows, idx), g)
            return (gx,)

        return Tensor(x[rows, idx], (self,), grad_fn, "pick_per_row")

    def take_columns(self, columns) -> "Tensor":
        cols = np.asarray(columns, dtype=np.int64)
        x = self.values
        if x.ndim != 2 or cols.ndim != 1:
            raise ShapeError(f"take_columns: {x.shape} with columns {cols.shape}")
        if cols.min(initial=0) < 0 or cols.max(initial=-1) >= x.shape[1]:
            raise IndexError(f"take_columns index out of range for {x.shape[1]} columns")

        def grad_fn(g):
            gx = np.zeros_like(x)
            np.add.at(gx, (slice(None), cols), g)
            return (gx,)

        return Tensor(x[:, cols], (self,), grad_fn, "take_columns")

    # -- reductions -------------------------------------------------------

    def sum(self) -> "Tensor":
        shape = self.values.shape
        return Tensor(
            self.values.sum(), (self,), lambda g: (np.full(shape, g),), "sum"
        )

    def mean(self) -> "Tensor":
        shape = self.values.shape
        n = self.values.size
        return Tensor(
            self.values.mean(), (self,), lambda g: (np.full(shape, g / n),), "mean"
        )

    # -- autodiff ---------------------------------------------------------

    def backward(self) -> None:
        """Populate gradients of every node reachable from this scalar loss."""
        if self.values.shape != ():
            raise ShapeError(f"backward requires a scalar loss, got shape {self.shape}")
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            if node._parents and node._consumed:
                raise GraphError(
                    "backward over a consumed graph; re-run the forward pass"
                )
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self._accumulate(np.asarray(1.0))
        for node in reversed(order):
            if node._grad_fn is None:
                continue
            node._consumed = True
            grads = node._grad_fn(node._grad)
            for parent, g in zip(node._parents, grads):
                parent._accumulate(np.asarray(g))


def backward(loss: Tensor) -> None:
    loss.backward()


_UNARY_OPS = {
    "exp": Tensor.exp,
    "log": Tensor.log,
    "sigmoid": Tensor.sigmoid,
    "tanh": Tensor.tanh,
    "relu": Tensor.relu,
    "neg": Tensor.neg,
}


def elementwise(op: str, x: Tensor, c: float | None = None) -> Tensor:
    """Dispatch an elementwise op by tag; add-const/mul-const take ``c``."""
    tag = op.replace("_", "-")
    if tag in ("add-const", "mul-const"):
        if c is None:
            raise ValueError(f"{op} requires the constant argument")
        return x.add_const(c) if tag == "add-const" else x.mul_const(c)
    key = tag.replace("-", "_")
    if key not in _UNARY_OPS:
        raise ValueError(f"unknown elementwise op {op!r}")
    return _UNARY_OPS[key](x)
