"""A small dense tensor type with reverse-mode automatic differentiation.

Values are float64 numpy arrays. Each op records its parents and a closure
that maps the output gradient to parent gradients; :func:`backward` walks
the recorded graph once in reverse topological order and then releases it.
"""
import numpy as np

from . import kernels
from .errors import DegenerateVectorError, DimensionError, DomainError, GraphError, NumericError

DISTANCE_EPS = 1e-12
NORM_TOL = 1e-12


class Tensor:
    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None
        self._consumed = False
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_leaf(self):
        return not self._parents

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data.copy()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _wrap(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other, self))

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x, like):
    if isinstance(x, Tensor):
        return x
    if np.isscalar(x):
        return Tensor(np.full(like.shape, float(x)))
    return Tensor(x)


def _node(data, parents, backward_fn, op):
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{op} produced non-finite values")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    out.op = op
    return out


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def backward(loss):
    """Populate ``.grad`` on every leaf reachable from the scalar ``loss``.

    The graph is released afterwards; calling again on the same root raises.
    """
    if loss.data.size != 1:
        raise GraphError(f"backward needs a scalar root, got shape {loss.shape}")
    if loss._consumed:
        raise GraphError("graph already consumed by a previous backward pass")
    if not loss.requires_grad:
        raise GraphError("loss does not depend on any tensor requiring grad")

    order, visited, stack = [], set(), [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg

    for node in order:
        if not node.is_leaf:
            node._parents = ()
            node._backward = None
            node._consumed = True
            node.requires_grad = False


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    A, B = a.data, b.data
    return _node(A @ B, (a, b), lambda g: (g @ B.T, A.T @ g), "matmul")


def add(a, b):
    _same_shape(a, b, "add")
    return _node(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b):
    _same_shape(a, b, "sub")
    return _node(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b):
    _same_shape(a, b, "mul")
    A, B = a.data, b.data
    return _node(A * B, (a, b), lambda g: (g * B, g * A), "mul")


def scale(a, s):
    s = float(s)
    return _node(a.data * s, (a,), lambda g: (g * s,), "scale")


def add_row(a, b):
    """``a[i, :] + b`` for every row ``i`` (bias addition)."""
    if a.data.ndim != 2 or b.shape != (a.shape[1],):
        raise DimensionError(f"add_row: cannot add {b.shape} to rows of {a.shape}")
    return _node(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)), "add_row")


def relu(a):
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def log(a):
    if np.any(a.data <= 0):
        raise DomainError("log of a non-positive value")
    A = a.data
    return _node(np.log(A), (a,), lambda g: (g / A,), "log")


def exp(a):
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,), "exp")


def total(a):
    return _node(np.asarray(a.data.sum()), (a,), lambda g: (np.full(a.shape, float(g)),), "sum")


def mean(a):
    n = a.data.size
    return _node(np.asarray(a.data.sum() / n), (a,), lambda g: (np.full(a.shape, float(g) / n),), "mean")


def sum_squares(a):
    A = a.data
    return _node(np.asarray(np.sum(A * A)), (a,), lambda g: (2.0 * float(g) * A,), "sum_squares")


def pick(a, index):
    """Row-wise gather: ``out[i] = a[i, index[i]]``."""
    index = np.asarray(index, dtype=np.int64)
    if a.data.ndim != 2 or index.shape != (a.shape[0],):
        raise DimensionError(f"pick: index shape {index.shape} does not match {a.shape}")
    rows = np.arange(a.shape[0])

    def grad(g):
        out = np.zeros(a.shape)
        out[rows, index] = g
        return (out,)

    return _node(a.data[rows, index], (a,), grad, "pick")


def row_softmax(a):
    if np.any(np.isnan(a.data)):
        raise DomainError("row_softmax of NaN logits")
    if a.data.ndim != 2:
        raise DimensionError(f"row_softmax expects a matrix, got {a.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    P = e / e.sum(axis=1, keepdims=True)

    def grad(g):
        return (P * (g - (g * P).sum(axis=1, keepdims=True)),)

    return _node(P, (a,), grad, "row_softmax")


def row_l2_distance(Z, C):
    """Smoothed Euclidean distances between rows of ``Z`` and rows of ``C``."""
    if Z.data.ndim != 2 or C.data.ndim != 2 or Z.shape[1] != C.shape[1]:
        raise DimensionError(f"row_l2_distance: {Z.shape} vs {C.shape}")
    D = kernels.pairwise_distance(Z.data, C.data, DISTANCE_EPS)
    return _node(D, (Z, C), lambda g: kernels.pairwise_distance_backward(g, Z.data, C.data, D),
                 "row_l2_distance")


def cosine_sim(u, v):
    _same_shape(u, v, "cosine_sim")
    U, V = u.data, v.data
    nu, nv = np.linalg.norm(U), np.linalg.norm(V)
    if nu <= NORM_TOL or nv <= NORM_TOL:
        raise DegenerateVectorError("cosine_sim of a near-zero vector")
    c = float(U @ V) / (nu * nv)

    def grad(g):
        g = float(g)
        return (g * (V / (nu * nv) - c * U / nu**2),
                g * (U / (nu * nv) - c * V / nv**2))

    return _node(np.asarray(c), (u, v), grad, "cosine_sim")


def cross_class_cosine(Z, labels):
    """Sum of cosine similarities over unordered pairs with different labels.

    Rows with norm at or below ``NORM_TOL`` are left out; the number left
    out is stored on the result as ``skipped``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if Z.data.ndim != 2 or labels.shape != (Z.shape[0],):
        raise DimensionError(f"cross_class_cosine: labels {labels.shape} vs {Z.shape}")
    loss, G, skipped = kernels.repel(Z.data, labels, NORM_TOL)
    out = _node(np.asarray(loss), (Z,), lambda g: (float(g) * G,), "cross_class_cosine")
    out.skipped = skipped
    return out


def grad_check(f, x, h=1e-6):
    """Largest relative gap between analytic and central-difference gradients.

    ``f`` maps a Tensor to a scalar Tensor. The gap per coordinate is
    ``|analytic - numeric| / max(1, |analytic|)``.
    """
    x = np.array(x, dtype=np.float64)
    xt = Tensor(x, requires_grad=True)
    backward(f(xt))
    analytic = xt.grad
    numeric = np.zeros_like(x)
    flat = numeric.reshape(-1)
    for idx in range(x.size):
        xp = x.copy().reshape(-1)
        xm = xp.copy()
        xp[idx] += h
        xm[idx] -= h
        fp = f(Tensor(xp.reshape(x.shape))).item()
        fm = f(Tensor(xm.reshape(x.shape))).item()
        flat[idx] = (fp - fm) / (2 * h)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))
