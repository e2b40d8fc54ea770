"""Dense-matrix reverse-mode differentiation with the optimizers used for training.

Everything is float64 and two-dimensional: scalars are (1, 1) arrays, vectors
are single rows.  The op set is deliberately small -- matmul, broadcast
add/mul, sigmoid/tanh/exp, sums and means, row gather/concat -- which is
enough for GRU sequence models and kernel two-sample objectives.  Gradients
are accumulated by :meth:`Tensor.backward` into the ``grad`` buffers of leaf
tensors created with ``requires_grad=True``.
"""

import json

import numpy as np

from .errors import NumericError, ShapeError, StateError


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got ndim={arr.ndim}")
    return arr


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum `grad` over the axes that were broadcast up from `shape`."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and out.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


class Tensor:
    """A 2-D float64 array that records the operations applied to it.

    ``requires_grad=True`` marks a leaf parameter: its ``grad`` buffer is
    allocated with the same shape and zeroed, and ``backward`` accumulates
    into it.  Derived tensors carry the recording; their gradients are
    transient.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "_used")

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None):
        self.data = _as_array(data)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad = np.zeros_like(self.data) if (requires_grad and not _parents) else None
        self._parents = _parents
        self._vjp = _vjp
        self._used = False

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    # -- graph walk ---------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        ``self`` must be scalar-shaped.  Leaves not reachable from this node
        are untouched (their buffers stay whatever they were, zero after a
        ``zero_grad``).
        """
        if self.data.shape != (1, 1):
            raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
        if self._vjp is None:
            raise StateError("backward called on a node with no recorded forward pass")
        if self._used:
            raise StateError("backward already ran through this node")
        self._used = True

        order = self._toposort()
        grads: dict[int, np.ndarray] = {id(self): np.ones((1, 1))}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None or node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if not parent.requires_grad or pg is None:
                    continue
                if parent._vjp is None:
                    # leaf parameter: accumulate persistently
                    parent.grad += pg
                else:
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg

    def _toposort(self):
        order, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        order.reverse()
        return order

    def detach(self) -> "Tensor":
        """A constant copy of this tensor, cut off from the recording."""
        return Tensor(self.data.copy())

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("division only by python scalars")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=True)


# -- primitive ops -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data
    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return Tensor(out_data, _parents=(a, b), _vjp=vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data
    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return Tensor(out_data, _parents=(a, b), _vjp=vjp)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape}")
    out_data = a.data @ b.data
    def vjp(g):
        return g @ b.data.T, a.data.T @ g
    return Tensor(out_data, _parents=(a, b), _vjp=vjp)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.T.copy(), _parents=(a,), _vjp=lambda g: (g.T,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return Tensor(s, _parents=(a,), _vjp=lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return Tensor(t, _parents=(a,), _vjp=lambda g: (g * (1.0 - t * t),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return Tensor(e, _parents=(a,), _vjp=lambda g: (g * e,))


def tsum(a, axis=None, keepdims=True) -> Tensor:
    """Sum of all entries (axis=None) or along one axis, keeping 2-D shape."""
    a = as_tensor(a)
    if axis is None:
        out_data = a.data.sum().reshape(1, 1)
    else:
        out_data = a.data.sum(axis=axis, keepdims=True)
    def vjp(g):
        return (np.broadcast_to(g, a.shape).copy() if g.shape != a.shape else g,)
    return Tensor(out_data, _parents=(a,), _vjp=vjp)


def tmean(a) -> Tensor:
    a = as_tensor(a)
    return mul(tsum(a), 1.0 / a.data.size)


def gather_rows(a, idx) -> Tensor:
    """Select rows by index array; backward scatter-adds into the source."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    out_data = a.data[idx]
    def vjp(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        return (buf,)
    return Tensor(out_data, _parents=(a,), _vjp=vjp)


def concat_rows(tensors) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in ts], axis=0)
    offsets = np.cumsum([0] + [t.shape[0] for t in ts])
    def vjp(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(ts)))
    return Tensor(out_data, _parents=tuple(ts), _vjp=vjp)


def slice_rows(a, start, stop) -> Tensor:
    a = as_tensor(a)
    out_data = a.data[start:stop].copy()
    def vjp(g):
        buf = np.zeros_like(a.data)
        buf[start:stop] = g
        return (buf,)
    return Tensor(out_data, _parents=(a,), _vjp=vjp)


def sq_frobenius(a) -> Tensor:
    """Sum of squared entries."""
    return tsum(mul(a, a))


# -- parameter containers ----------------------------------------------------


class ParamStore:
    """Ordered, named collection of leaf parameters.

    Every parameter owns a same-shaped gradient buffer (``Tensor.grad``);
    optimizers attach their own state keyed by the same names.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise StateError(f"parameter {name!r} already registered")
        t = parameter(value)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad[...] = 0.0

    def n_entries(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, t in self._params.items():
            if k not in state:
                raise ShapeError(f"missing parameter {k!r} in state dict")
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ShapeError(f"shape mismatch for {k!r}: {arr.shape} vs {t.data.shape}")
            t.data[...] = arr

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self._params.values()])

    def unflatten(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_entries():
            raise ShapeError("flat vector has wrong length")
        i = 0
        for t in self._params.values():
            n = t.data.size
            t.data[...] = vec[i:i + n].reshape(t.data.shape)
            i += n


def _check_grads(store: ParamStore) -> None:
    for name, t in store.items():
        if not np.isfinite(t.grad).all():
            raise NumericError(f"non-finite gradient for parameter {name!r}; update rejected")


class RMSProp:
    """Root-mean-square propagation step, optionally in the ascent direction.

    v <- decay*v + (1-decay)*g^2 ;  p <- p -/+ lr * g / (sqrt(v) + eps)
    """

    def __init__(self, store: ParamStore, lr: float, decay: float = 0.9,
                 eps: float = 1e-8, ascent: bool = False):
        if lr <= 0:
            raise ShapeError("lr must be positive")
        self.store = store
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.sign = 1.0 if ascent else -1.0
        self.v = {k: np.zeros_like(t.data) for k, t in store.items()}

    def step(self) -> None:
        _check_grads(self.store)
        for name, t in self.store.items():
            g = t.grad
            v = self.v[name]
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            t.data += self.sign * self.lr * g / (np.sqrt(v) + self.eps)


class Adam(object):
    """Adam with bias correction; descent direction only."""

    def __init__(self, store: ParamStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ShapeError("lr must be positive")
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in store.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in store.items()}

    def step(self) -> None:
        _check_grads(self.store)
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in self.store.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def clip_parameters(store: ParamStore, c: float, names=None) -> None:
    """Clamp every entry of the selected parameters into [-c, c], in place."""
    if c <= 0:
        raise ShapeError("clip bound must be positive")
    for name, t in store.items():
        if names is not None and name not in names:
            continue
        np.clip(t.data, -c, c, out=t.data)


# -- checkpoint container ----------------------------------------------------

CHECKPOINT_FORMAT = "kcpd-checkpoint-1"
_META_KEY = "__checkpoint_meta__"


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named float64 tensors plus a JSON metadata block to an ``.npz``.

    The container is a standard NumPy zip archive; the reserved entry
    ``__checkpoint_meta__`` holds UTF-8 JSON with a ``format`` version tag.
    Round-tripping is bit-exact because ``.npy`` stores raw IEEE-754 bytes.
    """
    record = dict(meta or {})
    record["format"] = CHECKPOINT_FORMAT
    blob = np.frombuffer(json.dumps(record, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    payload = {}
    for k, v in arrays.items():
        if k == _META_KEY:
            raise ShapeError(f"{_META_KEY} is reserved")
        payload[k] = np.asarray(v)
    payload[_META_KEY] = blob
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Read back (arrays, meta) written by :func:`save_checkpoint`."""
    with np.load(path) as npz:
        if _META_KEY not in npz:
            raise StateError(f"{path}: not a checkpoint file")
        meta = json.loads(bytes(npz[_META_KEY]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise StateError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        arrays = {k: npz[k] for k in npz.files if k != _META_KEY}
    meta.pop("format", None)
    return arrays, meta
