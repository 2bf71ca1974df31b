"""Dense float64 tensors with tape-based reverse-mode differentiation.

Covers exactly what the recurrent cells, attention heads and losses need:
1-D vectors and 2-D matrices, a handful of pointwise functions, matrix-vector
products, concat/slice, and a numerically safe softmax. Gradients are
accumulated by replaying the tape in exact reverse creation order, which keeps
every run bitwise reproducible on a single thread.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = [
    "Tape",
    "Tensor",
    "DimensionError",
    "DomainError",
    "ContractError",
    "matvec",
    "add",
    "sub",
    "mul",
    "neg",
    "sigmoid",
    "tanh",
    "log",
    "exp",
    "elementwise",
    "softmax",
    "concat",
    "concat_all",
    "dot",
    "scale",
    "smul",
    "clamp_min",
    "take_row",
    "backward",
]


class DimensionError(ValueError):
    """Operand shapes do not fit the operation."""


class DomainError(ValueError):
    """Input outside the mathematical domain of the function."""


class ContractError(ValueError):
    """Caller violated an operation's precondition."""


_LOCAL = threading.local()


def _tape_stack():
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of executed primitives.

    Appending preserves topological order, so the adjoint pass simply walks
    the entries back to front. One tape per thread; tapes are not shareable.
    """

    __slots__ = ("_entries", "_next_id")

    def __init__(self):
        self._entries = []
        self._next_id = 0

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self, "tape exited out of order"
        return False

    def __len__(self):
        return len(self._entries)

    def _register(self):
        nid = self._next_id
        self._next_id = nid + 1
        return nid

    def _record(self, out, adjoint):
        self._entries.append((out, adjoint))

    def run_backward(self, loss):
        loss.grad = np.ones(1, dtype=np.float64)
        for out, adjoint in reversed(self._entries):
            g = out.grad
            if g is not None:
                adjoint(g)


class Tensor:
    """A float64 array plus an optional gradient buffer.

    `grad` stays None until the tensor receives a contribution during a
    backward pass; `node_id` links the value into the tape that was active
    when it was created (None outside any tape).
    """

    __slots__ = ("data", "grad", "tape", "node_id")

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.ndim > 2:
            raise DimensionError(f"tensors are 1-D or 2-D, got shape {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        tape = _active_tape()
        self.tape = tape
        self.node_id = tape._register() if tape is not None else None

    @classmethod
    def _wrap(cls, arr, tape):
        t = object.__new__(cls)
        t.data = arr
        t.grad = None
        t.tape = tape
        t.node_id = tape._register() if tape is not None else None
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar, shape is {self.shape}")
        return float(self.data[0] if self.data.ndim == 1 else self.data[0, 0])

    def sum(self) -> "Tensor":
        return _sum(self)

    def slice(self, lo: int, hi: int) -> "Tensor":
        return _slice(self, lo, hi)

    def row(self, i: int) -> "Tensor":
        return take_row(self, i)

    def detached(self) -> "Tensor":
        """Copy of the value with no tape attachment."""
        t = object.__new__(Tensor)
        t.data = self.data.copy()
        t.grad = None
        t.tape = None
        t.node_id = None
        return t

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, data={self.data!r})"


def _accum(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _join(*tensors):
    """Active tape, sanity-checked against the operands' tapes."""
    tape = _active_tape()
    if tape is not None:
        for t in tensors:
            if t.tape is not None and t.tape is not tape:
                raise ContractError("operands belong to a different computation record")
    return tape


def _require_vector(t, name, op):
    if t.data.ndim != 1:
        raise DimensionError(f"{op}: {name} must be 1-D, got shape {t.shape}")


def _binary_shapes(a, b, op):
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def matvec(m: Tensor, v: Tensor) -> Tensor:
    """out[i] = sum_j m[i, j] * v[j]."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[1] != v.data.shape[0]:
        raise DimensionError(f"matvec: matrix {m.shape} incompatible with vector {v.shape}")
    tape = _join(m, v)
    out = Tensor._wrap(m.data @ v.data, tape)
    if tape is not None:
        def adjoint(g, m=m, v=v):
            _accum(m, np.outer(g, v.data))
            _accum(v, m.data.T @ g)
        tape._record(out, adjoint)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")
    tape = _join(a, b)
    out = Tensor._wrap(a.data + b.data, tape)
    if tape is not None:
        def adjoint(g, a=a, b=b):
            _accum(a, g)
            _accum(b, g)
        tape._record(out, adjoint)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")
    tape = _join(a, b)
    out = Tensor._wrap(a.data - b.data, tape)
    if tape is not None:
        def adjoint(g, a=a, b=b):
            _accum(a, g)
            _accum(b, -g)
        tape._record(out, adjoint)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    tape = _join(a, b)
    out = Tensor._wrap(a.data * b.data, tape)
    if tape is not None:
        def adjoint(g, a=a, b=b):
            _accum(a, g * b.data)
            _accum(b, g * a.data)
        tape._record(out, adjoint)
    return out


def neg(a: Tensor) -> Tensor:
    tape = _join(a)
    out = Tensor._wrap(-a.data, tape)
    if tape is not None:
        def adjoint(g, a=a):
            _accum(a, -g)
        tape._record(out, adjoint)
    return out


def sigmoid(a: Tensor) -> Tensor:
    tape = _join(a)
    with np.errstate(over="ignore"):
        out = Tensor._wrap(1.0 / (1.0 + np.exp(-a.data)), tape)
    if tape is not None:
        def adjoint(g, a=a, s=out.data):
            _accum(a, g * s * (1.0 - s))
        tape._record(out, adjoint)
    return out


def tanh(a: Tensor) -> Tensor:
    tape = _join(a)
    out = Tensor._wrap(np.tanh(a.data), tape)
    if tape is not None:
        def adjoint(g, a=a, t=out.data):
            _accum(a, g * (1.0 - t * t))
        tape._record(out, adjoint)
    return out


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise DomainError("log: input has non-positive entries")
    tape = _join(a)
    out = Tensor._wrap(np.log(a.data), tape)
    if tape is not None:
        def adjoint(g, a=a):
            _accum(a, g / a.data)
        tape._record(out, adjoint)
    return out


def exp(a: Tensor) -> Tensor:
    tape = _join(a)
    out = Tensor._wrap(np.exp(a.data), tape)
    if tape is not None:
        def adjoint(g, a=a, e=out.data):
            _accum(a, g * e)
        tape._record(out, adjoint)
    return out


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "log": log, "exp": exp, "neg": neg}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(kind: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatch a pointwise operation by name."""
    if kind in _BINARY:
        if b is None:
            raise ContractError(f"elementwise '{kind}' needs two operands")
        return _BINARY[kind](a, b)
    if kind in _UNARY:
        if b is not None:
            raise ContractError(f"elementwise '{kind}' takes one operand")
        return _UNARY[kind](a)
    raise ContractError(f"unknown elementwise kind '{kind}'")


def softmax(z: Tensor) -> Tensor:
    """Probability vector exp(z - max z) / sum; max subtraction for overflow safety."""
    _require_vector(z, "z", "softmax")
    if z.data.shape[0] == 0:
        raise DimensionError("softmax: empty input")
    tape = _join(z)
    shifted = z.data - z.data.max()
    e = np.exp(shifted)
    y = e / e.sum()
    out = Tensor._wrap(y, tape)
    if tape is not None:
        def adjoint(g, z=z, y=y):
            _accum(z, y * (g - float(g @ y)))
        tape._record(out, adjoint)
    return out


def concat_all(parts) -> Tensor:
    """Concatenate 1-D tensors; adjoints route back to each segment."""
    parts = list(parts)
    if not parts:
        raise DimensionError("concat: no operands")
    for p in parts:
        _require_vector(p, "operand", "concat")
    tape = _join(*parts)
    out = Tensor._wrap(np.concatenate([p.data for p in parts]), tape)
    if tape is not None:
        def adjoint(g, parts=parts):
            off = 0
            for p in parts:
                n = p.data.shape[0]
                _accum(p, g[off:off + n])
                off += n
        tape._record(out, adjoint)
    return out


def concat(a: Tensor, b: Tensor) -> Tensor:
    return concat_all((a, b))


def _slice(a: Tensor, lo: int, hi: int) -> Tensor:
    _require_vector(a, "a", "slice")
    n = a.data.shape[0]
    if not (0 <= lo <= hi <= n):
        raise IndexError(f"slice [{lo}:{hi}] out of range for length {n}")
    tape = _join(a)
    out = Tensor._wrap(a.data[lo:hi].copy(), tape)
    if tape is not None:
        def adjoint(g, a=a, lo=lo, hi=hi):
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[lo:hi] += g
        tape._record(out, adjoint)
    return out


def take_row(m: Tensor, i: int) -> Tensor:
    """Row i of a matrix as a vector; the adjoint lands on that row only."""
    if m.data.ndim != 2:
        raise DimensionError(f"take_row: need a matrix, got shape {m.shape}")
    if not (0 <= i < m.data.shape[0]):
        raise IndexError(f"row {i} out of range for {m.data.shape[0]} rows")
    tape = _join(m)
    out = Tensor._wrap(m.data[i].copy(), tape)
    if tape is not None:
        def adjoint(g, m=m, i=i):
            if m.grad is None:
                m.grad = np.zeros_like(m.data)
            m.grad[i] += g
        tape._record(out, adjoint)
    return out


def _sum(a: Tensor) -> Tensor:
    tape = _join(a)
    out = Tensor._wrap(np.array([a.data.sum()]), tape)
    if tape is not None:
        def adjoint(g, a=a):
            _accum(a, np.full_like(a.data, g[0]))
        tape._record(out, adjoint)
    return out


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Scalar product of two equal-length vectors, as a length-1 tensor."""
    _require_vector(a, "a", "dot")
    _binary_shapes(a, b, "dot")
    tape = _join(a, b)
    out = Tensor._wrap(np.array([a.data @ b.data]), tape)
    if tape is not None:
        def adjoint(g, a=a, b=b):
            _accum(a, g[0] * b.data)
            _accum(b, g[0] * a.data)
        tape._record(out, adjoint)
    return out


def scale(v: Tensor, s: Tensor) -> Tensor:
    """Vector times a length-1 tensor, differentiable in both."""
    _require_vector(v, "v", "scale")
    if s.data.shape != (1,):
        raise DimensionError(f"scale: scalar operand must have shape (1,), got {s.shape}")
    tape = _join(v, s)
    out = Tensor._wrap(v.data * s.data[0], tape)
    if tape is not None:
        def adjoint(g, v=v, s=s):
            _accum(v, g * s.data[0])
            _accum(s, np.array([g @ v.data]))
        tape._record(out, adjoint)
    return out


def smul(a: Tensor, c: float) -> Tensor:
    """Multiply by a plain constant (not differentiated w.r.t. c)."""
    tape = _join(a)
    out = Tensor._wrap(a.data * c, tape)
    if tape is not None:
        def adjoint(g, a=a, c=c):
            _accum(a, g * c)
        tape._record(out, adjoint)
    return out


def clamp_min(a: Tensor, floor: float) -> Tensor:
    """max(a, floor) pointwise; gradient is zero in the clamped region."""
    tape = _join(a)
    out = Tensor._wrap(np.maximum(a.data, floor), tape)
    if tape is not None:
        def adjoint(g, a=a, floor=floor):
            _accum(a, g * (a.data > floor))
        tape._record(out, adjoint)
    return out


def backward(loss: Tensor) -> None:
    """Populate grads of everything reachable from `loss` on its tape."""
    if loss.data.shape != (1,):
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.tape is None:
        raise ContractError("backward: no computation record (tensor created outside a Tape)")
    loss.tape.run_backward(loss)
