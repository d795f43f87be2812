"""Dense float64 tensors with a reverse-mode computation record.

Each differentiable operation produces a new :class:`Tensor` whose ``node``
remembers the inputs and a closure mapping the output gradient to input
gradients. :class:`ComputationRecord` linearises the graph reachable from a
scalar seed; :func:`backward` walks it once in reverse.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operands do not conform for the requested operation."""


class NonFiniteError(ArithmeticError):
    """A forward operation produced NaN or Inf."""


class GraphError(RuntimeError):
    """Misuse of the computation record (bad seed, repeated backward)."""


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Node:
    __slots__ = ("op", "inputs", "backward_fn", "consumed")

    def __init__(self, op: str, inputs: tuple["Tensor", ...], backward_fn: BackwardFn):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.consumed = False


class Tensor:
    """An n-dimensional array of doubles that may take part in autodiff."""

    __array_priority__ = 1000  # keep ndarray <op> Tensor routed to Tensor

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite values in tensor {name or ''}".strip())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: Node | None = None
        self.name = name

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- operator sugar (implementations live in ops) ----------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    @property
    def T(self) -> "Tensor":
        from . import ops
        return ops.transpose(self)

    def backward(self) -> dict["Tensor", np.ndarray]:
        return backward(ComputationRecord(self), self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(op: str, data: np.ndarray, inputs: Iterable[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap an op output; attach a graph node when any input needs gradients."""
    # one reduction: any NaN/Inf entry makes the sum non-finite
    if not math.isfinite(float(np.sum(data))):
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"{op}: non-finite output")
    inputs = tuple(inputs)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.node = None
    out.requires_grad = any(t.requires_grad for t in inputs)
    if out.requires_grad:
        out.node = Node(op, inputs, backward_fn)
    return out


class ComputationRecord:
    """Topologically ordered operation nodes reachable from ``output``."""

    def __init__(self, output: Tensor):
        self.output = output
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            if t.node is not None:
                for inp in reversed(t.node.inputs):
                    if inp.requires_grad and id(inp) not in seen:
                        stack.append((inp, False))
        # order is post-order: inputs before consumers
        self.tensors = order

    @property
    def nodes(self) -> list[Node]:
        return [t.node for t in self.tensors if t.node is not None]

    def leaves(self) -> list[Tensor]:
        return [t for t in self.tensors if t.node is None and t.requires_grad]

    def __contains__(self, t: Tensor) -> bool:
        return any(x is t for x in self.tensors)

    def __len__(self) -> int:
        return len(self.nodes)


def backward(record: ComputationRecord, seed: Tensor) -> dict[Tensor, np.ndarray]:
    """Propagate d(seed)/d(leaf) through ``record``; accumulate into ``.grad``.

    Returns a map from every requires-grad leaf to the gradient contributed
    by this call.
    """
    if seed.data.size != 1 or seed.ndim > 1:
        raise GraphError(f"backward seed must be a scalar, got shape {seed.shape}")
    if not seed.requires_grad or seed not in record:
        raise GraphError("seed is not part of the computation record")
    nodes = record.nodes
    if any(n.consumed for n in nodes):
        raise GraphError("backward already ran through this record; rebuild the graph")

    grads: dict[int, np.ndarray] = {id(seed): np.ones_like(seed.data)}
    contributed: dict[Tensor, np.ndarray] = {}
    for t in reversed(record.tensors):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.node is None:
            if t.requires_grad:
                t.grad = g.copy() if t.grad is None else t.grad + g
                contributed[t] = contributed[t] + g if t in contributed else g
            continue
        in_grads = t.node.backward_fn(g)
        for inp, gi in zip(t.node.inputs, in_grads):
            if gi is None or not inp.requires_grad:
                continue
            if gi.shape != inp.shape:
                raise ShapeError(
                    f"{t.node.op}: gradient shape {gi.shape} != input shape {inp.shape}"
                )
            prev = grads.get(id(inp))
            grads[id(inp)] = gi if prev is None else prev + gi
    for n in nodes:
        n.consumed = True
    for g in contributed.values():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")
    return contributed
