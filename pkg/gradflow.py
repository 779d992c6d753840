"""
Minimal reverse-mode automatic differentiation over float64 numpy arrays
A Tape records every operation as a Node with its vector-Jacobian product;
backward walks the tape in reverse creation order exactly once
"""
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import NonFiniteInput, NonScalarLoss, ShapeMismatch

VJP = Callable[[np.ndarray], Tuple[np.ndarray, ...]]


class Node:
    """One recorded value on a tape"""
    __slots__ = ("id", "value", "op", "parents", "vjp", "name", "is_param", "tape")

    def __init__(self, tape: "Tape", node_id: int, value: np.ndarray, op: str,
                 parents: Tuple["Node", ...], vjp: Optional[VJP],
                 name: Optional[str] = None, is_param: bool = False):
        self.tape = tape
        self.id = node_id
        self.value = value
        self.op = op
        self.parents = parents
        self.vjp = vjp
        self.name = name
        self.is_param = is_param

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def parent_ids(self) -> Tuple[int, ...]:
        return tuple(p.id for p in self.parents)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Node {self.id} {self.op}{label} shape={self.shape}>"


class Tape:
    """Append-only list of nodes in topological order"""

    def __init__(self, check_finite: bool = True):
        self.nodes: List[Node] = []
        self.check_finite = check_finite

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, value: np.ndarray, op: str, parents: Tuple[Node, ...],
              vjp: Optional[VJP], name: Optional[str] = None, is_param: bool = False) -> Node:
        for parent in parents:
            if parent.tape is not self:
                raise ValueError(f"Node {parent!r} belongs to another tape")
        if self.check_finite and not np.isfinite(value).all():
            raise NonFiniteInput(f"Non-finite value produced by '{op}'")
        node = Node(self, len(self.nodes), value, op, parents, vjp, name, is_param)
        self.nodes.append(node)
        return node

    def param(self, name: str, value: np.ndarray) -> Node:
        """Leaf that receives a gradient"""
        array = np.array(value, dtype=np.float64)
        if not np.isfinite(array).all():
            raise NonFiniteInput(f"Parameter '{name}' is not finite")
        return self._push(array, "param", (), None, name=name, is_param=True)

    def const(self, value: np.ndarray, name: Optional[str] = None) -> Node:
        """Leaf that never receives a gradient"""
        array = np.asarray(value, dtype=np.float64)
        if not np.isfinite(array).all():
            raise NonFiniteInput(f"Constant '{name or 'const'}' is not finite")
        return self._push(array, "const", (), None, name=name)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Node, b: Node, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeMismatch(f"{op}: cannot broadcast {a.shape} with {b.shape}") from e


def _swap(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def vjp(g):
        return unbroadcast(g @ _swap(bv), av.shape), unbroadcast(_swap(av) @ g, bv.shape)

    return a.tape._push(av @ bv, "matmul", (a, b), vjp)


def add(a: Node, b: Node) -> Node:
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return a.tape._push(a.value + b.value, "add", (a, b),
                        lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a: Node, b: Node) -> Node:
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return a.tape._push(a.value - b.value, "sub", (a, b),
                        lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a: Node, b: Node) -> Node:
    _broadcast_shape(a, b, "mul")
    av, bv = a.value, b.value
    return a.tape._push(av * bv, "mul", (a, b),
                        lambda g: (unbroadcast(g * bv, av.shape), unbroadcast(g * av, bv.shape)))


def scale(a: Node, c: float) -> Node:
    c = float(c)
    return a.tape._push(a.value * c, "scale", (a,), lambda g: (g * c,))


def relu(a: Node) -> Node:
    # subgradient 0 at 0
    mask = a.value > 0
    return a.tape._push(np.where(mask, a.value, 0.0), "relu", (a,), lambda g: (g * mask,))


def abs_(a: Node) -> Node:
    # subgradient 0 at 0
    sign = np.sign(a.value)
    return a.tape._push(np.abs(a.value), "abs", (a,), lambda g: (g * sign,))


def softmax_lastdim(a: Node) -> Node:
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    s = exp / exp.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return a.tape._push(s, "softmax", (a,), vjp)


def layer_norm(a: Node, gamma: Node, beta: Node, eps: float = 1e-5) -> Node:
    """Normalize over the last axis with population variance, then scale and shift"""
    d = a.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatch(f"layer_norm: gamma/beta must be ({d},), got {gamma.shape}/{beta.shape}")
    x = a.value
    centered = x - x.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    gv = gamma.value

    def vjp(g):
        dxhat = g * gv
        dx = inv_std * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        reduce_axes = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return a.tape._push(xhat * gv + beta.value, "layer_norm", (a, gamma, beta), vjp)


def concat(nodes: Sequence[Node], axis: int = -1) -> Node:
    if not nodes:
        raise ShapeMismatch("concat: nothing to concatenate")
    values = [n.value for n in nodes]
    try:
        out = np.concatenate(values, axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"concat: {[v.shape for v in values]}") from e
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return nodes[0].tape._push(out, "concat", tuple(nodes), vjp)


def slice_axis(a: Node, axis: int, start: int, stop: int) -> Node:
    size = a.shape[axis]
    if not 0 <= start < stop <= size:
        raise ShapeMismatch(f"slice [{start}:{stop}] out of range for axis of size {size}")
    index = [slice(None)] * a.value.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        full[index] = g
        return (full,)

    return a.tape._push(a.value[index], "slice", (a,), vjp)


def reshape(a: Node, shape: Tuple[int, ...]) -> Node:
    original = a.shape
    try:
        out = a.value.reshape(shape)
    except ValueError as e:
        raise ShapeMismatch(f"reshape: {original} -> {shape}") from e
    return a.tape._push(out, "reshape", (a,), lambda g: (g.reshape(original),))


def transpose_last(a: Node) -> Node:
    if a.value.ndim < 2:
        raise ShapeMismatch("transpose needs at least two axes")
    return a.tape._push(_swap(a.value), "transpose", (a,), lambda g: (_swap(g),))


def sum_(a: Node) -> Node:
    shape = a.shape
    return a.tape._push(np.array(a.value.sum()), "sum", (a,), lambda g: (np.full(shape, float(g)),))


def mean(a: Node) -> Node:
    shape, n = a.shape, a.value.size
    return a.tape._push(np.array(a.value.mean()), "mean", (a,),
                        lambda g: (np.full(shape, float(g) / n),))


def backward(tape: Tape, loss: Node) -> Dict[Node, np.ndarray]:
    """
    Reverse sweep from a scalar loss
    Args:
        tape: tape the loss was recorded on
        loss: scalar node
    Returns:
        gradient for every parameter leaf on the tape (zeros when unreached)
    """
    if loss.value.size != 1:
        raise NonScalarLoss(f"Loss must be scalar, got shape {loss.shape}")
    grads: List[Optional[np.ndarray]] = [None] * len(tape.nodes)
    grads[loss.id] = np.ones_like(loss.value)

    for node in reversed(tape.nodes[:loss.id + 1]):
        g = grads[node.id]
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if grads[parent.id] is None:
                grads[parent.id] = pg
            else:
                grads[parent.id] = grads[parent.id] + pg

    return {
        node: grads[node.id] if grads[node.id] is not None else np.zeros_like(node.value)
        for node in tape.nodes if node.is_param
    }


ArrayOrDict = Union[np.ndarray, Dict[str, np.ndarray]]


def grad_check(f: Callable, x: ArrayOrDict, eps: float = 1e-5) -> float:
    """
    Compare reverse-mode gradients with central finite differences
    Args:
        f: builds a scalar node from (tape, node) or (tape, {name: node})
        x: point to check, one array or a dict of named arrays
        eps: finite-difference step
    Returns:
        max relative error with denominator max(|a|, |b|, 1e-8)
    """
    named = isinstance(x, dict)
    point = {k: np.array(v, dtype=np.float64) for k, v in (x.items() if named else [("x", x)])}

    def evaluate(values):
        tape = Tape(check_finite=False)
        nodes = {k: tape.param(k, v) for k, v in values.items()}
        out = f(tape, nodes if named else nodes["x"])
        return tape, nodes, out

    tape, nodes, out = evaluate(point)
    analytic = backward(tape, out)

    worst = 0.0
    for key, base in point.items():
        numeric = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            shifted = dict(point)
            plus, minus = base.copy(), base.copy()
            plus[idx] += eps
            minus[idx] -= eps
            shifted[key] = plus
            f_plus = float(evaluate(shifted)[2].value)
            shifted[key] = minus
            f_minus = float(evaluate(shifted)[2].value)
            numeric[idx] = (f_plus - f_minus) / (2.0 * eps)
        a = analytic[nodes[key]]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - numeric) / denom)))
    return worst
