"""
Registry of differentiable operation rules.

Each rule knows how to validate its operands, compute the forward value and
pull an output adjoint back to its parents. Rules only ever see raw float64
arrays; the tape wraps and bookkeeps.
"""
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ns3l_lab.errors import DomainError, ShapeError

Arrays = Sequence[np.ndarray]
Grads = Tuple[Optional[np.ndarray], ...]


@dataclass(frozen=True)
class OpRule:
    """Forward and vector-Jacobian product for one operation kind."""

    arity: Optional[int]
    forward: Callable[..., np.ndarray]
    vjp: Callable[..., Grads]
    check: Optional[Callable[..., None]] = None


def _shape_error(op: str, inputs: Arrays, detail: str) -> ShapeError:
    shapes = ', '.join(str(a.shape) for a in inputs)
    return ShapeError(f'{op}: {detail} (operand shapes {shapes})')


def _broadcast_shape(op: str, a: np.ndarray, b: np.ndarray) -> Tuple[int, ...]:
    if a.shape == b.shape:
        return a.shape
    if a.ndim != 2 or b.ndim != 2:
        raise _shape_error(op, (a, b), 'shapes differ and are not 2-D row/column broadcastable')
    out = []
    for da, db in zip(a.shape, b.shape):
        if da != db and 1 not in (da, db):
            raise _shape_error(op, (a, b), 'incompatible dimensions')
        out.append(max(da, db))
    return tuple(out)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_binary(op: str, inputs: Arrays, **_: Any) -> None:
    _broadcast_shape(op, inputs[0], inputs[1])


def _check_matrix(op: str, inputs: Arrays, **_: Any) -> None:
    if inputs[0].ndim != 2:
        raise _shape_error(op, inputs, 'expected a 2-D operand')


def _check_matmul(op: str, inputs: Arrays, **_: Any) -> None:
    a, b = inputs
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_error(op, inputs, 'inner dimensions do not match')


def _check_log(op: str, inputs: Arrays, **_: Any) -> None:
    if np.any(inputs[0] <= 0.0):
        raise DomainError('log of non-positive value')


def _check_concat(op: str, inputs: Arrays, **_: Any) -> None:
    if not inputs:
        raise _shape_error(op, inputs, 'needs at least one operand')
    if any(a.ndim != 2 for a in inputs) or len({a.shape[1] for a in inputs}) != 1:
        raise _shape_error(op, inputs, 'operands must be 2-D with equal column counts')


def _check_unflatten(op: str, inputs: Arrays, start: int, stop: int, shape: Tuple[int, ...]) -> None:
    size = inputs[0].size
    if not 0 <= start <= stop <= size or stop - start != int(np.prod(shape)):
        raise _shape_error(op, inputs, f'slice [{start}:{stop}] cannot fill shape {tuple(shape)}')


def _softmax(a: np.ndarray) -> np.ndarray:
    shifted = np.exp(a - a.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def _log_softmax(a: np.ndarray) -> np.ndarray:
    shifted = a - a.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _add_vjp(g, inputs, out):
    return _unbroadcast(g, inputs[0].shape), _unbroadcast(g, inputs[1].shape)


def _sub_vjp(g, inputs, out):
    return _unbroadcast(g, inputs[0].shape), _unbroadcast(-g, inputs[1].shape)


def _mul_vjp(g, inputs, out):
    a, b = inputs
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def _softmax_vjp(g, inputs, out):
    return (out * (g - (g * out).sum(axis=1, keepdims=True)),)


def _log_softmax_vjp(g, inputs, out):
    return (g - np.exp(out) * g.sum(axis=1, keepdims=True),)


def _concat_vjp(g, inputs, out):
    bounds = np.cumsum([a.shape[0] for a in inputs])[:-1]
    return tuple(np.split(g, bounds, axis=0))


def _unflatten_vjp(g, inputs, out, start, stop, shape):
    full = np.zeros(inputs[0].size)
    full[start:stop] = g.ravel()
    return (full.reshape(inputs[0].shape),)


OPS: Dict[str, OpRule] = {
    'matmul': OpRule(2, lambda i: i[0] @ i[1], lambda g, i, o: (g @ i[1].T, i[0].T @ g), _check_matmul),
    'add': OpRule(2, lambda i: i[0] + i[1], _add_vjp, _check_binary),
    'sub': OpRule(2, lambda i: i[0] - i[1], _sub_vjp, _check_binary),
    'mul': OpRule(2, lambda i: i[0] * i[1], _mul_vjp, _check_binary),
    'scale': OpRule(1, lambda i, factor: i[0] * factor, lambda g, i, o, factor: (g * factor,)),
    'leaky_relu': OpRule(
        1,
        lambda i, slope: np.where(i[0] > 0.0, i[0], slope * i[0]),
        lambda g, i, o, slope: (np.where(i[0] > 0.0, g, slope * g),),
    ),
    'exp': OpRule(1, lambda i: np.exp(i[0]), lambda g, i, o: (g * o,)),
    'log': OpRule(1, lambda i: np.log(i[0]), lambda g, i, o: (g / i[0],), _check_log),
    'square': OpRule(1, lambda i: i[0] * i[0], lambda g, i, o: (2.0 * g * i[0],)),
    'clamp_min': OpRule(
        1,
        lambda i, floor: np.maximum(i[0], floor),
        lambda g, i, o, floor: (np.where(i[0] > floor, g, 0.0),),
    ),
    'row_softmax': OpRule(1, lambda i: _softmax(i[0]), _softmax_vjp, _check_matrix),
    'row_log_softmax': OpRule(1, lambda i: _log_softmax(i[0]), _log_softmax_vjp, _check_matrix),
    'row_sum': OpRule(
        1,
        lambda i: i[0].sum(axis=1, keepdims=True),
        lambda g, i, o: (np.broadcast_to(g, i[0].shape).copy(),),
        _check_matrix,
    ),
    'sum': OpRule(1, lambda i: np.array([i[0].sum()]), lambda g, i, o: (np.full(i[0].shape, g[0]),)),
    'mean': OpRule(
        1,
        lambda i: np.array([i[0].mean()]) if i[0].size else np.zeros(1),
        lambda g, i, o: (np.full(i[0].shape, g[0] / max(i[0].size, 1)),),
    ),
    'concat_rows': OpRule(None, lambda i: np.concatenate(list(i), axis=0), _concat_vjp, _check_concat),
    'unflatten': OpRule(
        1,
        lambda i, start, stop, shape: i[0].reshape(-1)[start:stop].reshape(shape),
        _unflatten_vjp,
        _check_unflatten,
    ),
    'stop_gradient': OpRule(1, lambda i: i[0].copy(), lambda g, i, o: (None,)),
}
