"""
Eager reverse-mode differentiation over dense float64 tensors.

A ``Tape`` records every operation as it is evaluated. Node ids are dense
integers handed out in creation order, so a parent always has a smaller id
than its child and the reverse pass is a single descending sweep.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, Sequence, Tuple, Union

import numpy as np

from ns3l_lab.diffcore.ops import OPS
from ns3l_lab.errors import DomainError, NonFiniteError, ShapeError

LOG = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float], float]


class Tensor:
    """Immutable dense float64 array. Scalars are stored with shape ``(1,)``."""

    __slots__ = ('_values',)

    def __init__(self, values: ArrayLike):
        array = np.array(values, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1)
        if not np.all(np.isfinite(array)):
            raise NonFiniteError('tensor contains non-finite values')
        array.flags.writeable = False
        self._values = array

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._values.shape

    @property
    def size(self) -> int:
        return int(self._values.size)

    def item(self) -> float:
        if self._values.size != 1:
            raise ShapeError(f'item() needs a single element, got shape {self.shape}')
        return float(self._values.reshape(-1)[0])

    def __repr__(self) -> str:
        return f'Tensor(shape={self.shape})'


@dataclass(frozen=True)
class Node:
    """One recorded operation; ``requires_grad`` is false for constants and stop-gradient outputs."""

    op: str
    parents: Tuple[int, ...]
    attrs: Dict[str, Any]
    value: Tensor
    requires_grad: bool


@dataclass
class Tape:
    """Append-only record of evaluated operations."""

    nodes: list = field(default_factory=list)
    bindings: Dict[Hashable, Tuple[Any, Any]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    def _append(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def leaf(self, value: Union[ArrayLike, Tensor]) -> int:
        """Records a differentiable input."""
        tensor = value if isinstance(value, Tensor) else Tensor(value)
        return self._append(Node('leaf', (), {}, tensor, True))

    def constant(self, value: Union[ArrayLike, Tensor]) -> int:
        """Records an input that never receives gradient."""
        tensor = value if isinstance(value, Tensor) else Tensor(value)
        return self._append(Node('constant', (), {}, tensor, False))

    def as_node(self, value: Union[int, ArrayLike, Tensor]) -> int:
        """Passes node ids through and records anything else as a constant."""
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            return int(value)
        return self.constant(value)

    def value(self, node: int) -> Tensor:
        """Forward value of ``node``, computed when it was recorded."""
        return self.nodes[node].value

    def record(self, op: str, parents: Sequence[int], **attrs: Any) -> int:
        """
        Evaluates a registered op on existing nodes and appends the result.

        Args:
            op: Name in ``OPS``.
            parents: Operand node ids, all already on this tape.
            **attrs: Extra arguments forwarded to the op rule.

        Returns:
            int: Id of the new node.

        Raises:
            DomainError: Unknown op, foreign node or an input outside the op domain.
            ShapeError: Wrong operand count or incompatible shapes.
            NonFiniteError: The forward value is not finite.
        """
        rule = OPS.get(op)
        if rule is None:
            raise DomainError(f'unknown operation {op!r}')
        if rule.arity is not None and len(parents) != rule.arity:
            raise ShapeError(f'{op}: expected {rule.arity} operands, got {len(parents)}')
        for parent in parents:
            if not 0 <= parent < len(self.nodes):
                raise DomainError(f'{op}: node {parent} is not on this tape')
        inputs = [self.nodes[p].value.values for p in parents]
        if rule.check is not None:
            rule.check(op, inputs, **attrs)
        with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
            out = rule.forward(inputs, **attrs)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f'{op} produced non-finite values')
        requires_grad = op != 'stop_gradient' and any(self.nodes[p].requires_grad for p in parents)
        return self._append(Node(op, tuple(parents), attrs, Tensor(out), requires_grad))

    def matmul(self, a: int, b: int) -> int:
        return self.record('matmul', (a, b))

    def add(self, a: int, b: int) -> int:
        return self.record('add', (a, b))

    def sub(self, a: int, b: int) -> int:
        return self.record('sub', (a, b))

    def mul(self, a: int, b: int) -> int:
        return self.record('mul', (a, b))

    def scale(self, a: int, factor: float) -> int:
        return self.record('scale', (a,), factor=float(factor))

    def leaky_relu(self, a: int, slope: float = 0.1) -> int:
        return self.record('leaky_relu', (a,), slope=float(slope))

    def exp(self, a: int) -> int:
        return self.record('exp', (a,))

    def log(self, a: int) -> int:
        return self.record('log', (a,))

    def square(self, a: int) -> int:
        return self.record('square', (a,))

    def clamp_min(self, a: int, floor: float) -> int:
        return self.record('clamp_min', (a,), floor=float(floor))

    def row_softmax(self, a: int) -> int:
        return self.record('row_softmax', (a,))

    def row_log_softmax(self, a: int) -> int:
        return self.record('row_log_softmax', (a,))

    def row_sum(self, a: int) -> int:
        return self.record('row_sum', (a,))

    def sum(self, a: int) -> int:
        return self.record('sum', (a,))

    def mean(self, a: int) -> int:
        return self.record('mean', (a,))

    def concat_rows(self, *parts: int) -> int:
        return self.record('concat_rows', parts)

    def unflatten(self, a: int, start: int, shape: Tuple[int, ...]) -> int:
        stop = start + int(np.prod(shape))
        return self.record('unflatten', (a,), start=int(start), stop=stop, shape=tuple(shape))

    def stop_gradient(self, a: int) -> int:
        return self.record('stop_gradient', (a,))


def backward(tape: Tape, root: int) -> Dict[int, Tensor]:
    """
    Propagates the gradient of a scalar node back to every node of the tape.

    Args:
        tape: The tape holding the computation.
        root: Id of the scalar node to differentiate.

    Returns:
        Dict[int, Tensor]: Gradient of ``root`` w.r.t. every node, zero-filled for
        nodes that do not influence it (including stop-gradient nodes).
    """
    if not 0 <= root < len(tape.nodes):
        raise DomainError(f'node {root} is not on this tape')
    root_value = tape.value(root)
    if root_value.shape != (1,):
        raise ShapeError(f'backward needs a scalar root, got shape {root_value.shape}')

    adjoints: Dict[int, np.ndarray] = {root: np.ones(1)}
    for node_id in range(root, -1, -1):
        grad = adjoints.get(node_id)
        if grad is None:
            continue
        node = tape.nodes[node_id]
        if not node.parents or not node.requires_grad:
            continue
        inputs = [tape.nodes[p].value.values for p in node.parents]
        parent_grads = OPS[node.op].vjp(grad, inputs, node.value.values, **node.attrs)
        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent_grad is None or not tape.nodes[parent].requires_grad:
                continue
            adjoints[parent] = adjoints[parent] + parent_grad if parent in adjoints else parent_grad

    grads: Dict[int, Tensor] = {}
    for node_id, node in enumerate(tape.nodes):
        grad = adjoints.get(node_id)
        if grad is None or node.op == 'stop_gradient':
            grad = np.zeros(node.value.shape)
        grads[node_id] = Tensor(grad)
    return grads


def gradient_of(tape: Tape, root: int, wrt: int) -> np.ndarray:
    """Shortcut returning only the gradient w.r.t. one node."""
    return backward(tape, root)[wrt].values
