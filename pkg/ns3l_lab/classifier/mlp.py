"""
Fully connected leaky-ReLU classifier evaluated on a tape.

Parameters are immutable; a training step produces a new ``Params``. To get
gradients the parameters are bound to a tape as leaves (``bind_params``), or
sliced out of one flat leaf (``bind_flat``) when every weight has to vary
through a single vector, as the finite-difference checks do.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from ns3l_lab.diffcore import Tape, Tensor
from ns3l_lab.errors import ShapeError
from ns3l_lab.models.config import MLPSpec

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class Params:
    """Immutable MLP weights; ``weights[i]`` is fan_in x fan_out and ``biases[i]`` is 1 x fan_out."""

    spec: MLPSpec
    weights: Tuple[Tensor, ...]
    biases: Tuple[Tensor, ...]

    def __post_init__(self):
        widths = self.spec.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ShapeError(f'expected {len(widths) - 1} layers, got {len(self.weights)}')
        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if weight.shape != (widths[layer], widths[layer + 1]) or bias.shape != (1, widths[layer + 1]):
                raise ShapeError(f'layer {layer}: weight {weight.shape} / bias {bias.shape} do not match {widths}')

    def arrays(self) -> Tuple[np.ndarray, ...]:
        """Weights and biases interleaved: W0, b0, W1, b1..."""
        out = []
        for weight, bias in zip(self.weights, self.biases):
            out.extend((weight.values, bias.values))
        return tuple(out)

    @classmethod
    def from_arrays(cls, spec: MLPSpec, arrays: Sequence[np.ndarray]) -> 'Params':
        """Inverse of ``arrays()``; shapes are validated against ``spec``."""
        return cls(
            spec=spec,
            weights=tuple(Tensor(a) for a in arrays[0::2]),
            biases=tuple(Tensor(a) for a in arrays[1::2]),
        )


@dataclass(frozen=True)
class BoundParams:
    """Tape node ids of the parameters, so losses can be differentiated with respect to them."""

    spec: MLPSpec
    weight_ids: Tuple[int, ...]
    bias_ids: Tuple[int, ...]

    def node_ids(self) -> Tuple[int, ...]:
        out = []
        for weight_id, bias_id in zip(self.weight_ids, self.bias_ids):
            out.extend((weight_id, bias_id))
        return tuple(out)


ParamsLike = Union[Params, BoundParams]


def init_params(spec: MLPSpec) -> Params:
    """Glorot-uniform weights and zero biases, deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out))))
        biases.append(Tensor(np.zeros((1, fan_out))))
    return Params(spec=spec, weights=tuple(weights), biases=tuple(biases))


def param_count(spec: MLPSpec) -> int:
    widths = spec.layer_widths
    return sum(fan_in * fan_out + fan_out for fan_in, fan_out in zip(widths[:-1], widths[1:]))


def flatten_params(params: Params) -> np.ndarray:
    """One vector in ``arrays()`` order."""
    return np.concatenate([a.reshape(-1) for a in params.arrays()])


def _layer_shapes(spec: MLPSpec):
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        yield (fan_in, fan_out)
        yield (1, fan_out)


def unflatten_params(flat: np.ndarray, spec: MLPSpec) -> Params:
    """
    Inverse of ``flatten_params``.

    Args:
        flat: Vector of exactly ``param_count(spec)`` entries.
        spec: Layer widths to cut ``flat`` into.

    Raises:
        ShapeError: ``flat`` has the wrong length.
    """
    flat = np.asarray(flat, dtype=np.float64).reshape(-1)
    if flat.size != param_count(spec):
        raise ShapeError(f'flat vector has {flat.size} entries, spec needs {param_count(spec)}')
    arrays, start = [], 0
    for shape in _layer_shapes(spec):
        stop = start + int(np.prod(shape))
        arrays.append(flat[start:stop].reshape(shape))
        start = stop
    return Params.from_arrays(spec, arrays)


def bind_params(tape: Tape, params: Params) -> BoundParams:
    """Records the parameters as leaves, once per tape."""
    key = ('params', id(params))
    cached = tape.bindings.get(key)
    if cached is not None and cached[0] is params:
        return cached[1]
    weight_ids = tuple(tape.leaf(weight) for weight in params.weights)
    bias_ids = tuple(tape.leaf(bias) for bias in params.biases)
    bound = BoundParams(spec=params.spec, weight_ids=weight_ids, bias_ids=bias_ids)
    tape.bindings[key] = (params, bound)
    return bound


def bind_flat(tape: Tape, flat_node: int, spec: MLPSpec) -> BoundParams:
    """Slices the parameters out of one flat tape node."""
    ids, start = [], 0
    for shape in _layer_shapes(spec):
        ids.append(tape.unflatten(flat_node, start, shape))
        start += int(np.prod(shape))
    return BoundParams(spec=spec, weight_ids=tuple(ids[0::2]), bias_ids=tuple(ids[1::2]))


def _bound(tape: Tape, params: ParamsLike) -> BoundParams:
    return bind_params(tape, params) if isinstance(params, Params) else params


def predict_logits(params: ParamsLike, X: Union[int, np.ndarray, Tensor], tape: Tape) -> int:
    """
    Records the forward pass on ``tape``.

    Args:
        params: Parameters, bound to the tape on first use, or already bound ids.
        X: n x d inputs as an array or an existing node.
        tape: Tape to record on.

    Returns:
        int: Node of n x K logits; leaky ReLU on every layer but the last.
    """
    bound = _bound(tape, params)
    hidden = tape.as_node(X)
    width = tape.value(hidden).shape
    if len(width) != 2 or width[1] != bound.spec.input_dim:
        raise ShapeError(f'dimension mismatch: inputs {width}, model expects {bound.spec.input_dim} features')
    last = len(bound.weight_ids) - 1
    for layer, (weight_id, bias_id) in enumerate(zip(bound.weight_ids, bound.bias_ids)):
        hidden = tape.add(tape.matmul(hidden, weight_id), bias_id)
        if layer < last:
            hidden = tape.leaky_relu(hidden, bound.spec.slope)
    return hidden


def predict_probs(params: ParamsLike, X: Union[int, np.ndarray, Tensor], tape: Tape) -> int:
    """Class probabilities: row softmax of the logits."""
    return tape.row_softmax(predict_logits(params, X, tape))


def probabilities(params: Params, X: np.ndarray) -> np.ndarray:
    """Evaluates ``predict_probs`` on a throwaway tape."""
    tape = Tape()
    return tape.value(predict_probs(params, X, tape)).values


def gradients_for(bound: BoundParams, grads: Dict[int, Tensor]) -> Tuple[np.ndarray, ...]:
    """Collects parameter gradients in ``Params.arrays()`` order."""
    return tuple(grads[node_id].values for node_id in bound.node_ids())
