from ns3l_lab.classifier.checkpoint import load_checkpoint, save_checkpoint
from ns3l_lab.classifier.mlp import (
    BoundParams,
    Params,
    bind_flat,
    bind_params,
    flatten_params,
    gradients_for,
    init_params,
    param_count,
    predict_logits,
    predict_probs,
    probabilities,
    unflatten_params,
)

__all__ = [
    'BoundParams',
    'Params',
    'bind_flat',
    'bind_params',
    'flatten_params',
    'gradients_for',
    'init_params',
    'load_checkpoint',
    'param_count',
    'predict_logits',
    'predict_probs',
    'probabilities',
    'save_checkpoint',
    'unflatten_params',
]
