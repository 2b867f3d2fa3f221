from ns3l_lab.mixmatch.objective import mixmatch_objective
from ns3l_lab.mixmatch.pipeline import (
    MixedSet,
    augment,
    fold_mixup_lambda,
    guess_label,
    mixmatch_batch,
    mixup_pair,
    sample_mixup_lambda,
    sharpen,
)

__all__ = [
    'MixedSet',
    'augment',
    'fold_mixup_lambda',
    'guess_label',
    'mixmatch_batch',
    'mixmatch_objective',
    'mixup_pair',
    'sample_mixup_lambda',
    'sharpen',
]
