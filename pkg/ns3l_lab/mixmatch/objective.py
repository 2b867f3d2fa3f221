"""MixMatch loss, optionally extended with the NS3L term on the generated labels."""
import logging

import numpy as np

from ns3l_lab.classifier.mlp import Params, predict_probs
from ns3l_lab.diffcore import Tape
from ns3l_lab.errors import DomainError
from ns3l_lab.losses.basic import brier_loss, ns3l_loss, supervised_ce
from ns3l_lab.losses.objective import ObjectiveResult
from ns3l_lab.mixmatch.pipeline import MixedSet
from ns3l_lab.models.config import MixMatchConfig
from ns3l_lab.negselect.masks import threshold_mask


LOG = logging.getLogger(__name__)


def mixmatch_objective(
    tape: Tape,
    mixed_x: MixedSet,
    mixed_u: MixedSet,
    params: Params,
    config: MixMatchConfig,
    warmup: float = 1.0,
    ns3l_warmup: bool = True,
) -> ObjectiveResult:
    """
    ``CE(X') + w * lambda3 * Brier(U') + w * lambda1 * NS3L(X' + U')``.

    The NS3L mask comes from the generated (mixed) labels, while the loss is
    evaluated on the model probabilities of the same rows.
    """
    if not 0.0 <= warmup <= 1.0:
        raise DomainError(f'warmup multiplier must lie in [0, 1], got {warmup}')
    mu_x = predict_probs(params, mixed_x.x, tape)
    mu_u = predict_probs(params, mixed_u.x, tape)
    supervised = supervised_ce(tape, mu_x, mixed_x.y)
    brier = brier_loss(tape, mu_u, mixed_u.y)
    total = tape.add(supervised, tape.scale(brier, config.lambda3 * warmup))
    result = ObjectiveResult(
        loss=total,
        terms={'supervised': tape.value(supervised).item(), 'brier': tape.value(brier).item()},
    )
    if config.ns3l_T is not None and config.ns3l_lambda1 > 0.0:
        result.mask = threshold_mask(np.concatenate([mixed_x.y, mixed_u.y], axis=0), config.ns3l_T)
        ns3l = ns3l_loss(tape, tape.concat_rows(mu_x, mu_u), result.mask)
        ramp = warmup if ns3l_warmup else 1.0
        total = tape.add(total, tape.scale(ns3l, config.ns3l_lambda1 * ramp))
        result.terms['ns3l'] = tape.value(ns3l).item()
        result.loss = total
    return result
