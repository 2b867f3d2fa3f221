"""
The combined mini-batch objective

    L = CE(labeled) + w(t) * sum_i lambda_i * L_i(unlabeled)

over any subset of {NS3L, VAT, Pi, entropy minimization, pseudo-labeling}.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ns3l_lab.classifier.mlp import Params, predict_probs
from ns3l_lab.data.augment import augment
from ns3l_lab.diffcore import Tape
from ns3l_lab.errors import DomainError
from ns3l_lab.losses.basic import (
    entropy_min_loss,
    ns3l_loss,
    one_hot,
    pi_consistency_loss,
    pseudo_label_loss,
    supervised_ce,
)
from ns3l_lab.losses.vat import vat_loss
from ns3l_lab.models.config import UNSUPERVISED_TERMS, ExperimentConfig, NegSelectConfig
from ns3l_lab.negselect import NegativeLabelMask, NegativeSelector

LOG = logging.getLogger(__name__)


@dataclass
class ObjectiveResult:
    """Root node of the loss plus the value of every term that entered it."""

    loss: int
    terms: Dict[str, float] = field(default_factory=dict)
    mask: Optional[NegativeLabelMask] = None


def _default_selector(config: ExperimentConfig, num_classes: int) -> NegativeSelector:
    threshold = config.effective_threshold(num_classes)
    return NegativeSelector(NegSelectConfig(T=threshold), num_classes)


def combined_objective(
    tape: Tape,
    batch,
    params: Params,
    config: ExperimentConfig,
    rng: np.random.Generator,
    warmup: float = 1.0,
    selector: Optional[NegativeSelector] = None,
) -> ObjectiveResult:
    """
    Records the combined loss of one SSL batch on ``tape``.

    Args:
        tape: Tape to record on.
        batch: Labeled and unlabeled rows.
        params: Current model parameters.
        config: Method and loss weights.
        rng: Randomness for VAT, the Pi model and sampled negatives.
        warmup: Multiplier in [0, 1] applied to unsupervised terms not listed as exempt.
        selector: Negative-label strategy; thresholding by default.

    Returns:
        ObjectiveResult: Scalar loss node and per-term values.
    """
    if batch.labeled_size == 0:
        raise DomainError('combined objective needs at least one labeled sample')
    if not 0.0 <= warmup <= 1.0:
        raise DomainError(f'warmup multiplier must lie in [0, 1], got {warmup}')
    num_classes = batch.num_classes
    weights = config.loss_weights()

    mu_labeled = predict_probs(params, batch.x_labeled, tape)
    total = supervised_ce(tape, mu_labeled, one_hot(batch.y_labeled, num_classes))
    result = ObjectiveResult(loss=total, terms={'supervised': tape.value(total).item()})

    active = [term for term in UNSUPERVISED_TERMS if term in config.method.terms and weights.weight_for(term) > 0.0]
    if batch.unlabeled_size == 0 or not active:
        return result

    mu_unlabeled: Optional[int] = None
    for term in active:
        if term in ('ns3l', 'entmin', 'pl') and mu_unlabeled is None:
            mu_unlabeled = predict_probs(params, batch.x_unlabeled, tape)
        if term == 'ns3l':
            selector = selector or _default_selector(config, num_classes)
            result.mask = selector.select(tape.value(mu_unlabeled).values, batch, rng)
            node = ns3l_loss(tape, mu_unlabeled, result.mask)
        elif term == 'vat':
            node = vat_loss(tape, params, batch.x_unlabeled, config.vat(), rng)
        elif term == 'pi':
            first = predict_probs(params, augment(batch.x_unlabeled, rng, config.pi_noise_sigma), tape)
            second = predict_probs(params, augment(batch.x_unlabeled, rng, config.pi_noise_sigma), tape)
            node = pi_consistency_loss(tape, first, second)
        elif term == 'entmin':
            node = entropy_min_loss(tape, mu_unlabeled)
        else:
            node = pseudo_label_loss(tape, mu_unlabeled, config.tau_pl)
        ramp = 1.0 if term in weights.warmup_exempt else warmup
        result.terms[term] = tape.value(node).item()
        total = tape.add(total, tape.scale(node, weights.weight_for(term) * ramp))

    result.loss = total
    return result
