"""
Virtual adversarial training.

The adversarial direction is found by power iteration on the KL divergence
between the clean prediction and the prediction at ``x + r``; gradients with
respect to ``r`` come from the same tape machinery as everything else.
"""
import logging
from typing import Optional

import numpy as np

from ns3l_lab.classifier.mlp import ParamsLike, predict_logits
from ns3l_lab.diffcore import Tape, backward
from ns3l_lab.errors import ShapeError
from ns3l_lab.losses.basic import kl_divergence_rows
from ns3l_lab.models.config import VATConfig

LOG = logging.getLogger(__name__)


def clean_log_probs(params: ParamsLike, x: np.ndarray) -> np.ndarray:
    tape = Tape()
    return tape.value(tape.row_log_softmax(predict_logits(params, x, tape))).values


def _normalize_rows(g: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    degenerate = (norms[:, 0] == 0.0) | ~np.isfinite(norms[:, 0])
    if np.any(degenerate):
        LOG.warning('VAT gradient vanished on %d rows; reusing the random start direction', int(degenerate.sum()))
        g = np.where(degenerate[:, None], fallback, g)
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / norms


def vat_perturbation(params: ParamsLike, x: np.ndarray, config: VATConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Per-sample adversarial perturbation of L2 norm ``epsilon``.

    Args:
        params: Model parameters (not differentiated here).
        x: Inputs, n x d.
        config: ``xi``, ``epsilon`` and the number of power iterations.
        rng: Source of the random start direction.

    Returns:
        np.ndarray: r_adv with the shape of ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f'VAT inputs must be 2-D, got shape {x.shape}')
    target = clean_log_probs(params, x)
    start = rng.normal(0.0, config.xi / np.sqrt(x.shape[1]), size=x.shape)
    r = start
    for _ in range(config.power_iterations):
        tape = Tape()
        r_id = tape.leaf(r)
        log_q = tape.row_log_softmax(predict_logits(params, tape.add(tape.constant(x), r_id), tape))
        divergence = kl_divergence_rows(tape, tape.constant(target), log_q)
        g = backward(tape, divergence)[r_id].values
        r = config.xi * _normalize_rows(g, start)
    return config.epsilon * _normalize_rows(r, start)


def vat_loss(
    tape: Tape,
    params: ParamsLike,
    x: np.ndarray,
    config: VATConfig,
    rng: np.random.Generator,
    r_adv: Optional[np.ndarray] = None,
    target_log_probs: Optional[np.ndarray] = None,
) -> int:
    """
    KL(p(x) || p(x + r_adv)) averaged over rows, with the clean branch held fixed.

    ``r_adv`` and ``target_log_probs`` may be supplied to freeze the otherwise
    parameter-dependent perturbation and target, e.g. for finite-difference checks.
    """
    x = np.asarray(x, dtype=np.float64)
    if r_adv is None:
        r_adv = vat_perturbation(params, x, config, rng)
    if target_log_probs is None:
        target = tape.stop_gradient(tape.row_log_softmax(predict_logits(params, x, tape)))
    else:
        target = tape.constant(target_log_probs)
    log_q = tape.row_log_softmax(predict_logits(params, x + r_adv, tape))
    return kl_divergence_rows(tape, target, log_q)
