"""Strategy dispatch used by the training objectives."""
import logging
from typing import Optional

import numpy as np

from ns3l_lab.errors import DomainError
from ns3l_lab.models.config import NegSelectConfig, NegSelectStrategy
from ns3l_lab.negselect.masks import NegativeLabelMask, oracle_mask, threshold_mask, uniform_mask
from ns3l_lab.negselect.neighbors import NeighborIndex, furthest_class_mask, nn_exclude_mask

LOG = logging.getLogger(__name__)

_NN_VARIANTS = {
    NegSelectStrategy.NN_EXCLUDE_1: 'exclude_1',
    NegSelectStrategy.NN_EXCLUDE_4: 'exclude_4',
}


class NegativeSelector:
    """
    Picks negative labels for a batch of unlabeled samples.

    Args:
        config: Strategy, threshold ``T`` and count ``P``.
        num_classes: K.
        neighbor_index: Required by the geometry strategies.
    """

    def __init__(self, config: NegSelectConfig, num_classes: int, neighbor_index: Optional[NeighborIndex] = None):
        self.config = config
        self.num_classes = num_classes
        self.neighbor_index = neighbor_index
        geometric = config.strategy in _NN_VARIANTS or config.strategy == NegSelectStrategy.FURTHEST
        if geometric and neighbor_index is None:
            raise DomainError(f'strategy {config.strategy.value!r} needs a labeled neighbour index')

    @property
    def uses_hidden_labels(self) -> bool:
        return self.config.strategy == NegSelectStrategy.ORACLE

    def select(self, mu: np.ndarray, batch, rng: np.random.Generator) -> NegativeLabelMask:
        """
        Args:
            mu (np.ndarray): Current class probabilities of the unlabeled rows (B x K).
            batch (SSLBatch): The batch the rows come from.
            rng (np.random.Generator): Randomness for the sampling strategies.
        """
        strategy = self.config.strategy
        if strategy == NegSelectStrategy.THRESHOLD:
            return threshold_mask(mu, self.config.T)
        if strategy == NegSelectStrategy.UNIFORM:
            return uniform_mask(mu.shape[0], self.num_classes, self.config.P, rng)
        if strategy == NegSelectStrategy.ORACLE:
            return oracle_mask(batch.diagnostics().hidden_labels, self.num_classes, self.config.P, rng)
        if strategy == NegSelectStrategy.FURTHEST:
            return furthest_class_mask(batch.x_unlabeled, None, None, rng, index=self.neighbor_index)
        return nn_exclude_mask(
            batch.x_unlabeled,
            None,
            None,
            self.config.P,
            _NN_VARIANTS[strategy],
            rng,
            index=self.neighbor_index,
            indices=batch.unlabeled_index,
        )
