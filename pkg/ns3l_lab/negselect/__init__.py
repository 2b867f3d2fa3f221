from ns3l_lab.negselect.masks import (
    NegativeLabelMask,
    negative_label_error_rate,
    oracle_mask,
    threshold_mask,
    uniform_mask,
)
from ns3l_lab.negselect.neighbors import NeighborIndex, furthest_class_mask, nn_exclude_mask
from ns3l_lab.negselect.selector import NegativeSelector

__all__ = [
    'NegativeLabelMask',
    'NegativeSelector',
    'NeighborIndex',
    'furthest_class_mask',
    'negative_label_error_rate',
    'nn_exclude_mask',
    'oracle_mask',
    'threshold_mask',
    'uniform_mask',
]
