from ns3l_lab.losses.basic import (
    CE_FLOOR,
    NS3L_FLOOR,
    brier_loss,
    entropy_min_loss,
    kl_divergence_rows,
    ns3l_loss,
    one_hot,
    pi_consistency_loss,
    pseudo_label_loss,
    supervised_ce,
)
from ns3l_lab.losses.objective import ObjectiveResult, combined_objective
from ns3l_lab.losses.vat import vat_loss, vat_perturbation

__all__ = [
    'CE_FLOOR',
    'NS3L_FLOOR',
    'ObjectiveResult',
    'brier_loss',
    'combined_objective',
    'entropy_min_loss',
    'kl_divergence_rows',
    'ns3l_loss',
    'one_hot',
    'pi_consistency_loss',
    'pseudo_label_loss',
    'supervised_ce',
    'vat_loss',
    'vat_perturbation',
]
