from ns3l_lab.models.config import (
    DatasetKind,
    DatasetSpec,
    ExperimentConfig,
    LossWeights,
    Method,
    MixMatchConfig,
    MLPSpec,
    NegSelectConfig,
    NegSelectStrategy,
    Schedule,
    SplitSpec,
    VATConfig,
)

__all__ = [
    'DatasetKind',
    'DatasetSpec',
    'ExperimentConfig',
    'LossWeights',
    'Method',
    'MixMatchConfig',
    'MLPSpec',
    'NegSelectConfig',
    'NegSelectStrategy',
    'Schedule',
    'SplitSpec',
    'VATConfig',
]
