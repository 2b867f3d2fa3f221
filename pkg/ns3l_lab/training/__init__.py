from ns3l_lab.training.loop import TrainResult, build_experiment_data, build_selector, evaluate, train_run
from ns3l_lab.training.optim import (
    AdamState,
    EMAState,
    adam_step,
    ema_update,
    init_adam,
    learning_rate,
    warmup_weight,
)

__all__ = [
    'AdamState',
    'EMAState',
    'TrainResult',
    'adam_step',
    'build_experiment_data',
    'build_selector',
    'ema_update',
    'evaluate',
    'init_adam',
    'learning_rate',
    'train_run',
    'warmup_weight',
]
