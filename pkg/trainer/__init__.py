"""
Training loop, optimizer and learning-rate schedule.
"""

from .optim import make_optimizer, adamw_step, PlateauScheduler, lr_schedule_update, current_lr
from .trainer import (
    TrainConfig, TrainHistory, EpochRecord, Trainer, train, inject_noise,
    METRICS_HEADER, WALL_CLOCK_COLUMNS, NOISE_MODES,
)

__all__ = [
    'make_optimizer', 'adamw_step', 'PlateauScheduler', 'lr_schedule_update', 'current_lr',
    'TrainConfig', 'TrainHistory', 'EpochRecord', 'Trainer', 'train', 'inject_noise',
    'METRICS_HEADER', 'WALL_CLOCK_COLUMNS', 'NOISE_MODES',
]
