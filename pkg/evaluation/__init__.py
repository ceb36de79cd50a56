"""
Evaluation: one-step and rollout errors, valid prediction time and the full report.
"""

from .metrics import (
    VPTStats, one_step_mse, rollout_mse, physics_mse, position_errors, rollout_predictions,
    valid_steps, vpt, vpt_suite,
)
from .suite import EvalConfig, EvalReport, EVAL_SPLITS, build_eval_sets, eval_period, full_report

__all__ = [
    'VPTStats', 'one_step_mse', 'rollout_mse', 'physics_mse', 'position_errors', 'rollout_predictions',
    'valid_steps', 'vpt', 'vpt_suite',
    'EvalConfig', 'EvalReport', 'EVAL_SPLITS', 'build_eval_sets', 'eval_period', 'full_report',
]
