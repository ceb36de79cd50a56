"""
Gradient combination schemes and clipping.
"""

from .combiners import GRAD_SCHEMES, sum_combine, config_combine, norm_combine, clip_norm, combine_gradients

__all__ = ['GRAD_SCHEMES', 'sum_combine', 'config_combine', 'norm_combine', 'clip_norm', 'combine_gradients']
