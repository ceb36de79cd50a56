"""
Differentiation helpers on top of torch.autograd.
"""

from .derivatives import Dual, forward_with_time_derivative, loss_gradient, flat_gradient, assign_gradient

__all__ = ['Dual', 'forward_with_time_derivative', 'loss_gradient', 'flat_gradient', 'assign_gradient']
