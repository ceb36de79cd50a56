"""
Time derivatives of network outputs and per-loss parameter gradients.

The time derivative is a Jacobian-vector product with tangent 1 on the time
input, built with create_graph=True so that losses on it can be
back-propagated to the parameters (mixed second derivative).
"""

from typing import Callable, List, NamedTuple, Sequence, Tuple

import torch
import torch.nn as nn

from dynamics.fossen import ArrayLike, as_tensor
from model.network import PINCNetwork, TimeLike, time_column
from utils.errors import NumericalError


class Dual(NamedTuple):
    """Value of a function together with its directional derivative along the seed tangent."""

    value: torch.Tensor
    tangent: torch.Tensor


def forward_with_time_derivative(model: PINCNetwork, ns0: ArrayLike, u0: ArrayLike, t: TimeLike) -> Dual:
    """
    Network prediction and its exact derivative with respect to the time input.

    Args:
        model: PINC network.
        ns0: (..., 9) initial network states.
        u0: (..., 4) controls.
        t: Scalar or per-sample times.

    Returns:
        Dual(value, tangent) with both of shape (..., 9); both remain attached to
        the autograd graph of the model parameters.

    Raises:
        NumericalError: Non-finite prediction or rate; names the first offending layer.
    """
    ns0 = as_tensor(ns0)
    u0 = as_tensor(u0)
    t_col = time_column(t, ns0.shape[:-1]).clone()

    def at_time(tt: torch.Tensor) -> torch.Tensor:
        return model(ns0, u0, tt)

    value, tangent = torch.autograd.functional.jvp(at_time, t_col, v=torch.ones_like(t_col), create_graph=True)
    if not torch.isfinite(tangent).all():
        raise NumericalError("non-finite time derivative", layer=model.first_non_finite_layer(ns0, u0, t_col))
    return Dual(value, tangent)


def flat_gradient(grads: Sequence[torch.Tensor], params: Sequence[nn.Parameter]) -> torch.Tensor:
    """Concatenate per-parameter gradients in the canonical ordering; missing entries are zero."""
    return torch.cat([
        (g if g is not None else torch.zeros_like(p)).reshape(-1)
        for g, p in zip(grads, params)
    ])


def loss_gradient(model: nn.Module, evaluate: Callable[[], torch.Tensor],
                  loss_name: str = "loss") -> Tuple[float, torch.Tensor]:
    """
    Evaluate a scalar loss and its gradient with respect to every model parameter.

    Args:
        model: Network whose parameters are differentiated.
        evaluate: Zero-argument callable returning the scalar loss tensor.
        loss_name: Used in error messages.

    Returns:
        (loss value, flat gradient vector in the canonical parameter ordering)

    Raises:
        NumericalError: Non-finite loss or gradient.
    """
    params: List[nn.Parameter] = list(model.parameters())
    loss = evaluate()
    if not torch.isfinite(loss):
        raise NumericalError("non-finite loss", loss_name=loss_name)
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grad = flat_gradient(grads, params)
    if not torch.isfinite(grad).all():
        raise NumericalError("non-finite gradient", loss_name=loss_name)
    return loss.item(), grad


def assign_gradient(model: nn.Module, grad: torch.Tensor) -> None:
    """Write a flat gradient vector into the ``.grad`` fields of the model parameters."""
    params = list(model.parameters())
    total = sum(p.numel() for p in params)
    if total != grad.numel():
        raise ValueError(f"gradient has {grad.numel()} entries, model has {total} parameters")
    offset = 0
    for p in params:
        n = p.numel()
        p.grad = grad[offset:offset + n].view_as(p).clone()
        offset += n
