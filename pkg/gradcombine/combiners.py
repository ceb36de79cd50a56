"""
Combination of per-loss gradient vectors into a single update direction.

Schemes:
- sum: weighted sum
- config: conflict-free direction from the pseudo-inverse of the unit gradients
- norm: every gradient rescaled to the norm of the reference (data) gradient
"""

import logging
from typing import Dict, List, Optional, Sequence

import torch

from utils.errors import NumericalError

GRAD_SCHEMES = ("sum", "config", "norm")
ZERO_NORM = 1e-15


def _check_lengths(grads: Sequence[torch.Tensor]) -> None:
    if not grads:
        raise ValueError("no gradients to combine")
    length = grads[0].numel()
    for i, g in enumerate(grads):
        if g.dim() != 1 or g.numel() != length:
            raise ValueError(f"gradient {i} has shape {tuple(g.shape)}, expected ({length},)")


def sum_combine(grads: Sequence[torch.Tensor], weights: Optional[Sequence[float]] = None) -> torch.Tensor:
    """Weighted sum of the gradients (weights default to 1)."""
    _check_lengths(grads)
    weights = [1.0] * len(grads) if weights is None else list(weights)
    if len(weights) != len(grads):
        raise ValueError(f"{len(weights)} weights for {len(grads)} gradients")
    total = torch.zeros_like(grads[0])
    for w, g in zip(weights, grads):
        total = total + w * g
    return total


def config_combine(grads: Sequence[torch.Tensor]) -> torch.Tensor:
    """
    Conflict-free combination.

    The direction d solves U d = 1 in the least-squares sense, U stacking the
    unit gradients, and is normalized; the magnitude is the sum of the
    projections of d onto the unit gradients times the mean gradient norm.
    When U has full row rank every unit gradient has the same non-negative
    projection on the result.

    Raises:
        NumericalError: All gradients are zero.
    """
    _check_lengths(grads)
    stacked = torch.stack(list(grads))
    norms = torch.linalg.vector_norm(stacked, dim=1)
    keep = norms >= ZERO_NORM
    if not keep.any():
        raise NumericalError("all gradients are zero; no combined direction exists")
    stacked, norms = stacked[keep], norms[keep]

    units = stacked / norms.unsqueeze(1)
    direction = torch.linalg.pinv(units) @ torch.ones(units.shape[0], dtype=units.dtype)
    direction_norm = torch.linalg.vector_norm(direction)
    if direction_norm < ZERO_NORM:
        raise NumericalError("unit gradients admit no common direction")
    direction = direction / direction_norm
    magnitude = (units @ direction).sum() * norms.mean()
    return magnitude * direction


def norm_combine(grads: Sequence[torch.Tensor], weights: Optional[Sequence[float]] = None) -> torch.Tensor:
    """
    Norm-matched combination with grads[0] as the reference.

    Each gradient is rescaled to the reference norm, the weighted sum is formed
    and rescaled to the reference norm again. Gradients with norm below 1e-15
    (other than the reference) are skipped.

    Raises:
        NumericalError: Zero reference gradient, or the rescaled gradients cancel.
    """
    _check_lengths(grads)
    weights = [1.0] * len(grads) if weights is None else list(weights)
    if len(weights) != len(grads):
        raise ValueError(f"{len(weights)} weights for {len(grads)} gradients")

    ref_norm = torch.linalg.vector_norm(grads[0])
    if ref_norm < ZERO_NORM:
        raise NumericalError("reference gradient has zero norm")

    total = torch.zeros_like(grads[0])
    for i, (w, g) in enumerate(zip(weights, grads)):
        g_norm = torch.linalg.vector_norm(g)
        if g_norm < ZERO_NORM:
            logging.debug(f"Skipping gradient {i} with norm {g_norm.item():.3e}")
            continue
        total = total + w * g * (ref_norm / g_norm)

    total_norm = torch.linalg.vector_norm(total)
    if total_norm < ZERO_NORM:
        raise NumericalError("normalized gradients cancel to zero")
    return total * (ref_norm / total_norm)


def clip_norm(g: torch.Tensor, c_max: float = 5.0) -> torch.Tensor:
    """Rescale g to norm c_max when its norm exceeds c_max."""
    g_norm = torch.linalg.vector_norm(g)
    if g_norm > c_max:
        return g * (c_max / g_norm)
    return g


def combine_gradients(scheme: str, grads: Dict[str, torch.Tensor], weights: Dict[str, float],
                      reference: str = "data") -> torch.Tensor:
    """
    Combine named per-loss gradients with the configured scheme.

    Args:
        scheme: One of ``sum``, ``config``, ``norm``.
        grads: Gradient per active loss name, in a fixed order.
        weights: Loss weight per name (unused by ``config``).
        reference: Reference loss for ``norm``; the first active loss is used
            when it is not active.

    Returns:
        Combined gradient (before clipping). Zero when every gradient is zero.
    """
    if scheme not in GRAD_SCHEMES:
        raise ValueError(f"Unknown gradient scheme {scheme!r}; expected one of {GRAD_SCHEMES}")
    names: List[str] = list(grads)
    dropped = [n for n in names if torch.linalg.vector_norm(grads[n]) < ZERO_NORM]
    if dropped and len(dropped) == len(names):
        logging.warning(f"All gradients {dropped} are zero; combined direction is zero")
        return torch.zeros_like(grads[names[0]])
    if dropped:
        logging.warning(f"Dropping zero gradients of {dropped} from combination")
        names = [n for n in names if n not in dropped]

    if scheme == "sum":
        return sum_combine([grads[n] for n in names], [weights[n] for n in names])
    if scheme == "config":
        return config_combine([grads[n] for n in names])

    ref = reference if reference in names else names[0]
    ordered = [ref] + [n for n in names if n != ref]
    return norm_combine([grads[n] for n in ordered], [weights[n] for n in ordered])
