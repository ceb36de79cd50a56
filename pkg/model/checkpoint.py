"""
JSON checkpoints: model config, parameter ordering tag and per-layer flat arrays.
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import torch

from model.network import ModelConfig, PINCNetwork
from utils.errors import CheckpointError, ConfigError
from utils.helpers import ensure_directory_exists, save_json

CHECKPOINT_FORMAT = "pinc-checkpoint"
# Layers in order; each contributes weight (row-major), bias, beta, then
# layer-norm gain and offset when present. The output layer has weight and bias only.
PARAMETER_ORDERING = "layerwise-w-b-beta-ln/v1"


def _layer_record(name: str, tensors: Dict[str, torch.Tensor]) -> Dict[str, Any]:
    record: Dict[str, Any] = {"name": name}
    for key, tensor in tensors.items():
        record[key] = {"shape": list(tensor.shape), "values": tensor.detach().reshape(-1).tolist()}
    return record


def model_state(model: PINCNetwork) -> Dict[str, Any]:
    """Checkpoint document for a model (not yet written)."""
    layers = []
    for name, layer in zip(model.layer_names(), model.hidden):
        tensors = {"weight": layer.linear.weight, "bias": layer.linear.bias, "beta": layer.activation.beta}
        if layer.norm is not None:
            tensors["ln_gain"] = layer.norm.weight
            tensors["ln_offset"] = layer.norm.bias
        layers.append(_layer_record(name, tensors))
    layers.append(_layer_record("output", {"weight": model.output.weight, "bias": model.output.bias}))
    return {
        "format": CHECKPOINT_FORMAT,
        "parameter_ordering": PARAMETER_ORDERING,
        "config": model.config.to_dict(),
        "layers": layers,
    }


def save_checkpoint(model: PINCNetwork, path: str, metadata: Optional[Dict[str, Any]] = None) -> None:
    """
    Write a model checkpoint.

    Args:
        model: Network to save.
        path: Target JSON file.
        metadata: Optional extra fields (epoch, losses); stored under ``metadata``.
    """
    document = model_state(model)
    if metadata:
        document["metadata"] = metadata
    directory = os.path.dirname(path)
    if directory:
        ensure_directory_exists(directory)
    save_json(document, path)
    logging.info(f"Saved checkpoint to {path}")


def _assign(target: torch.Tensor, record: Dict[str, Any], where: str) -> None:
    try:
        shape, values = record["shape"], record["values"]
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"{where}: malformed array record") from e
    if list(target.shape) != list(shape) or len(values) != target.numel():
        raise CheckpointError(f"{where}: shape {shape} does not match model shape {list(target.shape)}")
    with torch.no_grad():
        target.copy_(torch.tensor(values, dtype=torch.float64).reshape(target.shape))


def load_checkpoint(path: str, expected_config: Optional[ModelConfig] = None) -> PINCNetwork:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Args:
        path: Checkpoint file.
        expected_config: When given, the stored architecture must match it.

    Raises:
        CheckpointError: Unreadable file, wrong ordering tag, shape or architecture mismatch.
    """
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path, "r") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"cannot parse checkpoint {path}: {e}") from e

    if document.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a PINC checkpoint")
    if document.get("parameter_ordering") != PARAMETER_ORDERING:
        raise CheckpointError(
            f"{path}: parameter ordering {document.get('parameter_ordering')!r} is not {PARAMETER_ORDERING!r}"
        )
    try:
        config = ModelConfig.from_dict(document["config"])
    except (KeyError, TypeError, ConfigError) as e:
        raise CheckpointError(f"{path}: invalid model config ({e})") from e

    if expected_config is not None:
        mismatched = [
            key for key in ("n_layers", "n_hidden", "activation", "layer_norm_every_2nd")
            if getattr(config, key) != getattr(expected_config, key)
        ]
        if mismatched:
            raise CheckpointError(f"{path}: architecture differs from the configured model in {mismatched}")

    model = PINCNetwork(config)
    records = document.get("layers", [])
    names = model.layer_names()
    if [r.get("name") for r in records] != names:
        raise CheckpointError(f"{path}: expected layers {names}")

    for record, layer in zip(records[:-1], model.hidden):
        where = f"{path}:{record['name']}"
        _assign(layer.linear.weight, record.get("weight"), f"{where}.weight")
        _assign(layer.linear.bias, record.get("bias"), f"{where}.bias")
        _assign(layer.activation.beta, record.get("beta"), f"{where}.beta")
        if layer.norm is not None:
            _assign(layer.norm.weight, record.get("ln_gain"), f"{where}.ln_gain")
            _assign(layer.norm.bias, record.get("ln_offset"), f"{where}.ln_offset")
        elif "ln_gain" in record:
            raise CheckpointError(f"{where}: unexpected layer-norm parameters")
    _assign(model.output.weight, records[-1].get("weight"), f"{path}:output.weight")
    _assign(model.output.bias, records[-1].get("bias"), f"{path}:output.bias")
    logging.info(f"Loaded checkpoint {path}")
    return model
