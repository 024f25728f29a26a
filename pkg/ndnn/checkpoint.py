"""Model checkpoints: architecture descriptor plus raw float64 parameters."""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ndnn.container import ArtifactError, read_container, write_container

CHECKPOINT_KIND = "checkpoint"


def save_checkpoint(path: Union[str, Path], model: Any, metadata: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write ``model.architecture()`` and every parameter in ``model.parameters()`` order.

    The header's parameter table lists name and shape; extra ``metadata``
    (bounds hash, training config, history summary) is stored alongside.
    """
    params = model.parameters()
    header = {
        "architecture": model.architecture(),
        "parameters": [{"name": p.name, "shape": list(p.shape)} for p in params],
        **(metadata or {}),
    }
    return write_container(path, CHECKPOINT_KIND, header, {p.name: p.data for p in params})


def read_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Return (header, parameter arrays by name)."""
    return read_container(path, expected_kind=CHECKPOINT_KIND)


def load_parameters(model: Any, arrays: Dict[str, np.ndarray]) -> None:
    """
    Copy stored values into ``model``'s parameters.

    Raises:
        ArtifactError: If a parameter is missing or has another shape
    """
    for p in model.parameters():
        if p.name not in arrays:
            raise ArtifactError(f"checkpoint has no parameter {p.name!r}")
        value = arrays[p.name]
        if value.shape != p.shape:
            raise ArtifactError(f"parameter {p.name!r} has shape {value.shape} in checkpoint, model expects {p.shape}")
        p.data[...] = value
        p.zero_grad()
        p.reset_optimizer()
