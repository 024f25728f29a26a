"""Emulator factory and checkpoint round-trip.

Every emulator exposes the same surface:

- ``parameters()`` -> list of ParamTensor
- ``prepare(samples)`` -> training items (mesh samples, or grid samples for the FCN)
- ``forward(item)`` -> (prediction, cache); ``backward(dpred, cache)``
- ``predict_nodes(sample)`` -> (N, 4) normalized prediction at the mesh nodes
- ``architecture()`` -> ModelConfig dict stored in checkpoint headers
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from config.model_config import ModelConfig
from gnn.egcn import EgcnModel
from gnn.fcn import FcnModel
from gnn.gcn import GcnModel
from ndnn.checkpoint import load_parameters, read_checkpoint, save_checkpoint
from ndnn.container import ArtifactError
from ndnn.tensor import count_parameters
from observability.logging_config import get_logger

logger = get_logger(__name__)

_BUILDERS = {"egcn": EgcnModel, "gcn": GcnModel, "fcn": FcnModel}


def build_model(config: ModelConfig, seed: int = 0) -> Any:
    """Instantiate the emulator named by ``config.kind`` with seeded weights."""
    rng = np.random.default_rng(seed)
    model = _BUILDERS[config.kind](config, rng)
    logger.info(f"Built {config.kind} model: {count_parameters(model.parameters())} parameters (seed={seed})")
    return model


def save_model(path: Union[str, Path], model: Any, metadata: Optional[Dict[str, Any]] = None) -> Path:
    return save_checkpoint(path, model, metadata)


def load_model(path: Union[str, Path]) -> Tuple[Any, Dict[str, Any]]:
    """
    Rebuild a model from its checkpoint.

    Returns:
        (model, checkpoint header)

    Raises:
        ArtifactError: If the file is not a checkpoint or does not match its architecture
    """
    header, arrays = read_checkpoint(path)
    try:
        config = ModelConfig.from_dict(header["architecture"])
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"{path} has an unusable architecture descriptor: {e}") from e
    model = build_model(config, seed=0)
    load_parameters(model, arrays)
    return model, header
