"""Mean-squared-error losses with their gradients."""

from typing import Tuple

import numpy as np

from ndnn.layers import ShapeMismatchError


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean of squared differences over all elements.

    Returns:
        (loss, dloss/dpred) with gradient 2 (pred - target) / count
    """
    if pred.shape != target.shape:
        raise ShapeMismatchError("mse_loss", pred.shape, target.shape)
    diff = pred - target
    count = diff.size
    if count == 0:
        return 0.0, np.zeros_like(pred)
    return float(np.sum(diff * diff) / count), 2.0 * diff / count


def masked_mse(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    MSE over the cells where ``mask`` is true.

    ``pred``/``target`` are (C, ...); ``mask`` covers the trailing dims and is
    shared by every channel. The mean runs over C * mask.sum() values.
    """
    if pred.shape != target.shape:
        raise ShapeMismatchError("masked_mse", pred.shape, target.shape)
    if mask.shape != pred.shape[1:]:
        raise ShapeMismatchError("masked_mse(mask)", pred.shape[1:], mask.shape)
    weight = np.broadcast_to(mask.astype(np.float64), pred.shape)
    count = pred.shape[0] * int(np.count_nonzero(mask))
    if count == 0:
        return 0.0, np.zeros_like(pred)
    diff = (pred - target) * weight
    return float(np.sum(diff * diff) / count), 2.0 * diff / count
