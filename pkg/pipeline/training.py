"""Training loop: seeded shuffling, batch-averaged gradients, Adam, best-val restore."""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from gnn.fcn import GridSample
from ndnn.loss import masked_mse, mse_loss
from ndnn.optim import NonFiniteGradientError, TrainConfig, adam_step
from ndnn.tensor import restore, snapshot, zero_grads
from observability.logging_config import get_logger
from observability.tracing import TraceSpan

logger = get_logger(__name__)


class TrainingDivergedError(ArithmeticError):
    """Raised when the loss or a gradient stops being finite."""

    def __init__(self, epoch: int, loss: float, detail: str = ""):
        self.epoch = epoch
        self.loss = loss
        message = f"training diverged at epoch {epoch} (loss={loss})"
        super().__init__(f"{message}: {detail}" if detail else message)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: Optional[float]


@dataclass
class TrainingHistory:
    """Per-epoch losses plus the restored best epoch.

    Attributes:
        records: One entry per epoch, in order.
        best_epoch: Epoch whose parameters were kept.
        best_loss: Validation loss of that epoch (training loss when there
            is no validation set).
        wall_time_s: Wall-clock training time.
    """

    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_loss: float = math.inf
    wall_time_s: float = 0.0

    @property
    def train_losses(self) -> List[float]:
        return [r.train_loss for r in self.records]

    def to_dict(self) -> dict:
        return {
            "records": [asdict(r) for r in self.records],
            "best_epoch": self.best_epoch,
            "best_loss": self.best_loss,
            "wall_time_s": self.wall_time_s,
        }

    def save_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path


def item_loss(model: Any, item: Any) -> Tuple[float, np.ndarray, Any]:
    """Forward one item; returns (loss, dloss/dprediction, cache)."""
    pred, cache = model.forward(item)
    if isinstance(item, GridSample):
        loss, dpred = masked_mse(pred, item.targets, item.valid)
    else:
        loss, dpred = mse_loss(pred, item.node_targets)
    return loss, dpred, cache


def mean_loss(model: Any, items: Sequence[Any]) -> Optional[float]:
    if not items:
        return None
    return float(np.mean([item_loss(model, item)[0] for item in items]))


def train(
    model: Any,
    train_samples: Sequence[Any],
    val_samples: Sequence[Any],
    config: TrainConfig,
) -> Tuple[Any, TrainingHistory]:
    """
    Fit ``model`` with Adam on the MSE of all four outputs.

    Samples are shuffled every epoch with a generator seeded once from
    ``config.seed``; each optimizer step averages the gradients of
    ``batch_size`` samples, accumulated in sample order. After the last
    epoch the parameters of the epoch with the lowest validation loss are
    restored.

    Args:
        model: Emulator (see ``gnn.models``)
        train_samples: Mesh samples (or prepared items) to fit
        val_samples: Samples for model selection; may be empty
        config: Optimizer and loop settings

    Returns:
        (model, history)

    Raises:
        ValueError: If there are no training samples
        TrainingDivergedError: On a non-finite loss or gradient
    """
    if not train_samples:
        raise ValueError("no training samples")
    items = model.prepare(list(train_samples))
    val_items = model.prepare(list(val_samples))
    params = model.parameters()
    rng = np.random.default_rng(config.seed)
    history = TrainingHistory()
    best = snapshot(params)

    with TraceSpan(logger, stage_name=f"train-{len(items)}-samples") as span:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(items)) if config.shuffle else np.arange(len(items))
            losses = []
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                zero_grads(params)
                for k in batch:
                    loss, dpred, cache = item_loss(model, items[k])
                    if not math.isfinite(loss):
                        raise TrainingDivergedError(epoch, loss)
                    model.backward(dpred / len(batch), cache)
                    losses.append(loss)
                try:
                    adam_step(params, config)
                except NonFiniteGradientError as e:
                    raise TrainingDivergedError(epoch, float(np.mean(losses)), str(e)) from e

            train_loss = float(np.mean(losses))
            val_loss = mean_loss(model, val_items)
            history.records.append(EpochRecord(epoch, train_loss, val_loss))
            score = val_loss if val_loss is not None else train_loss
            if not math.isfinite(score):
                raise TrainingDivergedError(epoch, score, "validation loss is not finite")
            if score < history.best_loss:
                history.best_loss = score
                history.best_epoch = epoch
                best = snapshot(params)
            if epoch == 1 or epoch == config.epochs or epoch % 50 == 0:
                logger.info(f"epoch {epoch}/{config.epochs}: train {train_loss:.6e}, val {val_loss}")

    restore(params, best)
    zero_grads(params)
    history.wall_time_s = span.duration_s
    logger.info(f"Restored epoch {history.best_epoch} (loss {history.best_loss:.6e})")
    return model, history
