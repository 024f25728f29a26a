"""RMSE / Pearson R scoring of emulator predictions at the mesh nodes."""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from observability.logging_config import get_logger
from pipeline.normalization import NODE_TARGET_NAMES, Bounds

logger = get_logger(__name__)

METRICS_COLUMNS = ("model", "scenario_param", "variable", "rmse", "r", "n")
MASK_THRESHOLD = 0.5


def rmse(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"rmse: shape {pred.shape} != {target.shape}")
    if pred.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def pearson_r(pred: np.ndarray, target: np.ndarray) -> float:
    """
    Pearson correlation, clipped to [-1, 1].

    Both sides constant gives 1.0 (identical up to a shift); exactly one
    side constant gives 0.0.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"pearson_r: shape {pred.shape} != {target.shape}")
    if pred.size == 0:
        return 0.0
    dp = pred - pred.mean()
    dt = target - target.mean()
    sp = float(np.sqrt(np.sum(dp * dp)))
    st = float(np.sqrt(np.sum(dt * dt)))
    if sp == 0.0 and st == 0.0:
        return 1.0
    if sp == 0.0 or st == 0.0:
        return 0.0
    return float(np.clip(np.sum(dp * dt) / (sp * st), -1.0, 1.0))


def mask_accuracy(pred_mask: np.ndarray, target_mask: np.ndarray) -> float:
    if len(target_mask) == 0:
        return 1.0
    return float(np.mean((pred_mask >= MASK_THRESHOLD) == (target_mask >= MASK_THRESHOLD)))


@dataclass
class VariableScore:
    variable: str
    rmse: float
    r: float
    n: int


@dataclass
class MetricsReport:
    """Scores per held-out parameter and averaged over parameters.

    Attributes:
        model: Engine name.
        per_param: param value -> variable -> score.
        averaged: variable -> score averaged over the parameter values
            (``n`` is the total point count).
        mask_accuracy: param value -> thresholded mask agreement.
        n_samples: Number of scored samples.
        masked: Whether scoring was restricted to target-ice nodes.
    """

    model: str
    per_param: Dict[float, Dict[str, VariableScore]] = field(default_factory=dict)
    averaged: Dict[str, VariableScore] = field(default_factory=dict)
    mask_accuracy: Dict[float, float] = field(default_factory=dict)
    n_samples: int = 0
    masked: bool = True

    def rows(self) -> List[Tuple[Any, ...]]:
        """CSV rows (model, scenario_param, variable, rmse, r, n); averages use ``mean``."""
        out = []
        for param in sorted(self.per_param):
            for name in NODE_TARGET_NAMES:
                s = self.per_param[param][name]
                out.append((self.model, repr(float(param)), name, repr(s.rmse), repr(s.r), s.n))
        for name in NODE_TARGET_NAMES:
            s = self.averaged[name]
            out.append((self.model, "mean", name, repr(s.rmse), repr(s.r), s.n))
        return out

    def summary(self) -> str:
        lines = [f"{self.model}: {self.n_samples} samples ({'ice nodes' if self.masked else 'all nodes'})"]
        for name in NODE_TARGET_NAMES:
            s = self.averaged[name]
            lines.append(f"  {name:<10} RMSE {s.rmse:12.4f}  R {s.r:8.5f}  n={s.n}")
        return "\n".join(lines)


def write_metrics_csv(path: Union[str, Path], reports: Sequence[MetricsReport]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_COLUMNS)
        for report in reports:
            writer.writerows(report.rows())
    return path


def evaluate(
    model: Any,
    test: Sequence[Any],
    bounds: Bounds,
    masked: bool = True,
    threads: int = 1,
    model_name: Optional[str] = None,
    expected_bounds_hash: Optional[str] = None,
) -> MetricsReport:
    """
    Score a trained model on held-out samples in physical units.

    Predictions are made per sample (in parallel, collected in order),
    denormalized, and pooled per parameter value. With ``masked`` only
    nodes whose target mask is 1 count. Per-parameter RMSE/R are averaged
    over the parameter values.

    Raises:
        ValueError: On an empty test set
        BoundsMismatchError: If ``expected_bounds_hash`` differs from ``bounds``
    """
    if not test:
        raise ValueError("cannot evaluate on an empty test set")
    if expected_bounds_hash:
        bounds.check_digest(expected_bounds_hash)
    name = model_name or getattr(getattr(model, "config", None), "kind", "model")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        predictions = list(pool.map(model.predict_nodes, test))

    pooled: Dict[float, Dict[str, List[Tuple[np.ndarray, np.ndarray]]]] = {}
    for sample, pred in zip(test, predictions):
        phys_pred = {v: bounds.denormalize(v, pred[:, k]) for k, v in enumerate(NODE_TARGET_NAMES)}
        phys_true = {v: bounds.denormalize(v, sample.node_targets[:, k]) for k, v in enumerate(NODE_TARGET_NAMES)}
        select = phys_true["mask"] >= MASK_THRESHOLD if masked else np.ones(len(pred), dtype=bool)
        bucket = pooled.setdefault(float(sample.param_value), {v: [] for v in NODE_TARGET_NAMES})
        for v in NODE_TARGET_NAMES:
            bucket[v].append((phys_pred[v][select], phys_true[v][select]))

    report = MetricsReport(model=name, n_samples=len(test), masked=masked)
    for param, bucket in sorted(pooled.items()):
        scores = {}
        for v in NODE_TARGET_NAMES:
            p = np.concatenate([a for a, _ in bucket[v]])
            t = np.concatenate([b for _, b in bucket[v]])
            scores[v] = VariableScore(v, rmse(p, t), pearson_r(p, t), len(t))
        report.per_param[param] = scores
        p_mask = np.concatenate([a for a, _ in bucket["mask"]])
        t_mask = np.concatenate([b for _, b in bucket["mask"]])
        report.mask_accuracy[param] = mask_accuracy(p_mask, t_mask)

    for v in NODE_TARGET_NAMES:
        per = [report.per_param[p][v] for p in report.per_param]
        report.averaged[v] = VariableScore(
            v,
            float(np.mean([s.rmse for s in per])),
            float(np.mean([s.r for s in per])),
            int(sum(s.n for s in per)),
        )
    logger.info(report.summary())
    return report


def is_valid_report(report: MetricsReport) -> bool:
    """RMSE >= 0 and R in [-1, 1] for every score."""
    scores = [s for per in report.per_param.values() for s in per.values()] + list(report.averaged.values())
    return all(s.rmse >= 0 and -1.0 <= s.r <= 1.0 and not math.isnan(s.r) for s in scores)
