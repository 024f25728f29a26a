"""Central finite-difference verification of hand-written backward passes.

The checked scalar is L = sum(R * forward(inputs)) for a fixed random
projection R, so every output entry contributes. For each parameter the
report holds

    max |analytic - numeric| / max(max |analytic|, max |numeric|)

over the checked entries.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from observability.logging_config import get_logger

logger = get_logger(__name__)

_FLOOR = 1e-12


@dataclass
class GradCheckReport:
    """Outcome of ``grad_check``.

    Attributes:
        tol: Relative tolerance used.
        errors: Max relative error per parameter (and per checked input,
            prefixed with ``input:``).
        checked: Number of entries checked per name.
    """

    tol: float
    errors: Dict[str, float] = field(default_factory=dict)
    checked: Dict[str, int] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def failures(self) -> List[str]:
        return [name for name, err in self.errors.items() if not err < self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures


def _as_tuple(out: Any) -> tuple:
    return tuple(out) if isinstance(out, (tuple, list)) else (out,)


def _projected(out: Any, projection: tuple) -> float:
    return float(sum(np.sum(o * r) for o, r in zip(_as_tuple(out), projection)))


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(analytic), initial=0.0)), float(np.max(np.abs(numeric), initial=0.0)), _FLOOR)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def _pick(size: int, max_entries: Optional[int], rng: np.random.Generator) -> np.ndarray:
    if max_entries is None or size <= max_entries:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_entries, replace=False))


def grad_check(
    model: Any,
    inputs: Any,
    tol: float = 1e-5,
    h: float = 1e-6,
    seed: int = 0,
    max_entries: Optional[int] = None,
    input_arrays: Optional[Dict[str, np.ndarray]] = None,
) -> GradCheckReport:
    """
    Compare ``model.backward`` against central differences.

    Args:
        model: Object with ``parameters()``, ``forward(inputs) -> (out, cache)``
            and ``backward(dout, cache) -> input gradient(s)``
        inputs: Whatever ``model.forward`` takes
        tol: Pass threshold on the relative error
        h: Finite-difference step
        seed: Seed of the projection and of entry sampling
        max_entries: Check at most this many entries per array
        input_arrays: Arrays referenced by ``inputs`` whose gradients should
            also be checked. ``backward`` must return a dict keyed like this
            mapping, or a single array when there is exactly one entry.

    Returns:
        GradCheckReport (failures are reported, not raised)
    """
    rng = np.random.default_rng(seed)
    params = model.parameters()

    out, cache = model.forward(inputs)
    projection = tuple(rng.standard_normal(np.shape(o)) for o in _as_tuple(out))
    for p in params:
        p.zero_grad()
    dout = projection if isinstance(out, (tuple, list)) else projection[0]
    input_grads = model.backward(dout, cache)
    analytic = {p.name: p.grad.copy() for p in params}

    def loss() -> float:
        return _projected(model.forward(inputs)[0], projection)

    report = GradCheckReport(tol=tol)
    targets = [(p.name, p.data) for p in params]
    if input_arrays:
        if not isinstance(input_grads, dict):
            (only,) = input_arrays
            input_grads = {only: input_grads}
        for name, arr in input_arrays.items():
            analytic[f"input:{name}"] = np.asarray(input_grads[name]).copy()
            targets.append((f"input:{name}", arr))

    for name, arr in targets:
        flat = arr.reshape(-1)
        idx = _pick(flat.size, max_entries, rng)
        numeric = np.empty(len(idx))
        for k, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            plus = loss()
            flat[i] = orig - h
            minus = loss()
            flat[i] = orig
            numeric[k] = (plus - minus) / (2.0 * h)
        report.errors[name] = _relative_error(analytic[name].reshape(-1)[idx], numeric)
        report.checked[name] = len(idx)

    for p in params:
        p.zero_grad()
    if report.passed:
        logger.debug(f"grad_check passed: max error {report.max_error:.3e} (tol {tol})")
    else:
        logger.warning(f"grad_check failed for {report.failures}: max error {report.max_error:.3e} (tol {tol})")
    return report
