"""Wall-clock comparison of the oracle and the emulators over one scenario sweep."""

import json
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from icesim.config import ScenarioParams, SimConfig
from icesim.transient import simulate
from mesh.trimesh import TriMesh
from observability.logging_config import get_logger
from observability.tracing import TraceSpan

logger = get_logger(__name__)

DEFAULT_REPEATS = 3
ORACLE_ENGINE = "oracle"
_MIN_SECONDS = 1e-9


@dataclass
class EngineTiming:
    """Timing of one engine.

    Attributes:
        engine: "oracle" or a model kind.
        seconds: Minimum wall-clock time over the repetitions.
        repeats: Every measured repetition.
        speedup: Oracle seconds / engine seconds.
        training_seconds: Training wall time of an emulator, when known.
    """

    engine: str
    seconds: float
    repeats: List[float] = field(default_factory=list)
    speedup: float = 1.0
    training_seconds: Optional[float] = None


@dataclass
class TimingReport:
    hardware: str
    n_scenarios: int
    n_states: int
    engines: List[EngineTiming] = field(default_factory=list)

    def engine(self, name: str) -> EngineTiming:
        for entry in self.engines:
            if entry.engine == name:
                return entry
        raise KeyError(f"no timing for engine {name!r}")

    def to_json(self) -> List[Dict[str, Any]]:
        """List of {engine, seconds, hardware, speedup, ...} records."""
        return [
            {
                "engine": e.engine,
                "seconds": e.seconds,
                "hardware": self.hardware,
                "speedup": e.speedup,
                "repeats": e.repeats,
                "training_seconds": e.training_seconds,
                "n_scenarios": self.n_scenarios,
                "n_states": self.n_states,
            }
            for e in self.engines
        ]

    def save_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=2)
        return path

    def summary(self) -> str:
        lines = [f"{'engine':<8} {'seconds':>12} {'speedup':>10}   ({self.hardware})"]
        for e in self.engines:
            lines.append(f"{e.engine:<8} {e.seconds:12.4f} {e.speedup:9.1f}x")
        return "\n".join(lines)


def hardware_description() -> str:
    cpu = platform.processor() or platform.machine() or "unknown cpu"
    return (
        f"{cpu}, {os.cpu_count()} logical cores, {platform.system()} {platform.release()}, "
        f"Python {platform.python_version()}, numpy {np.__version__}"
    )


def time_min(fn: Callable[[], Any], repeats: int = DEFAULT_REPEATS, label: str = "run") -> Tuple[float, List[float]]:
    """Run ``fn`` ``repeats`` times; return (minimum seconds, all seconds)."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    times = []
    for k in range(repeats):
        with TraceSpan(logger, stage_name=f"{label}#{k + 1}", level="debug") as span:
            fn()
        times.append(max(span.duration_s, _MIN_SECONDS))
    return min(times), times


def benchmark(
    config: SimConfig,
    params_grid: Sequence[ScenarioParams],
    models: Optional[Dict[str, Any]] = None,
    samples: Sequence[Any] = (),
    mesh: Optional[TriMesh] = None,
    seed: Optional[int] = None,
    repeats: int = DEFAULT_REPEATS,
    training_seconds: Optional[Dict[str, float]] = None,
) -> TimingReport:
    """
    Time every engine on the same scenario sweep.

    The oracle re-solves every scenario; each emulator predicts every
    sample of the sweep (one per scenario per saved step). Engines run
    serially; the reported time is the minimum over ``repeats`` runs.

    Args:
        config: Oracle configuration of the sweep
        params_grid: Scenario parameters of the sweep
        models: Engine name -> trained emulator
        samples: Graph samples covering the sweep (needed when models are given)
        mesh: Mesh shared by the sweep (generated when omitted)
        seed: Bed seed for the oracle runs
        repeats: Repetitions per engine
        training_seconds: Engine name -> training wall time to report alongside

    Returns:
        TimingReport with the oracle first, then the models in the given order
    """
    models = models or {}
    if models and not samples:
        raise ValueError("emulator timing needs the samples of the sweep")
    training_seconds = training_seconds or {}

    def run_oracle():
        for params in params_grid:
            simulate(config, params, seed=seed, mesh=mesh)

    oracle_s, oracle_all = time_min(run_oracle, repeats, label=ORACLE_ENGINE)
    report = TimingReport(
        hardware=hardware_description(),
        n_scenarios=len(params_grid),
        n_states=config.n_steps + 1,
        engines=[EngineTiming(ORACLE_ENGINE, oracle_s, oracle_all, 1.0)],
    )

    for name, model in models.items():
        # first call builds per-mesh caches (grid weights, operators) outside the timed runs
        model.predict_nodes(samples[0])

        def run_model(model=model):
            for sample in samples:
                model.predict_nodes(sample)

        seconds, all_times = time_min(run_model, repeats, label=name)
        report.engines.append(EngineTiming(name, seconds, all_times, oracle_s / seconds, training_seconds.get(name)))

    logger.info("Benchmark results:\n" + report.summary())
    return report
