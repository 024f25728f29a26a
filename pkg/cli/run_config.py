"""Run configuration: one JSON file plus command-line overrides.

A ``RunConfig`` fully determines a run (together with its seed): the
scenario preset and its overrides, the parameter grid, the emulators, the
optimizer, the split, the dataset options and the output directory.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from config.model_config import MODEL_KINDS, ModelConfig
from icesim.config import ScenarioParams, SimConfig
from ndnn.optim import TrainConfig
from observability.logging_config import get_logger
from pipeline.dataset import DatasetOptions
from pipeline.splits import (
    HELHEIM_TEST_MPA,
    HELHEIM_TRAINVAL_MPA,
    PIG_MELT_RATES,
    SplitSpec,
    helheim_split_spec,
    pig_split_spec,
)

logger = get_logger(__name__)

SCENARIOS = ("helheim", "pig")
_PRESETS = {"helheim": SimConfig.helheim_like, "pig": SimConfig.pig_like}


class UsageError(ValueError):
    """Invalid command-line usage or run configuration (exit code 1)."""


def default_param_grid(scenario: str) -> Tuple[float, ...]:
    """Seven calving thresholds 0.70..1.00 MPa (in Pa) or 36 melt rates 0..70 m/yr."""
    if scenario == "helheim":
        return tuple(sorted(v * 1e6 for v in HELHEIM_TRAINVAL_MPA + HELHEIM_TEST_MPA))
    return PIG_MELT_RATES


@dataclass(frozen=True)
class RunConfig:
    """Everything one workflow run needs.

    Attributes:
        scenario: "helheim" (calving sweep) or "pig" (melt sweep).
        sim_overrides: SimConfig fields replacing the preset's.
        params: Scenario parameter grid; empty means the preset grid.
        models: Emulator kinds to train/evaluate/benchmark.
        model_overrides: ModelConfig fields applied to every kind.
        train: Optimizer settings.
        split: Split definition; None means the scenario's preset split.
        dataset: Edge-attribute mode and 10th-feature choice.
        out_dir: Artifact directory.
        seed: Seed of the oracle bed, mesh jitter and weight init.
        threads: Worker threads for the oracle sweep and evaluation.
        masked_eval: Score only ice-covered nodes.
        repeats: Benchmark repetitions.
    """

    scenario: str = "helheim"
    sim_overrides: Dict[str, Any] = field(default_factory=dict)
    params: Tuple[float, ...] = ()
    models: Tuple[str, ...] = ("egcn",)
    model_overrides: Dict[str, Any] = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: Optional[SplitSpec] = None
    dataset: DatasetOptions = field(default_factory=DatasetOptions)
    out_dir: str = "runs/helheim"
    seed: int = 0
    threads: int = 1
    masked_eval: bool = True
    repeats: int = 3

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UsageError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "models", tuple(self.models))
        unknown = [m for m in self.models if m not in MODEL_KINDS]
        if unknown:
            raise UsageError(f"unknown model kinds {unknown}; expected some of {MODEL_KINDS}")
        if self.threads < 1:
            raise UsageError(f"threads must be >= 1, got {self.threads}")
        if self.repeats < 1:
            raise UsageError(f"repeats must be >= 1, got {self.repeats}")
        if not self.param_grid():
            raise UsageError("the parameter grid is empty")

    def sim_config(self) -> SimConfig:
        overrides = {"seed": self.seed, **self.sim_overrides}
        return _PRESETS[self.scenario](**overrides)

    def param_grid(self) -> Tuple[float, ...]:
        return self.params or default_param_grid(self.scenario)

    def scenario_params(self) -> List[ScenarioParams]:
        kind = "calving" if self.scenario == "helheim" else "melt"
        return [ScenarioParams(kind, value) for value in self.param_grid()]

    def model_config(self, kind: str) -> ModelConfig:
        return ModelConfig(kind=kind, **self.model_overrides)

    def split_spec(self) -> SplitSpec:
        """Explicit split, else the preset split when it covers the grid, else all-train/val."""
        if self.split is not None:
            return self.split
        preset = helheim_split_spec(self.seed) if self.scenario == "helheim" else pig_split_spec(self.seed)
        known = preset.trainval_values + preset.test_values
        if all(any(abs(p - k) <= 1e-9 * max(1.0, abs(k)) for k in known) for p in self.param_grid()):
            return preset
        logger.warning("parameter grid differs from the preset split; using every value for train/val")
        return SplitSpec(trainval_values=self.param_grid(), test_values=(), seed=self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "sim_overrides": dict(self.sim_overrides),
            "params": list(self.params),
            "models": list(self.models),
            "model_overrides": dict(self.model_overrides),
            "train": self.train.to_dict(),
            "split": None if self.split is None else self.split.to_dict(),
            "dataset": {"edge_mode": self.dataset.edge_mode, "extra_feature": self.dataset.extra_feature},
            "out_dir": self.out_dir,
            "seed": self.seed,
            "threads": self.threads,
            "masked_eval": self.masked_eval,
            "repeats": self.repeats,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        Raises:
            UsageError: On unknown keys or invalid values
        """
        known = set(cls().to_dict())
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown run config keys: {sorted(unknown)}")
        try:
            kwargs = dict(data)
            if "train" in kwargs:
                kwargs["train"] = TrainConfig.from_dict(kwargs["train"])
            if kwargs.get("split") is not None:
                kwargs["split"] = SplitSpec.from_dict(kwargs["split"])
            if "dataset" in kwargs:
                kwargs["dataset"] = DatasetOptions(**kwargs["dataset"])
            for key in ("params", "models"):
                if key in kwargs:
                    kwargs[key] = tuple(kwargs[key])
            config = cls(**kwargs)
            config.sim_config()
            for kind in config.models:
                config.model_config(kind)
        except UsageError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise UsageError(f"invalid run config: {e}") from e
        return config

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        return path

    def with_overrides(self, **changes: Any) -> "RunConfig":
        """Copy with top-level fields replaced (``None`` values are ignored)."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})
