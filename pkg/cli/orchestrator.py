"""Workflow orchestrator.

``EmulatorOrchestrator`` coordinates the four workflow stages over one
artifact directory:

1. generate: oracle sweep -> mesh, trajectories, dataset
2. train: dataset -> split -> one checkpoint and history per emulator
3. evaluate: checkpoints + held-out samples -> metrics CSVs
4. benchmark: oracle and emulators timed on the same sweep

The oracle sweep fans out over worker threads; everything else runs in
order so outputs depend only on the run config and its seed.
"""

import asyncio
import json
from typing import Any, Dict, List, Optional

from cli.run_config import RunConfig, UsageError
from gnn.models import build_model, load_model, save_model
from icesim.config import ScenarioParams
from icesim.meshgen import generate_mesh
from icesim.transient import Trajectory, save_trajectory, simulate
from mesh.trimesh import TriMesh
from observability.logging_config import get_logger
from observability.tracing import trace_stage
from pipeline.artifact_store import ArtifactStore
from pipeline.benchmark import TimingReport, benchmark
from pipeline.dataset import Dataset, build_dataset, load_dataset, save_dataset
from pipeline.metrics import MetricsReport, evaluate, write_metrics_csv
from pipeline.normalization import nominal_bounds
from pipeline.splits import split_dataset
from pipeline.training import train

logger = get_logger(__name__)


class ScenarioDataError(ValueError):
    """An oracle run rejected its inputs."""

    def __init__(self, scenario_id: str, cause: Exception):
        self.scenario_id = scenario_id
        super().__init__(f"scenario {scenario_id} failed: {type(cause).__name__}: {cause}")


class ScenarioNumericError(ArithmeticError):
    """An oracle run broke down numerically."""

    def __init__(self, scenario_id: str, cause: Exception):
        self.scenario_id = scenario_id
        super().__init__(f"scenario {scenario_id} failed: {type(cause).__name__}: {cause}")


class EmulatorOrchestrator:
    """
    Runs the workflow stages for one run config.

    Attributes:
        run_config: The run being executed
        store: Artifact layout and manifest of ``run_config.out_dir``
    """

    def __init__(self, run_config: RunConfig, store: Optional[ArtifactStore] = None):
        self.run_config = run_config
        self.store = store or ArtifactStore(run_config.out_dir)

    # ------------------------------------------------------------------ generate

    async def _run_scenario(self, params: ScenarioParams, mesh: TriMesh, semaphore: asyncio.Semaphore) -> Trajectory:
        config = self.run_config.sim_config()
        async with semaphore:
            try:
                return await asyncio.to_thread(simulate, config, params, config.seed, mesh)
            except ArithmeticError as e:
                raise ScenarioNumericError(params.scenario_id, e) from e
            except ValueError as e:
                raise ScenarioDataError(params.scenario_id, e) from e

    async def run_sweep(self, mesh: TriMesh) -> List[Trajectory]:
        """Run every scenario of the grid on ``mesh``; results sorted by scenario id."""
        semaphore = asyncio.Semaphore(self.run_config.threads)
        tasks = [self._run_scenario(p, mesh, semaphore) for p in self.run_config.scenario_params()]
        trajectories = await asyncio.gather(*tasks)
        return sorted(trajectories, key=lambda t: t.scenario_id)

    @trace_stage("generate")
    async def generate(self) -> Dict[str, Any]:
        """
        Run the oracle sweep and write mesh, trajectories and dataset.

        Returns:
            Summary with scenario and sample counts

        Raises:
            ScenarioDataError / ScenarioNumericError: If a scenario fails
        """
        rc = self.run_config
        sim = rc.sim_config()
        mesh = generate_mesh(sim)
        mesh.save_json(self.store.mesh_path)

        trajectories = await self.run_sweep(mesh)
        written = [self.store.mesh_path]
        for traj in trajectories:
            written.append(save_trajectory(self.store.trajectory_path(traj.scenario_id), traj))

        bounds = nominal_bounds(sim, extra_feature=rc.dataset.extra_feature)
        dataset = build_dataset(trajectories, mesh, bounds=bounds, options=rc.dataset)
        written.append(save_dataset(self.store.dataset_path, dataset))

        summary = {
            "scenario": rc.scenario,
            "n_nodes": mesh.n_nodes,
            "n_scenarios": len(trajectories),
            "states_per_scenario": sim.n_steps + 1,
            "n_samples": len(dataset),
            "bounds_hash": dataset.bounds_hash,
            "seed": rc.seed,
        }
        self.store.record_stage("generate", written, summary)
        return summary

    # ------------------------------------------------------------------ train

    def _load_dataset(self) -> Dataset:
        return load_dataset(self.store.require(self.store.dataset_path, "generate"))

    def _split(self, dataset: Dataset):
        return split_dataset(dataset.samples, self.run_config.split_spec())

    def _require_models(self) -> None:
        if not self.run_config.models:
            raise UsageError("no model kinds selected; pass --model egcn,gcn,fcn or set 'models' in the config")

    def _train_one(self, kind: str, dataset: Dataset, train_set, val_set) -> Dict[str, Any]:
        rc = self.run_config
        model = build_model(rc.model_config(kind), seed=rc.seed)
        model, history = train(model, train_set, val_set, rc.train)
        metadata = {
            "bounds_hash": dataset.bounds_hash,
            "train_config": rc.train.to_dict(),
            "split": rc.split_spec().to_dict(),
            "seed": rc.seed,
            "best_epoch": history.best_epoch,
            "best_loss": history.best_loss,
            "n_train": len(train_set),
            "n_val": len(val_set),
        }
        ckpt = save_model(self.store.checkpoint_path(kind), model, metadata)
        hist = history.save_json(self.store.history_path(kind))
        last = history.records[-1] if history.records else None
        return {
            "model": kind,
            "checkpoint": ckpt,
            "history": hist,
            "epochs": len(history.records),
            "train_loss": last.train_loss if last else None,
            "val_loss": last.val_loss if last else None,
            "best_epoch": history.best_epoch,
            "best_loss": history.best_loss,
            "wall_time_s": history.wall_time_s,
        }

    @trace_stage("train")
    async def train(self) -> List[Dict[str, Any]]:
        """Train every selected emulator on the train split; one checkpoint and history each."""
        self._require_models()
        dataset = self._load_dataset()
        train_set, val_set, test_set = self._split(dataset)
        logger.info(f"Split: {len(train_set)} train / {len(val_set)} val / {len(test_set)} test samples")

        results = []
        for kind in self.run_config.models:
            results.append(await asyncio.to_thread(self._train_one, kind, dataset, train_set, val_set))

        written = [p for r in results for p in (r["checkpoint"], r["history"])]
        details = {
            "split": {"train": len(train_set), "val": len(val_set), "test": len(test_set)},
            "models": [{k: v for k, v in r.items() if k not in ("checkpoint", "history", "wall_time_s")}
                       for r in results],
        }
        self.store.record_stage("train", written, details)
        return results

    # ------------------------------------------------------------------ evaluate

    def _load_checkpoint(self, kind: str):
        return load_model(self.store.require(self.store.checkpoint_path(kind), "train"))

    @trace_stage("evaluate")
    async def evaluate(self) -> List[MetricsReport]:
        """
        Score every selected emulator on the held-out split.

        Writes ``metrics/<kind>.csv`` per model and the merged ``metrics.csv``.

        Raises:
            ArtifactError: If the dataset or a checkpoint is missing
            BoundsMismatchError: If a checkpoint was trained on other bounds
        """
        self._require_models()
        rc = self.run_config
        dataset = self._load_dataset()
        _, _, test_set = self._split(dataset)

        reports = []
        for kind in rc.models:
            model, header = self._load_checkpoint(kind)
            report = await asyncio.to_thread(
                evaluate, model, test_set, dataset.bounds, rc.masked_eval, rc.threads, kind,
                header.get("bounds_hash"),
            )
            write_metrics_csv(self.store.metrics_path(kind), [report])
            reports.append(report)

        merged = write_metrics_csv(self.store.metrics_path(), reports)
        written = [self.store.metrics_path(kind) for kind in rc.models] + [merged]
        details = {
            "n_test": len(test_set),
            "masked": rc.masked_eval,
            "mask_accuracy": {r.model: {repr(p): a for p, a in sorted(r.mask_accuracy.items())} for r in reports},
        }
        self.store.record_stage("evaluate", written, details)
        return reports

    # ------------------------------------------------------------------ benchmark

    def _training_seconds(self, kind: str) -> Optional[float]:
        path = self.store.history_path(kind)
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f).get("wall_time_s")

    @trace_stage("benchmark")
    async def benchmark(self) -> TimingReport:
        """
        Time the oracle sweep and each selected emulator on the same sweep.

        With no models selected only the oracle is timed. Emulators predict
        the dataset's samples; the oracle re-solves on the dataset's mesh.
        """
        rc = self.run_config
        models: Dict[str, Any] = {}
        samples: List[Any] = []
        mesh = None
        training_seconds: Dict[str, float] = {}
        if rc.models:
            dataset = self._load_dataset()
            samples = dataset.samples
            mesh = dataset.mesh
            for kind in rc.models:
                models[kind], _ = self._load_checkpoint(kind)
                seconds = self._training_seconds(kind)
                if seconds is not None:
                    training_seconds[kind] = seconds

        report = benchmark(
            rc.sim_config(),
            rc.scenario_params(),
            models=models,
            samples=samples,
            mesh=mesh,
            seed=rc.seed,
            repeats=rc.repeats,
            training_seconds=training_seconds,
        )
        path = report.save_json(self.store.timing_path)
        self.store.record_stage("benchmark", [path], {"engines": [e.engine for e in report.engines]})
        return report
