"""Artifact store module.

Canonical locations for every file a run produces under one output
directory, plus a ``manifest.json`` that records, per workflow stage, which
artifacts were written and their SHA-256 digests.

Layout::

    <out>/mesh.json
    <out>/trajectories/<scenario_id>.bin
    <out>/dataset.bin
    <out>/models/<kind>.ckpt
    <out>/models/<kind>.history.json
    <out>/metrics/<kind>.csv, <out>/metrics.csv
    <out>/timing.json
    <out>/manifest.json
"""

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from ndnn.container import ArtifactError
from observability.logging_config import get_logger

logger = get_logger(__name__)

VALID_STAGES = ["generate", "train", "evaluate", "benchmark"]
MANIFEST_NAME = "manifest.json"


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class ArtifactStore:
    """
    File layout and run manifest of one output directory.

    Attributes:
        root: Output directory (created on first write)
    """

    def __init__(self, out_dir: Union[str, Path]):
        self.root = Path(out_dir)

    @property
    def mesh_path(self) -> Path:
        return self.root / "mesh.json"

    @property
    def dataset_path(self) -> Path:
        return self.root / "dataset.bin"

    @property
    def timing_path(self) -> Path:
        return self.root / "timing.json"

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def trajectory_path(self, scenario_id: str) -> Path:
        return self.root / "trajectories" / f"{scenario_id}.bin"

    def checkpoint_path(self, model_kind: str) -> Path:
        return self.root / "models" / f"{model_kind}.ckpt"

    def history_path(self, model_kind: str) -> Path:
        return self.root / "models" / f"{model_kind}.history.json"

    def metrics_path(self, model_kind: Optional[str] = None) -> Path:
        if model_kind is None:
            return self.root / "metrics.csv"
        return self.root / "metrics" / f"{model_kind}.csv"

    def require(self, path: Path, produced_by: str) -> Path:
        """
        Raises:
            ArtifactError: If ``path`` does not exist, naming the stage that makes it
        """
        if not path.exists():
            raise ArtifactError(f"missing artifact {path}; run the '{produced_by}' command first")
        return path

    def save_json(self, path: Path, data: Any) -> Path:
        """Write prettified JSON, creating parent directories."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
        return path

    def load_manifest(self) -> Dict[str, Any]:
        if not self.manifest_path.exists():
            return {"stages": {stage: None for stage in VALID_STAGES}}
        with open(self.manifest_path, "r", encoding="utf-8") as f:
            return json.load(f)

    def record_stage(self, stage_name: str, artifacts: Sequence[Path], details: Optional[Dict[str, Any]] = None) -> None:
        """
        Record the artifacts a stage produced.

        Args:
            stage_name: One of "generate", "train", "evaluate", "benchmark"
            artifacts: Files written by the stage
            details: Extra JSON-serializable facts (counts, hashes, seeds)

        Raises:
            ValueError: If stage_name is invalid
        """
        if stage_name not in VALID_STAGES:
            raise ValueError(f"Invalid stage_name: {stage_name}. Must be one of: {VALID_STAGES}")
        manifest = self.load_manifest()
        manifest.setdefault("stages", {})[stage_name] = {
            "updated_at": datetime.now().isoformat(timespec="seconds"),
            "artifacts": [
                {"path": str(Path(p).relative_to(self.root)), "sha256": file_digest(p)} for p in artifacts
            ],
            "details": details or {},
        }
        self.save_json(self.manifest_path, manifest)
        logger.info(f"Recorded stage '{stage_name}': {len(artifacts)} artifacts in {self.root}")
