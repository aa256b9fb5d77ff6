"""Run manifests: every CLI command records its effective configuration,
seed, and output files, and any manifest can be replayed to reproduce the
outputs bit-for-bit (wall-clock duration aside)."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version

SCHEMA_VERSION = 1


def _artifact_version() -> str:
    try:
        return version("finqlab")
    except PackageNotFoundError:
        return "unknown"


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    duration_s: float = 0.0
    artifact_version: str = field(default_factory=_artifact_version)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": self.schema_version,
                "command": self.command,
                "config": self.config,
                "seed": self.seed,
                "inputs": self.inputs,
                "outputs": self.outputs,
                "duration_s": self.duration_s,
                "artifact_version": self.artifact_version,
            },
            indent=2,
        )

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def load_manifest(path) -> RunManifest:
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema_version {obj.get('schema_version')}")
    return RunManifest(
        command=obj["command"],
        config=obj["config"],
        seed=obj.get("seed"),
        inputs=obj.get("inputs", []),
        outputs=obj.get("outputs", []),
        duration_s=obj.get("duration_s", 0.0),
        artifact_version=obj.get("artifact_version", "unknown"),
    )


class Timed:
    """Context manager capturing wall-clock duration for a manifest."""

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.duration = time.monotonic() - self.start
        return False
