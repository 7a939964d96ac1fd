"""Run manifests: every CLI invocation records what produced its outputs.

The manifest is written atomically (temp file + rename) before any result
file, then finalized with the end timestamp after the run.  Result files
reference the manifest by name but never embed timestamps themselves, so
reruns with the same seed and config produce byte-identical results while
the manifest alone carries the wall-clock record.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction

from . import __version__

MANIFEST_NAME = "manifest.json"


def json_default(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if hasattr(obj, "to_json_dict"):
        return obj.to_json_dict()
    if isinstance(obj, float) and math.isinf(obj):
        return "infinity" if obj > 0 else "-infinity"
    try:
        import numpy as np

        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
    except ImportError:
        pass
    raise TypeError(f"not JSON serializable: {type(obj)}")


def dump_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=json_default)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.write("\n")
    os.replace(tmp, path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    started: str = ""
    finished: str | None = None
    outputs: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": list(self.outputs),
        }


class ManifestWriter:
    """Owns the output directory for one command run."""

    def __init__(self, out_dir: str, command: str, config: dict, seed: int | None):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.manifest = RunManifest(
            command=command, config=config, seed=seed, started=_now()
        )
        self.path = os.path.join(out_dir, MANIFEST_NAME)

    def declare(self, *filenames: str) -> None:
        for name in filenames:
            if name not in self.manifest.outputs:
                self.manifest.outputs.append(name)
        dump_json(self.manifest.to_json_dict(), self.path)

    def result_path(self, filename: str) -> str:
        if filename not in self.manifest.outputs:
            self.declare(filename)
        return os.path.join(self.out_dir, filename)

    def finalize(self) -> None:
        self.manifest.finished = _now()
        dump_json(self.manifest.to_json_dict(), self.path)


def report_envelope(writer: ManifestWriter, payload: dict) -> dict:
    """Standard result-file wrapper pointing back at the manifest."""
    return {"manifest": MANIFEST_NAME, "command": writer.manifest.command, **payload}
