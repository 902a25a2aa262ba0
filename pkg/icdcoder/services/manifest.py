from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from icdcoder import __version__
from icdcoder.transport.jsonl import write_json

MANIFEST_SUFFIX = ".manifest.json"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path(primary_output: str | Path) -> Path:
    p = Path(primary_output)
    return p.with_name(p.name + MANIFEST_SUFFIX)


@dataclass
class RunManifest:
    """
    Provenance record written next to a subcommand's primary output.

    Parameters
    ----------
    command
        Subcommand name.
    config_hash
        `PipelineConfig.config_hash` of the resolved configuration.
    inputs
        Input file path -> SHA-256 of its bytes.
    seeds
        Seeds that influenced the run (split seed, mock seeds, ...).
    outputs
        Files written by the run.
    """

    command: str
    config_hash: str
    inputs: Dict[str, str] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    version: str = __version__
    started_at: str = field(default_factory=_utc_now)
    finished_at: Optional[str] = None

    def add_inputs(self, paths: Sequence[Optional[str | Path]]) -> None:
        for p in paths:
            if p is not None:
                self.inputs[str(p)] = file_sha256(p)

    def to_json(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "inputs": dict(sorted(self.inputs.items())),
            "seeds": dict(sorted(self.seeds.items())),
            "outputs": list(self.outputs),
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def finish(self, primary_output: str | Path) -> Path:
        """
        Stamp the end time and write ``<primary_output>.manifest.json`` atomically.

        Returns
        -------
        Path
            Location of the manifest.
        """
        self.finished_at = _utc_now()
        out = manifest_path(primary_output)
        write_json(out, self.to_json())
        return out
