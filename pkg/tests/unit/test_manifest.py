"""
Unit tests for icdcoder.services.manifest.
"""

from __future__ import annotations

import hashlib
import json

from icdcoder import __version__
from icdcoder.services.manifest import RunManifest, file_sha256, manifest_path


def test_file_sha256(tmp_path) -> None:
    p = tmp_path / "a.txt"
    p.write_bytes(b"I10\n")
    assert file_sha256(p) == hashlib.sha256(b"I10\n").hexdigest()


def test_manifest_path_appends_suffix(tmp_path) -> None:
    assert manifest_path(tmp_path / "out.jsonl").name == "out.jsonl.manifest.json"


def test_finish_writes_manifest(tmp_path) -> None:
    src = tmp_path / "in.jsonl"
    src.write_text("{}\n", encoding="utf-8")
    out = tmp_path / "out.jsonl"

    m = RunManifest(command="clean", config_hash="abc")
    m.add_inputs([src, None])
    m.seeds["split"] = 3
    m.outputs.append(str(out))
    written = m.finish(out)

    doc = json.loads(written.read_text(encoding="utf-8"))
    assert doc["command"] == "clean"
    assert doc["config_hash"] == "abc"
    assert doc["inputs"] == {str(src): hashlib.sha256(b"{}\n").hexdigest()}
    assert doc["seeds"] == {"split": 3}
    assert doc["outputs"] == [str(out)]
    assert doc["version"] == __version__
    assert doc["finished_at"] is not None and doc["started_at"] <= doc["finished_at"]
