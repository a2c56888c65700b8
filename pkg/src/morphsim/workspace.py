"""On-disk layout for designs, datasets, checkpoints, and reports.

Every stored artifact is content-hashed into a manifest so stale or
tampered files are detectable; the root comes from MORPHSIM_WORKSPACE or
defaults to ./workspace.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

KINDS = ("designs", "datasets", "checkpoints", "reports")


class Workspace:
    def __init__(self, root: str | os.PathLike | None = None):
        root = root or os.environ.get("MORPHSIM_WORKSPACE", "workspace")
        self.root = Path(root)
        for kind in KINDS:
            (self.root / kind).mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.root / "manifest.json"
        self._lock = threading.Lock()
        self._id_locks: dict[str, threading.Lock] = {}

    def path(self, kind: str, name: str) -> Path:
        if kind not in KINDS:
            raise ValueError(f"unknown artifact kind {kind!r}")
        if "/" in name or "\\" in name or name.startswith("."):
            raise ValueError(f"unsafe artifact name {name!r}")
        return self.root / kind / name

    def _load_manifest(self) -> dict:
        if self._manifest_path.exists():
            with open(self._manifest_path) as f:
                return json.load(f)
        return {"artifacts": {}}

    def _record(self, kind: str, name: str, path: Path) -> None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        with self._lock:
            manifest = self._load_manifest()
            manifest["artifacts"][f"{kind}/{name}"] = {"sha256": digest}
            with open(self._manifest_path, "w") as f:
                json.dump(manifest, f, indent=2, sort_keys=True)

    def id_lock(self, name: str) -> threading.Lock:
        with self._lock:
            if name not in self._id_locks:
                self._id_locks[name] = threading.Lock()
            return self._id_locks[name]

    def write_text(self, kind: str, name: str, text: str) -> Path:
        path = self.path(kind, name)
        with self.id_lock(f"{kind}/{name}"):
            path.write_text(text)
            self._record(kind, name, path)
        return path

    def read_text(self, kind: str, name: str) -> str:
        return self.path(kind, name).read_text()

    def exists(self, kind: str, name: str) -> bool:
        return self.path(kind, name).exists()

    def verify(self, kind: str, name: str) -> bool:
        """True when the stored hash matches the file content."""
        manifest = self._load_manifest()
        entry = manifest["artifacts"].get(f"{kind}/{name}")
        if entry is None:
            return False
        digest = hashlib.sha256(self.path(kind, name).read_bytes()).hexdigest()
        return digest == entry["sha256"]

    def list(self, kind: str) -> list[str]:
        return sorted(p.name for p in (self.root / kind).iterdir() if p.is_file())
