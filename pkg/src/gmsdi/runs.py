"""Run manifests: everything needed to replay a CLI job and check its outputs."""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import FormatError

RUN_FORMAT = "gmsdi-run"
RUN_VERSION = 1
RUN_NAME = "run.json"


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_outputs(root: str | Path) -> dict[str, str]:
    """sha256 of every file under ``root`` except the run manifest itself."""
    root = Path(root)
    return {
        p.relative_to(root).as_posix(): sha256_file(p)
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != RUN_NAME
    }


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict = field(default_factory=dict)
    schedule: dict | None = None
    checkpoint_sha256: str | None = None
    started: str = field(default_factory=now_iso)
    finished: str | None = None
    outputs: dict[str, str] = field(default_factory=dict)
    environment: dict = field(default_factory=lambda: {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
    })

    def to_json(self) -> dict:
        return {"format": RUN_FORMAT, "version": RUN_VERSION, **asdict(self)}

    def write(self, directory: str | Path) -> Path:
        path = Path(directory) / RUN_NAME
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / RUN_NAME
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", field="json", path=str(path)) from exc
        if data.get("format") != RUN_FORMAT:
            raise FormatError("not a run manifest", field="format", path=str(path))
        if data.get("version") != RUN_VERSION:
            raise FormatError(f"unsupported run manifest version {data.get('version')}", field="version", path=str(path))
        data.pop("format")
        data.pop("version")
        try:
            return cls(**data)
        except TypeError as exc:
            raise FormatError(str(exc), field="fields", path=str(path)) from exc
