"""Run manifests and atomic artifact writes.

Every pipeline command records what it resolved (config), what it read
(sha256 digests), and what it wrote (output paths), so a later run can
detect any input drift by re-hashing. Output files land via a temp file
plus rename, which keeps failed runs from leaving partial artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from hscl import __version__

_HASH_CHUNK = 1 << 20


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        while True:
            chunk = handle.read(_HASH_CHUNK)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    half-written file and aborted runs leave nothing behind at ``path``."""
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        _restore_umask_mode(tmp_name)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _restore_umask_mode(tmp_name: str) -> None:
    # mkstemp creates 0600; give the artifact normal umask-derived permissions
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp_name, 0o666 & ~umask)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass
class RunManifest:
    """Provenance record for one pipeline command.

    ``config`` holds the fully resolved parameter set (defaults, config
    file, and flags already merged); ``inputs`` maps each input path to
    its sha256 hex digest; ``outputs`` lists every file the run wrote.
    """

    command: str
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    toolkit_version: str = __version__
    started_utc: str = ""
    elapsed_seconds: float = 0.0

    def to_json(self) -> str:
        payload = asdict(self)
        payload["outputs"] = [str(p) for p in self.outputs]
        payload["inputs"] = {str(k): v for k, v in self.inputs.items()}
        return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        payload = json.loads(text)
        unknown = set(payload) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown manifest fields {sorted(unknown)}")
        return cls(**payload)


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON-serializable: {value!r}")


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    atomic_write_text(path, manifest.to_json())


def read_manifest(path: str | Path) -> RunManifest:
    return RunManifest.from_json(Path(path).read_text(encoding="utf-8"))
