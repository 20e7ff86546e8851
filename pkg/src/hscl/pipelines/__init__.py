"""Patch archives, run manifests, the linear probe, and the CLI front end."""

from hscl.pipelines.archive import (
    ArchiveFormatError,
    PatchArchive,
    load_archive,
    majority_label,
    save_archive,
)
from hscl.pipelines.manifest import (
    RunManifest,
    atomic_write_bytes,
    atomic_write_text,
    read_manifest,
    sha256_file,
    write_manifest,
)
from hscl.pipelines.probe import ProbeReport, linear_probe, train_linear_probe

__all__ = [
    "ArchiveFormatError",
    "PatchArchive",
    "ProbeReport",
    "RunManifest",
    "atomic_write_bytes",
    "atomic_write_text",
    "linear_probe",
    "load_archive",
    "majority_label",
    "read_manifest",
    "save_archive",
    "sha256_file",
    "train_linear_probe",
    "write_manifest",
]
