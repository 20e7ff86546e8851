"""Hyperspectral cube data model, binary I/O, patching, band selection, synthesis."""

from hscl.hsi.cube import (
    ENMAP_RANGE_NM,
    CubeFormatError,
    HyperCube,
    cube_from_bytes,
    cube_to_bytes,
    load_cube,
    load_labels,
    save_cube,
    save_labels,
)
from hscl.hsi.patches import Patch, PatchGridSpec, extract_patches
from hscl.hsi.bands import BandSelector, fit_pca, jacobi_eigh, select_bands
from hscl.hsi.synth import SynthSpec, synth_cube

__all__ = [
    "ENMAP_RANGE_NM",
    "CubeFormatError",
    "HyperCube",
    "cube_from_bytes",
    "cube_to_bytes",
    "load_cube",
    "load_labels",
    "save_cube",
    "save_labels",
    "Patch",
    "PatchGridSpec",
    "extract_patches",
    "BandSelector",
    "fit_pca",
    "jacobi_eigh",
    "select_bands",
    "SynthSpec",
    "synth_cube",
]
