"""Command-line front end wiring the toolkit into reproducible runs.

Subcommands: synth, extract, pretrain, retrieve, probe, metrics. Every
option can come from a ``key=value`` config file (``--config run.cfg``)
with explicit flags taking precedence. Reports are tab-separated UTF-8 on
stdout; progress and warnings go to stderr. Exit codes: 0 success, 2
validation failure, 1 runtime failure. All parameters are validated, and
all inputs loaded, before anything is written, so a failed run never
leaves partial outputs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from hscl.contrastive.augment import default_augmentations
from hscl.contrastive.pretrain import LOG_HEADER, embed_patches, pretrain
from hscl.engine.backbone import VARIANTS, Backbone, BackboneConfig, init_rng
from hscl.engine.checkpoint import load_checkpoint, save_checkpoint
from hscl.engine.optim import OptimizerState
from hscl.hsi.bands import BandSelector, fit_pca, select_bands
from hscl.hsi.cube import cube_to_bytes, labels_to_bytes, load_cube, load_labels
from hscl.hsi.patches import Patch, PatchGridSpec, extract_patches
from hscl.hsi.synth import SynthSpec, synth_cube
from hscl.metrics.hspl import hspl
from hscl.metrics.quality import MetricReport, cc, ergas, psnr, rmse, sam, topk_retrieval
from hscl.pipelines.archive import PatchArchive, load_archive, majority_label, save_archive
from hscl.pipelines.manifest import (
    RunManifest,
    _restore_umask_mode,
    atomic_write_bytes,
    atomic_write_text,
    sha256_file,
    write_manifest,
)
from hscl.pipelines.probe import linear_probe

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2

DEFAULT_ERGAS_RATIO = 0.25


class CliError(ValueError):
    """Validation failure: wrong flags, bad config, or unmet preconditions."""


@contextmanager
def _validation():
    """Everything inside runs before any output write; a ValueError here is
    a precondition failure and maps to exit code 2."""
    try:
        yield
    except CliError:
        raise
    except ValueError as exc:
        raise CliError(str(exc)) from exc


@dataclass(frozen=True)
class Opt:
    """One command option; ``kind`` is the string coercion, None marks a
    boolean flag. ``default`` None plus ``required`` means it must arrive
    via flag or config file."""

    name: str
    kind: object
    default: object
    help: str
    required: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


def _csv_ints(text: str) -> tuple:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError(f"expected comma-separated integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_SYNTH_OPTS = (
    Opt("out-cube", str, None, "output HKC1 cube path", required=True),
    Opt("out-labels", str, None, "output HKL1 label raster path", required=True),
    Opt("classes", int, 8, "number of region classes"),
    Opt("height", int, 256, "cube height in pixels"),
    Opt("width", int, 256, "cube width in pixels"),
    Opt("bands", int, 32, "spectral band count"),
    Opt("noise-sigma", float, 0.01, "per-pixel noise level; nuisance terms scale with it"),
    Opt("region-size", int, 32, "side of the square single-class regions"),
    Opt("gain-amp", float, 3.0, "gain-field strength, in units of noise-sigma"),
    Opt("offset-amp", float, 3.0, "offset-field per-band RMS, in units of noise-sigma"),
    Opt("gain-length", int, 16, "gain-field spatial correlation length, pixels"),
    Opt("offset-length", int, 16, "offset-field spatial correlation length, pixels"),
    Opt("seed", int, 7, "generator seed"),
)

_EXTRACT_OPTS = (
    Opt("cube", str, None, "input HKC1 cube", required=True),
    Opt("out", str, None, "output patch archive path", required=True),
    Opt("labels", str, None, "input HKL1 raster; patch labels are the window majority"),
    Opt("patch-size", int, 32, "square patch side in pixels"),
    Opt("overlap", float, 0.05, "window overlap fraction in [0, 1)"),
)

_PRETRAIN_OPTS = (
    Opt("patches", str, None, "input patch archive", required=True),
    Opt("out-checkpoint", str, None, "output checkpoint path", required=True),
    Opt("log-file", str, None, "per-epoch TSV log (default: <out-checkpoint>.log.tsv)"),
    Opt("variant", str, "seb", "stage attention variant: " + "|".join(VARIANTS)),
    Opt("cardinality", int, 4, "grouped-convolution group count"),
    Opt("stage-channels", _csv_ints, (32, 64, 128), "comma-separated stage widths"),
    Opt("embedding-dim", int, 128, "backbone output width (must equal last stage width)"),
    Opt("projection-dim", int, 64, "projection head output width"),
    Opt("band-select", str, "none", "band selection before training: none|pca"),
    Opt("pca-components", int, 8, "PCA component count when --band-select pca"),
    Opt("epochs", int, 50, "training epochs (0 writes the fresh initialization)"),
    Opt("batch", int, 32, "patches per step; each yields two augmented views"),
    Opt("tau", float, 0.5, "contrastive temperature"),
    Opt("lr", float, 1e-4, "base learning rate"),
    Opt("lr-decay", float, 0.1, "multiplier applied at each schedule drop; 1 disables"),
    Opt("lr-step-frac", float, 0.4, "drop the rate every this fraction of total epochs"),
    Opt("seed", int, 0, "run seed driving init, sampling, and augmentation"),
    Opt("aug-noise-sigma", float, 0.02, "augmentation white-noise level"),
    Opt("aug-band-dropout", float, 0.1, "per-band dropout probability"),
    Opt("crop-min", float, 0.6, "minimum crop scale"),
    Opt("crop-max", float, 1.0, "maximum crop scale"),
)

_RETRIEVE_OPTS = (
    Opt("checkpoint", str, None, "trained checkpoint", required=True),
    Opt("patches", str, None, "labeled patch archive", required=True),
    Opt("k", int, 5, "report Top-1 through Top-K accuracy"),
    Opt("batch", int, 64, "embedding batch size"),
    Opt("report", str, None, "also write the report to this file"),
)

_PROBE_OPTS = (
    Opt("checkpoint", str, None, "trained checkpoint", required=True),
    Opt("patches", str, None, "labeled patch archive", required=True),
    Opt("train-frac", float, 0.5, "fraction of patches used to fit the probe"),
    Opt("steps", int, 300, "Adam step budget for the linear layer"),
    Opt("lr", float, 1e-2, "probe learning rate"),
    Opt("seed", int, 0, "split and probe-init seed"),
    Opt("batch", int, 64, "embedding batch size"),
    Opt("shuffle-labels", None, False, "shuffle the label vector first (chance control)"),
    Opt("report", str, None, "also write the report to this file"),
)

_METRICS_OPTS = (
    Opt("reference", str, None, "reference HKC1 cube", required=True),
    Opt("estimate", str, None, "estimate HKC1 cube", required=True),
    Opt("ergas-ratio", float, None, "resolution ratio in (0, 1]; defaults to 0.25 with a warning"),
    Opt("checkpoint", str, None, "also report the feature-space loss under this encoder"),
    Opt("report", str, None, "also write the report to this file"),
)


def _read_config_file(path: str, opts: tuple) -> dict:
    by_dest = {o.dest: o for o in opts}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        dest = key.strip().replace("-", "_")
        opt = by_dest.get(dest)
        if opt is None:
            raise CliError(f"{path}:{lineno}: unknown key {key.strip()!r}")
        try:
            values[dest] = _parse_bool(value.strip()) if opt.kind is None else opt.kind(value.strip())
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: bad value for {key.strip()!r}: {exc}") from exc
    return values


def _resolve(opts: tuple, ns: argparse.Namespace) -> dict:
    """Defaults, then config-file values, then explicit flags."""
    cfg = {o.dest: o.default for o in opts}
    if ns.config:
        cfg.update(_read_config_file(ns.config, opts))
    cfg.update(
        {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    )
    missing = [o.name for o in opts if o.required and cfg[o.dest] is None]
    if missing:
        raise CliError("missing required option(s): " + ", ".join("--" + m for m in missing))
    return cfg


def _require_file(path_text: str, what: str) -> Path:
    path = Path(path_text)
    if not path.is_file():
        raise CliError(f"{what} {path} does not exist")
    return path


def _check_parent(path: Path) -> Path:
    if not path.parent.is_dir():
        raise CliError(f"output directory {path.parent} does not exist")
    return path


def _clock() -> tuple:
    return datetime.now(timezone.utc).isoformat(timespec="seconds"), time.perf_counter()


def _finish_manifest(command, cfg, inputs, outputs, started, t0, manifest_path):
    manifest = RunManifest(
        command=command,
        config=dict(cfg),
        inputs={str(p): sha256_file(p) for p in inputs},
        outputs=[str(p) for p in outputs],
        started_utc=started,
        elapsed_seconds=round(time.perf_counter() - t0, 6),
    )
    write_manifest(manifest, manifest_path)


def _atomic_checkpoint(path: Path, tensors: dict) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        save_checkpoint(tmp_name, tensors)
        _restore_umask_mode(tmp_name)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _status(message: str) -> None:
    print(message, file=sys.stderr)


def _cmd_synth(cfg: dict) -> int:
    started, t0 = _clock()
    with _validation():
        spec = SynthSpec(
            classes=cfg["classes"],
            height=cfg["height"],
            width=cfg["width"],
            bands=cfg["bands"],
            noise_sigma=cfg["noise_sigma"],
            region_size=cfg["region_size"],
            gain_amp=cfg["gain_amp"],
            offset_amp=cfg["offset_amp"],
            gain_length=cfg["gain_length"],
            offset_length=cfg["offset_length"],
        )
        out_cube = _check_parent(Path(cfg["out_cube"]))
        out_labels = _check_parent(Path(cfg["out_labels"]))
    cube, labels = synth_cube(cfg["seed"], spec)
    atomic_write_bytes(out_cube, cube_to_bytes(cube))
    atomic_write_bytes(out_labels, labels_to_bytes(labels))
    _finish_manifest(
        "synth", cfg, [], [out_cube, out_labels], started, t0,
        str(out_cube) + ".manifest.json",
    )
    _status(
        f"wrote {cube.height}x{cube.width}x{cube.bands} cube to {out_cube}, "
        f"labels to {out_labels}"
    )
    return EXIT_OK


def _cmd_extract(cfg: dict) -> int:
    started, t0 = _clock()
    with _validation():
        grid = PatchGridSpec(patch_size=cfg["patch_size"], overlap_fraction=cfg["overlap"])
        cube_path = _require_file(cfg["cube"], "cube")
        labels_path = _require_file(cfg["labels"], "label raster") if cfg["labels"] else None
        out = _check_parent(Path(cfg["out"]))
        cube = load_cube(cube_path)
        raster = load_labels(labels_path) if labels_path else None
        if raster is not None and raster.shape != (cube.height, cube.width):
            raise CliError(
                f"label raster {raster.shape} does not match cube "
                f"{(cube.height, cube.width)}"
            )
        patches = extract_patches(cube, grid)

    size = grid.patch_size
    if raster is None:
        labels = np.zeros(len(patches), dtype=np.uint16)
    else:
        labels = np.array(
            [
                majority_label(
                    raster[p.source_row : p.source_row + size, p.source_col : p.source_col + size]
                )
                for p in patches
            ],
            dtype=np.uint16,
        )
    archive = PatchArchive(patches=patches, labels=labels, wavelengths_nm=cube.wavelengths_nm)
    save_archive(out, archive)
    inputs = [cube_path] + ([labels_path] if labels_path else [])
    _finish_manifest("extract", cfg, inputs, [out], started, t0, str(out) + ".manifest.json")
    _status(f"extracted {len(patches)} {size}x{size}x{cube.bands} patches to {out}")
    return EXIT_OK


def _lr_schedule(epochs: int, steps_per_epoch: int, decay: float, step_frac: float) -> tuple:
    """Step thresholds that cut the rate by ``decay`` at each whole multiple
    of ``step_frac`` of the run, at most once per epoch boundary."""
    if not 0.0 < decay <= 1.0:
        raise CliError(f"lr-decay must be in (0, 1], got {decay}")
    if step_frac <= 0.0:
        raise CliError(f"lr-step-frac must be positive, got {step_frac}")
    if decay == 1.0 or step_frac >= 1.0:
        return ()
    drops = []
    last_epoch = 0
    for k in range(1, epochs + 1):
        at_epoch = int(math.floor(epochs * step_frac * k))
        if at_epoch >= epochs:
            break
        if at_epoch > last_epoch:
            drops.append((at_epoch * steps_per_epoch, decay))
            last_epoch = at_epoch
    return tuple(drops)


def _cmd_pretrain(cfg: dict) -> int:
    started, t0 = _clock()
    with _validation():
        patches_path = _require_file(cfg["patches"], "patch archive")
        out_ckpt = _check_parent(Path(cfg["out_checkpoint"]))
        log_path = _check_parent(
            Path(cfg["log_file"]) if cfg["log_file"] else Path(str(out_ckpt) + ".log.tsv")
        )
        archive = load_archive(patches_path)

        if cfg["band_select"] not in ("none", "pca"):
            raise CliError(f"band-select must be none or pca, got {cfg['band_select']!r}")
        use_pca = cfg["band_select"] == "pca"
        if use_pca and not 1 <= cfg["pca_components"] <= archive.bands:
            raise CliError(
                f"pca-components {cfg['pca_components']} outside [1, {archive.bands}]"
            )
        input_bands = cfg["pca_components"] if use_pca else archive.bands
        config = BackboneConfig(
            input_bands=input_bands,
            patch_size=archive.patch_size,
            variant=cfg["variant"],
            cardinality=cfg["cardinality"],
            stage_channels=cfg["stage_channels"],
            embedding_dim=cfg["embedding_dim"],
            projection_dim=cfg["projection_dim"],
        )
        aug = default_augmentations(
            noise_sigma=cfg["aug_noise_sigma"],
            band_dropout=cfg["aug_band_dropout"],
            crop_scale=(cfg["crop_min"], cfg["crop_max"]),
        )
        if cfg["epochs"] < 0:
            raise CliError(f"epochs must be >= 0, got {cfg['epochs']}")
        if not 1 <= cfg["batch"] <= len(archive.patches):
            raise CliError(
                f"batch {cfg['batch']} outside [1, {len(archive.patches)}] "
                f"for this archive"
            )
        if cfg["tau"] <= 0:
            raise CliError(f"tau must be positive, got {cfg['tau']}")
        steps_per_epoch = len(archive.patches) // cfg["batch"]
        schedule = _lr_schedule(
            cfg["epochs"], steps_per_epoch, cfg["lr_decay"], cfg["lr_step_frac"]
        )
        OptimizerState(base_lr=cfg["lr"], schedule=schedule)

    patches = archive.patches
    selector = None
    if use_pca:
        selector = fit_pca(patches, cfg["pca_components"])
        patches = [select_bands(p, selector) for p in patches]

    result = pretrain(
        patches,
        config,
        aug,
        epochs=cfg["epochs"],
        batch_n=cfg["batch"],
        tau=cfg["tau"],
        base_lr=cfg["lr"],
        schedule=schedule,
        seed=cfg["seed"],
        on_epoch=_status,
    )
    tensors = result.state_dict()
    if selector is not None:
        tensors["bands.mean"] = selector.mean.astype(np.float32)
        tensors["bands.basis"] = selector.basis.astype(np.float32)

    _atomic_checkpoint(out_ckpt, tensors)
    cfg_sidecar = Path(str(out_ckpt) + ".cfg")
    atomic_write_text(cfg_sidecar, config.to_text())
    atomic_write_text(log_path, "\n".join([LOG_HEADER] + result.log_lines) + "\n")
    _finish_manifest(
        "pretrain", cfg, [patches_path], [out_ckpt, cfg_sidecar, log_path],
        started, t0, str(out_ckpt) + ".manifest.json",
    )
    _status(
        f"pretrained variant={config.variant} for {cfg['epochs']} epochs "
        f"({steps_per_epoch} steps each) -> {out_ckpt}"
    )
    return EXIT_OK


def _selector_from_tensors(bands: dict, ckpt_path: Path):
    if not bands:
        return None
    if set(bands) != {"mean", "basis"}:
        raise CliError(
            f"{ckpt_path}: band selector tensors must be exactly mean+basis, "
            f"got {sorted(bands)}"
        )
    basis = bands["basis"].astype(np.float64)
    mean = bands["mean"].astype(np.float64)
    if basis.ndim != 2 or mean.shape != (basis.shape[0],):
        raise CliError(f"{ckpt_path}: band selector tensor shapes are inconsistent")
    selector = BandSelector(
        mode="pca",
        input_bands=int(basis.shape[0]),
        n_components=int(basis.shape[1]),
        mean=mean,
        basis=basis,
    )
    selector.validate()
    return selector


def _load_model(ckpt_path: Path) -> tuple:
    """Rebuild (config, backbone, band selector) from a checkpoint plus its
    ``.cfg`` sidecar; any shape disagreement is a checkpoint/config mismatch."""
    sidecar = Path(str(ckpt_path) + ".cfg")
    if not sidecar.is_file():
        raise CliError(f"missing backbone config sidecar {sidecar}")
    config = BackboneConfig.from_text(sidecar.read_text(encoding="utf-8"))
    tensors = load_checkpoint(ckpt_path)
    groups = {"backbone": {}, "head": {}, "bands": {}}
    for name, arr in tensors.items():
        prefix, _, rest = name.partition(".")
        if prefix not in groups or not rest:
            raise CliError(f"{ckpt_path}: unrecognized tensor {name!r}")
        groups[prefix][rest] = arr
    backbone = Backbone(config, init_rng(0))
    try:
        backbone.load_state_dict(groups["backbone"])
    except ValueError as exc:
        raise CliError(f"checkpoint/config mismatch for {ckpt_path}: {exc}") from exc
    selector = _selector_from_tensors(groups["bands"], ckpt_path)
    return config, backbone, selector


def _load_archive_for(config, selector, patches_path: Path):
    """Archive patches matched against the model contract, selector applied."""
    archive = load_archive(patches_path)
    effective_bands = selector.n_components if selector else archive.bands
    if archive.patch_size != config.patch_size or effective_bands != config.input_bands:
        raise CliError(
            f"checkpoint/config mismatch: archive holds "
            f"{archive.patch_size}x{archive.patch_size}x{archive.bands} patches "
            f"({effective_bands} bands after selection), model expects "
            f"{config.patch_size}x{config.patch_size}x{config.input_bands}"
        )
    if selector and archive.bands != selector.input_bands:
        raise CliError(
            f"band selector expects {selector.input_bands} bands, "
            f"archive holds {archive.bands}"
        )
    return archive


def _apply_selector(patches: list, selector) -> list:
    if selector is None:
        return patches
    return [select_bands(p, selector) for p in patches]


def _emit_report(lines: list, cfg: dict, command: str, inputs: list, started, t0) -> None:
    print("\n".join(lines))
    if cfg.get("report"):
        report_path = _check_parent(Path(cfg["report"]))
        atomic_write_text(report_path, "\n".join(lines) + "\n")
        _finish_manifest(
            command, cfg, inputs, [report_path], started, t0,
            str(report_path) + ".manifest.json",
        )


def _cmd_retrieve(cfg: dict) -> int:
    started, t0 = _clock()
    with _validation():
        ckpt_path = _require_file(cfg["checkpoint"], "checkpoint")
        patches_path = _require_file(cfg["patches"], "patch archive")
        config, backbone, selector = _load_model(ckpt_path)
        archive = _load_archive_for(config, selector, patches_path)
        n = len(archive.patches)
        if not 1 <= cfg["k"] <= n - 1:
            raise CliError(f"k={cfg['k']} outside [1, {n - 1}] for {n} patches")
        if cfg["batch"] < 1:
            raise CliError(f"batch must be >= 1, got {cfg['batch']}")
        if cfg.get("report"):
            _check_parent(Path(cfg["report"]))

    if np.unique(archive.labels).size < 2:
        _status("warning: every patch carries the same label; accuracies are trivial")
    patches = _apply_selector(archive.patches, selector)
    embeddings = embed_patches(backbone, patches, batch=cfg["batch"])
    lines = [
        f"top{kk}\t{topk_retrieval(embeddings, archive.labels, kk):.6f}"
        for kk in range(1, cfg["k"] + 1)
    ]
    _emit_report(lines, cfg, "retrieve", [ckpt_path, patches_path], started, t0)
    return EXIT_OK


def _cmd_probe(cfg: dict) -> int:
    started, t0 = _clock()
    with _validation():
        ckpt_path = _require_file(cfg["checkpoint"], "checkpoint")
        patches_path = _require_file(cfg["patches"], "patch archive")
        config, backbone, selector = _load_model(ckpt_path)
        archive = _load_archive_for(config, selector, patches_path)
        labeled = archive.labels > 0
        class_ids = np.unique(archive.labels[labeled])
        if class_ids.size < 2:
            raise CliError(
                f"probe needs at least 2 labeled classes, archive has {class_ids.size}"
            )
        if not 0.0 < cfg["train_frac"] < 1.0:
            raise CliError(f"train-frac must be in (0, 1), got {cfg['train_frac']}")
        if cfg["steps"] < 1:
            raise CliError(f"steps must be >= 1, got {cfg['steps']}")
        if cfg["lr"] <= 0:
            raise CliError(f"lr must be positive, got {cfg['lr']}")
        if cfg["batch"] < 1:
            raise CliError(f"batch must be >= 1, got {cfg['batch']}")
        if cfg.get("report"):
            _check_parent(Path(cfg["report"]))

    dropped = int((~labeled).sum())
    if dropped:
        _status(f"ignoring {dropped} unlabeled patch(es)")
    patches = [p for p, keep in zip(archive.patches, labeled) if keep]
    y = np.searchsorted(class_ids, archive.labels[labeled])
    if cfg["shuffle_labels"]:
        y = y[np.random.default_rng([cfg["seed"], 5]).permutation(y.size)]
        _status("labels shuffled: accuracies below should sit near chance")

    embeddings = embed_patches(backbone, _apply_selector(patches, selector), batch=cfg["batch"])
    report = linear_probe(
        embeddings,
        y,
        num_classes=class_ids.size,
        train_fraction=cfg["train_frac"],
        steps=cfg["steps"],
        lr=cfg["lr"],
        seed=cfg["seed"],
    )
    for idx in report.missing_train_classes:
        _status(f"warning: class {class_ids[idx]} absent from the training split")

    lines = ["confusion\t" + "\t".join(str(c) for c in class_ids)]
    for i, class_id in enumerate(class_ids):
        row = "\t".join(str(v) for v in report.confusion.counts[i])
        lines.append(f"{class_id}\t{row}")
    lines.append(f"OA\t{report.overall_accuracy:.6f}")
    lines.append(f"AA\t{report.average_accuracy:.6f}")
    lines.append(f"Kappa\t{report.kappa:.6f}")
    _emit_report(lines, cfg, "probe", [ckpt_path, patches_path], started, t0)
    return EXIT_OK


def _cmd_metrics(cfg: dict) -> int:
    started, t0 = _clock()
    with _validation():
        ref_path = _require_file(cfg["reference"], "reference cube")
        est_path = _require_file(cfg["estimate"], "estimate cube")
        reference = load_cube(ref_path)
        estimate = load_cube(est_path)
        if reference.data.shape != estimate.data.shape:
            raise CliError(
                f"shape mismatch: reference {reference.data.shape} vs "
                f"estimate {estimate.data.shape}"
            )
        ratio = cfg["ergas_ratio"]
        if ratio is not None and not 0.0 < ratio <= 1.0:
            raise CliError(f"ergas-ratio must be in (0, 1], got {ratio}")
        model = None
        if cfg["checkpoint"]:
            ckpt_path = _require_file(cfg["checkpoint"], "checkpoint")
            config, backbone, selector = _load_model(ckpt_path)
            cube_bands = selector.input_bands if selector else config.input_bands
            if reference.data.shape != (config.patch_size, config.patch_size, cube_bands):
                raise CliError(
                    f"checkpoint/config mismatch: the encoder scores "
                    f"{config.patch_size}x{config.patch_size}x{cube_bands} cubes, "
                    f"got {reference.data.shape}"
                )
            model = (backbone, selector)
        if cfg.get("report"):
            _check_parent(Path(cfg["report"]))

    if ratio is None:
        ratio = DEFAULT_ERGAS_RATIO
        _status(f"warning: --ergas-ratio not given, using default {ratio}")

    inputs_text = f"{ref_path}|{est_path}"
    lines = [
        MetricReport("cc", cc(reference, estimate), inputs=inputs_text).to_tsv(),
        MetricReport("sam", sam(reference, estimate), params="degrees", inputs=inputs_text).to_tsv(),
        MetricReport("rmse", rmse(reference, estimate), inputs=inputs_text).to_tsv(),
        MetricReport(
            "ergas", ergas(reference, estimate, ratio), params=f"ratio={ratio}",
            inputs=inputs_text,
        ).to_tsv(),
        MetricReport("psnr", psnr(reference, estimate), params="peak=1.0", inputs=inputs_text).to_tsv(),
    ]
    if model is not None:
        backbone, selector = model
        ref_data = _apply_selector([Patch(data=reference.data)], selector)[0].data
        est_data = _apply_selector([Patch(data=estimate.data)], selector)[0].data
        value = hspl(est_data, ref_data, backbone)
        lines.append(
            MetricReport(
                "hspl", value, params=f"stages={len(backbone.stages)}", inputs=inputs_text
            ).to_tsv()
        )
    _emit_report(lines, cfg, "metrics", [ref_path, est_path], started, t0)
    return EXIT_OK


_COMMANDS = {
    "synth": (_SYNTH_OPTS, _cmd_synth, "generate a synthetic labeled cube"),
    "extract": (_EXTRACT_OPTS, _cmd_extract, "tile a cube into a patch archive"),
    "pretrain": (_PRETRAIN_OPTS, _cmd_pretrain, "contrastively pretrain an encoder"),
    "retrieve": (_RETRIEVE_OPTS, _cmd_retrieve, "Top-K nearest-neighbour accuracy"),
    "probe": (_PROBE_OPTS, _cmd_probe, "linear classification on frozen embeddings"),
    "metrics": (_METRICS_OPTS, _cmd_metrics, "reconstruction quality report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hscl",
        description="hyperspectral contrastive-learning pipelines",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, (opts, _func, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument(
            "--config", default=None, metavar="FILE",
            help="key=value file supplying defaults; explicit flags win",
        )
        for o in opts:
            flag = "--" + o.name
            if o.kind is None:
                p.add_argument(
                    flag, dest=o.dest, action="store_true",
                    default=argparse.SUPPRESS, help=o.help,
                )
            else:
                p.add_argument(
                    flag, dest=o.dest, type=o.kind,
                    default=argparse.SUPPRESS, help=o.help,
                )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command is None:
        parser.print_help(sys.stderr)
        return EXIT_VALIDATION
    opts, func, _ = _COMMANDS[ns.command]
    try:
        cfg = _resolve(opts, ns)
        return func(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
