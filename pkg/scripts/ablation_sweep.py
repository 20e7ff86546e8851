"""Variant sweep on the desk-scale cube: four encoders, with and without PCA.

Reuses one synthetic patch archive across runs and collects Top-1 retrieval
per (variant, band selection) cell into a TSV table. Pass --band-select none
or pca to run a single column of the matrix.
"""

import argparse
import sys
import time
from pathlib import Path

from hscl.pipelines.cli import main as hscl

VARIANTS = ("conv3d", "dsc", "cbam", "seb")


def run(args):
    code = hscl([str(a) for a in args])
    if code != 0:
        raise SystemExit(f"stage {args[0]!r} failed with exit code {code}")


def read_top1(report):
    for line in Path(report).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("\t")
        if key == "top1":
            return float(value)
    raise SystemExit(f"no top1 line in {report}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, default=Path("sweep-run"))
    ap.add_argument("--band-select", default="both",
                    choices=("none", "pca", "both"))
    ap.add_argument("--pca-components", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--data-seed", type=int, default=40)
    ap.add_argument("--train-seed", type=int, default=0)
    args = ap.parse_args(argv)

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cube, labels = out / "cube.hkc", out / "labels.hkl"
    patches = out / "patches.hka"

    run(["synth", "--out-cube", cube, "--out-labels", labels,
         "--height", 736, "--width", 736, "--bands", 32, "--classes", 8,
         "--region-size", 32, "--noise-sigma", 0.01,
         "--gain-amp", 15, "--gain-length", 8,
         "--offset-amp", 110, "--offset-length", 16,
         "--seed", args.data_seed])
    run(["extract", "--cube", cube, "--labels", labels, "--out", patches,
         "--patch-size", 32, "--overlap", 0])

    selections = ("none", "pca") if args.band_select == "both" else (args.band_select,)
    rows = []
    for selection in selections:
        for variant in VARIANTS:
            tag = variant if selection == "none" else f"{variant}-{selection}"
            ckpt = out / f"{tag}.hkw"
            report = out / f"{tag}-retrieval.tsv"
            t0 = time.perf_counter()
            run(["pretrain", "--patches", patches, "--out-checkpoint", ckpt,
                 "--variant", variant, "--band-select", selection,
                 "--pca-components", args.pca_components,
                 "--epochs", args.epochs, "--batch", 32, "--tau", 0.5,
                 "--lr", 1e-2, "--lr-decay", 1.0, "--crop-min", 0.4,
                 "--aug-noise-sigma", 0.01, "--aug-band-dropout", 0,
                 "--stage-channels", "16,32", "--embedding-dim", 32,
                 "--projection-dim", 16, "--cardinality", 4,
                 "--seed", args.train_seed])
            run(["retrieve", "--checkpoint", ckpt, "--patches", patches,
                 "--k", 1, "--report", report])
            rows.append((variant, selection, read_top1(report),
                         time.perf_counter() - t0))
            print(f"# {tag}: top1 {rows[-1][2]:.4f} ({rows[-1][3]:.0f}s)",
                  file=sys.stderr)

    summary = out / "sweep.tsv"
    with summary.open("w", encoding="utf-8") as fh:
        fh.write("variant\tband_select\ttop1\tseconds\n")
        for variant, selection, top1, secs in rows:
            fh.write(f"{variant}\t{selection}\t{top1:.6f}\t{secs:.1f}\n")
    print(f"# wrote {summary}", file=sys.stderr)


if __name__ == "__main__":
    main()
