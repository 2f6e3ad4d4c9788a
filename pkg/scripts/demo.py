#!/usr/bin/env python3
"""Demo script: phantom dataset -> (optional) training -> segmentation -> metrics.

Runs the lesion-seg subcommands in sequence on a small phantom inside a
scratch directory. The oracle segmentation uses each phantom's paired
healthy volume in place of the generator, which shows the ceiling of the
subtraction chain; pass --train to also run a short training and segment
with the learned generator.
"""

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cyclegan_lesion_seg.cli.main import main as lesion_seg  # noqa: E402

DEMO_CONFIG = """
imgvol:
  crop_side: 32
nets:
  generator:
    stages: 5
    base_channels: 4
    max_channels: 16
    input_side: 32
    residual_output: true
  discriminator:
    layers: 3
    kernel: 4
    strides: [2, 2, 1]
    channels: [8, 16, 1]
    norm_layers: [2]
    receptive_field_target: null
cyclegan:
  train:
    epochs: 4
    decay_start_epoch: 2
    crop_side: 32
postproc:
  method: kmeans
phantom:
  spec:
    size: 32
    lesion_count: [1, 2]
    lesion_radius: [2.0, 3.5]
  n_train_healthy: 12
  n_train_infected: 12
  n_test: 3
  max_train_volumes: 20
logging:
  level: WARNING
"""


def run(step: str, argv) -> None:
    print("\n" + "=" * 60)
    print(f"🔧 {step}: lesion-seg {' '.join(argv[2:])}")
    print("=" * 60)
    code = lesion_seg(argv)
    if code != 0:
        print(f"❌ {step} failed with exit code {code}")
        sys.exit(code)


def demo(workdir: Path, with_training: bool, seed: int) -> None:
    config = workdir / "demo.yaml"
    config.write_text(DEMO_CONFIG)
    base = ["--config", str(config), "--seed", str(seed)]
    data = workdir / "phantom"
    volumes = str(data / "test" / "volumes.json")

    run("Phantom dataset", base + ["phantom", "--out", str(data)])

    run("Oracle segmentation", base + [
        "segment", "--oracle", "--overlays", "--volumes", volumes, "--out", str(workdir / "oracle"),
    ])
    run("Oracle overlap", base + [
        "evaluate", "--volumes", volumes, "--pred", str(workdir / "oracle"), "--out", str(workdir / "oracle_eval"),
    ])
    run("Oracle regions", base + [
        "regions", "--volumes", volumes, "--pred", str(workdir / "oracle"), "--out", str(workdir / "oracle_regions"),
    ])

    if with_training:
        ckpt = workdir / "checkpoints"
        run("Training", base + [
            "train", "--manifest", str(data / "train" / "manifest.json"), "--out", str(ckpt),
        ])
        last = sorted(p for p in ckpt.iterdir() if p.is_dir())[-1]
        run("Generator segmentation", base + [
            "segment", "--checkpoint", str(last), "--volumes", volumes, "--out", str(workdir / "generator"),
        ])
        run("Generator overlap", base + [
            "evaluate", "--volumes", volumes, "--pred", str(workdir / "generator"),
            "--out", str(workdir / "generator_eval"),
        ])
        print(f"\n📈 Loss curves: {ckpt / 'losses.html'}")

    print("\n" + "=" * 60)
    print(f"✅ Demo completed; outputs in {workdir}")
    print("=" * 60)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--train", action="store_true", help="Also train and segment with the generator")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--keep", help="Write outputs here instead of a temporary directory")
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    if args.keep:
        out = Path(args.keep)
        out.mkdir(parents=True, exist_ok=True)
        demo(out, args.train, args.seed)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            demo(Path(tmp), args.train, args.seed)
