#!/usr/bin/env python3
"""Command-line entry point: ``lesion-seg <subcommand>``.

Subcommands: phantom, preprocess, train, segment, evaluate, regions.
Exit codes: 0 success, 1 validation error or missing input, 2 runtime or
numeric failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ..cyclegan import select_best_epoch, synthesize_healthy, train
from ..imgvol import (
    BinaryMask,
    CtVolume,
    SliceImage,
    load_manifest_slices,
    preprocess_volume,
    read_mask,
    read_nifti,
    read_volume,
    resample_isotropic,
    resample_mask_isotropic,
    window_normalize,
    write_manifest,
    write_mask,
    write_slice,
)
from ..metrics import (
    OVERLAP_COLUMNS,
    evaluate_cohort,
    evaluate_regions,
    write_cohort_report,
)
from ..nets import Network, load_network
from ..phantom import TRAIN_MANIFEST, TEST_VOLUMES, gen_dataset, read_volume_records
from ..postproc import segment_volume, write_contour_overlay_png
from ..shared.config import Config, setup_logging
from ..shared.errors import ConfigValidationError, LesionSegError, NonFiniteError
from ..shared.schemas import RunConfig, SliceRecord, VolumeRecord

logger = logging.getLogger(__name__)
console = Console()

CONFIG_ECHO = "config_echo.json"


def write_config_echo(run: RunConfig, directory: Path) -> Path:
    """Fully resolved configuration next to the outputs it produced."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / CONFIG_ECHO
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(run.model_dump(mode="json"), f, indent=2, sort_keys=True)
    return path


def load_run_config(config_path: Optional[str], seed: Optional[int]) -> Tuple[RunConfig, Config]:
    if config_path is not None and not Path(config_path).exists():
        raise FileNotFoundError(f"config file not found: {config_path}")
    cfg = Config(config_path)
    run = cfg.to_run_config()
    if seed is not None:
        run = run.with_seed(seed)
    run = run.model_copy(update={"logging": cfg.get_logging_config()})
    return run, cfg


def _out_dir(args: argparse.Namespace, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


def _read_any_volume(path: str) -> CtVolume:
    if path.endswith((".nii", ".nii.gz")):
        return read_nifti(path)
    return read_volume(path)


def _read_any_mask(path: str) -> BinaryMask:
    if path.endswith((".nii", ".nii.gz")):
        vol = read_nifti(path)
        return BinaryMask(data=vol.data > 0.5, spacing=vol.spacing, origin=vol.origin)
    return read_mask(path)


def _volume_stem(path: str) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii", ".json"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_phantom(args: argparse.Namespace, run: RunConfig) -> int:
    out = _out_dir(args, run.paths.data_dir)
    dataset = gen_dataset(run.phantom, out, run.imgvol)
    write_config_echo(run, out)

    table = Table(title=f"Phantom dataset ({out})")
    table.add_column("Split")
    table.add_column("Volumes", justify="right")
    table.add_column("Healthy slices", justify="right")
    table.add_column("Infected slices", justify="right")
    table.add_row("train", str(len(dataset.train_volume_ids)), str(dataset.n_healthy), str(dataset.n_infected))
    table.add_row("test", str(len(dataset.test_volume_ids)), "-", "-")
    console.print(table)
    return 0


def cmd_preprocess(args: argparse.Namespace, run: RunConfig) -> int:
    if len(args.volume) != len(args.mask):
        raise ConfigValidationError(f"{len(args.volume)} volumes but {len(args.mask)} masks")
    out = _out_dir(args, str(Path(run.paths.data_dir) / "preprocessed"))
    records: List[SliceRecord] = []
    for vol_path, mask_path in zip(args.volume, args.mask):
        volume_id = _volume_stem(vol_path)
        slices = preprocess_volume(
            _read_any_volume(vol_path),
            _read_any_mask(mask_path),
            lo=run.imgvol.window_lo,
            hi=run.imgvol.window_hi,
            side=run.imgvol.crop_side,
            target_spacing=run.imgvol.target_spacing,
            volume_id=volume_id,
            label=args.label,
        )
        for image in slices:
            rel = f"{volume_id}/z{image.slice_index:03d}.json"
            write_slice(image, out / rel)
            records.append(
                SliceRecord(path=rel, slice_index=image.slice_index, label=args.label, volume_id=volume_id)
            )
        logger.info(f"{volume_id}: {len(slices)} slices")
    write_manifest(records, out / "manifest.json")
    write_config_echo(run, out)
    console.print(f"Wrote {len(records)} slices to {out / 'manifest.json'}")
    return 0


def cmd_train(args: argparse.Namespace, run: RunConfig) -> int:
    manifest = Path(args.manifest) if args.manifest else Path(run.paths.data_dir) / TRAIN_MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"training manifest not found: {manifest}")
    x_pool = load_manifest_slices(manifest, label="infected")
    y_pool = load_manifest_slices(manifest, label="healthy")
    out = _out_dir(args, run.paths.checkpoint_dir)
    write_config_echo(run, out)

    state = train(x_pool, y_pool, run.nets, run.cyclegan, out, resume_from=args.resume)
    best = select_best_epoch(state.history) if state.history else None
    console.print(
        f"Trained {state.epoch} epochs ({state.iteration} iterations) on "
        f"{len(x_pool)} infected / {len(y_pool)} healthy slices; "
        f"checkpoints in {out}, lowest mean generator loss at epoch {best}"
    )
    return 0


def _lesion_plane(record: VolumeRecord, test_dir: Path, pred: BinaryMask) -> Optional[Tuple[int, np.ndarray]]:
    gt = read_mask(test_dir / record.lesion)
    counts = gt.data.sum(axis=(1, 2)) if gt.count else pred.data.sum(axis=(1, 2))
    if counts.max() == 0:
        return None
    z = int(np.argmax(counts))
    return z, gt.data[z]


def _segment_record(
    record: VolumeRecord,
    test_dir: Path,
    run: RunConfig,
    method: str,
    generator: Optional[Network],
    out: Path,
    overlays: bool,
) -> Dict[str, object]:
    vol = read_volume(test_dir / record.volume)
    lung = read_mask(test_dir / record.lung)
    params = dict(
        lo=run.imgvol.window_lo,
        hi=run.imgvol.window_hi,
        side=run.imgvol.crop_side,
        target_spacing=run.imgvol.target_spacing,
        volume_id=record.volume_id,
    )
    infected = preprocess_volume(vol, lung, label="infected", **params)
    synthetic: Sequence[SliceImage]
    if generator is None:
        synthetic = preprocess_volume(read_volume(test_dir / record.healthy), lung, label="healthy", **params)
    else:
        synthetic = [synthesize_healthy(generator, image) for image in infected]

    lung_grid = resample_mask_isotropic(lung, run.imgvol.target_spacing)
    pred, flags = segment_volume(infected, synthetic, lung_grid, method=method, cfg=run.postproc)
    case_dir = out / record.volume_id
    write_mask(pred, case_dir / "pred.json")

    if overlays:
        plane = _lesion_plane(record, test_dir, pred)
        if plane is not None:
            z, truth = plane
            norm = window_normalize(
                resample_isotropic(vol, run.imgvol.target_spacing), run.imgvol.window_lo, run.imgvol.window_hi
            )
            if truth.shape == pred.data[z].shape:
                write_contour_overlay_png(norm.data[z], pred.data[z], truth, case_dir / f"overlay_z{z:03d}.png")
    return {"volume_id": record.volume_id, "lesion_voxels": pred.count, "flags": flags}


def cmd_segment(args: argparse.Namespace, run: RunConfig) -> int:
    volumes = Path(args.volumes) if args.volumes else Path(run.paths.data_dir) / TEST_VOLUMES
    if not volumes.exists():
        raise FileNotFoundError(f"volume records not found: {volumes}")
    records = read_volume_records(volumes)
    method = args.method or run.postproc.method

    generator: Optional[Network] = None
    if not args.oracle:
        if not args.checkpoint:
            raise ConfigValidationError("segment needs --checkpoint unless --oracle is given")
        generator = load_network(Path(args.checkpoint) / "generator_xy", run.nets.generator)

    out = _out_dir(args, str(Path(run.paths.output_dir) / "segment"))
    cases = [
        _segment_record(r, volumes.parent, run, method, generator, out, args.overlays) for r in records
    ]
    metadata = {
        "method": method,
        "checkpoint": None if args.oracle else str(args.checkpoint),
        "synthetic_source": "paired_healthy" if args.oracle else "generator_xy",
        "volumes": str(volumes),
        "cases": cases,
    }
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "segmentation.json", 'w', encoding='utf-8') as f:
        json.dump(metadata, f, indent=2)
    write_config_echo(run, out)
    console.print(f"Segmented {len(cases)} volumes with {method}; masks in {out}")
    return 0


def _evaluation_cases(args: argparse.Namespace, run: RunConfig) -> Tuple[List[VolumeRecord], Path, Path]:
    volumes = Path(args.volumes) if args.volumes else Path(run.paths.data_dir) / TEST_VOLUMES
    if not volumes.exists():
        raise FileNotFoundError(f"volume records not found: {volumes}")
    pred_dir = Path(args.pred) if args.pred else Path(run.paths.output_dir) / "segment"
    return read_volume_records(volumes), volumes.parent, pred_dir


def _print_report(title: str, frame, columns: Sequence[str], formatted: Dict[str, str]) -> None:
    table = Table(title=title)
    table.add_column("Case")
    for col in columns:
        table.add_column(col, justify="right")
    for _, row in frame.iterrows():
        table.add_row(str(row["case_id"]), *(f"{row[c]:.2f}" for c in columns))
    table.add_row("mean±SD", *(formatted[c] for c in columns), style="bold")
    console.print(table)


def cmd_evaluate(args: argparse.Namespace, run: RunConfig) -> int:
    records, test_dir, pred_dir = _evaluation_cases(args, run)
    cases = [
        (
            read_mask(pred_dir / r.volume_id / "pred.json"),
            read_mask(test_dir / r.lesion),
            read_mask(test_dir / r.lung),
        )
        for r in records
    ]
    report = evaluate_cohort(cases, case_ids=[r.volume_id for r in records])
    out = _out_dir(args, str(Path(run.paths.output_dir) / "evaluate"))
    write_cohort_report(report, out, stem="metrics")
    write_config_echo(run, out)
    _print_report("Lesion overlap", report.cases, OVERLAP_COLUMNS, report.formatted())
    return 0


def cmd_regions(args: argparse.Namespace, run: RunConfig) -> int:
    records, test_dir, pred_dir = _evaluation_cases(args, run)
    cases = [
        (
            read_mask(pred_dir / r.volume_id / "pred.json"),
            read_mask(test_dir / r.lesion),
            read_mask(test_dir / r.lung),
        )
        for r in records
    ]
    report, totals = evaluate_regions(cases, run.metrics, case_ids=[r.volume_id for r in records])
    out = _out_dir(args, str(Path(run.paths.output_dir) / "regions"))
    write_cohort_report(report, out, stem="regions", totals=totals)
    write_config_echo(run, out)
    _print_report("Region diagnosis", report.cases, ["ACC", "PSC", "SEN"], report.formatted())
    console.print(
        f"Cohort totals: ACC {totals.accuracy:.2f} ({totals.accuracy_pct:.1f}%), "
        f"PSC {totals.precision:.2f} ({totals.precision_pct:.1f}%), "
        f"SEN {totals.sensitivity:.2f} ({totals.sensitivity_pct:.1f}%)"
    )
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "phantom": cmd_phantom,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "segment": cmd_segment,
    "evaluate": cmd_evaluate,
    "regions": cmd_regions,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesion-seg", description="Unsupervised lung-lesion segmentation toolkit"
    )
    parser.add_argument("--config", help="YAML or JSON run configuration (default: config/config.yaml)")
    parser.add_argument("--seed", type=int, help="Master seed pushed into every seeded section")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="Generate a synthetic phantom dataset")
    p.add_argument("--out", help="Dataset directory (default: paths.data_dir)")

    p = sub.add_parser("preprocess", help="Resample, window, mask and crop CT volumes into slices")
    p.add_argument("--volume", nargs="+", required=True, help="Volume headers or NIfTI files")
    p.add_argument("--mask", nargs="+", required=True, help="Lung masks, one per volume")
    p.add_argument("--label", choices=["healthy", "infected", "unknown"], default="unknown")
    p.add_argument("--out", help="Slice store directory")

    p = sub.add_parser("train", help="Train the cycle-consistent generators")
    p.add_argument("--manifest", help="Slice manifest (default: <data_dir>/train/manifest.json)")
    p.add_argument("--resume", help="Checkpoint directory to continue from")
    p.add_argument("--out", help="Checkpoint directory (default: paths.checkpoint_dir)")

    p = sub.add_parser("segment", help="Synthesize healthy slices and extract lesion masks")
    p.add_argument("--checkpoint", help="Epoch checkpoint directory holding generator_xy")
    p.add_argument("--volumes", help="Volume records (default: <data_dir>/test/volumes.json)")
    p.add_argument("--method", choices=["kmeans", "otsu"], help="Binarization method")
    p.add_argument("--oracle", action="store_true", help="Use the paired healthy volume instead of the generator")
    p.add_argument("--overlays", action="store_true", help="Write contour overlay PNGs")
    p.add_argument("--out", help="Output directory")

    for name, help_text in (("evaluate", "Overlap metrics per case"), ("regions", "Region diagnosis per case")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--volumes", help="Volume records with ground truth")
        p.add_argument("--pred", help="Directory of predicted masks (<pred>/<volume_id>/pred.json)")
        p.add_argument("--out", help="Report directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # usage errors are validation errors
        return 0 if e.code in (0, None) else 1
    try:
        run, _ = load_run_config(args.config, args.seed)
        setup_logging(run.logging)
        return COMMANDS[args.command](args, run)
    except (ConfigValidationError, ValidationError) as e:
        console.print(f"[red]Configuration error:[/red] {e}")
        return 1
    except FileNotFoundError as e:
        console.print(f"[red]Missing input:[/red] {e}")
        return 1
    except NonFiniteError as e:
        console.print(f"[red]Numeric failure:[/red] {e}")
        return 2
    except ValueError as e:
        console.print(f"[red]Validation error:[/red] {e}")
        return 1
    except LesionSegError as e:
        console.print(f"[red]Runtime error:[/red] {e}")
        return 2
    except OSError as e:
        console.print(f"[red]I/O error:[/red] {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
