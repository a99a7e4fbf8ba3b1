"""Command-line interface.

Subcommands: synth, derain, eval-seg, eval-track, eval-restore, report.
Exit codes: 0 on success, 1 for configuration problems (bad flags,
bad config/manifest), 2 for data problems (unreadable or malformed
files, I/O failures).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .derain import garg_nayar
from .errors import ConfigurationError, DataFormatError
from .frames import save_binary_mask, save_sequence, save_tristate_mask
from .harness.config import EvalConfig, load_config
from .harness.evaluate import (
    EvalReport,
    run_restoration_eval,
    run_segmentation_eval,
    run_tracking_eval,
)
from .harness.figures import render_figures
from .harness.manifest import (
    DatasetManifest,
    SequenceSpec,
    load_manifest,
    save_manifest,
)
from .harness.report import read_csv, write_csv, write_markdown
from .harness.runners import build_derainer
from .physics import MovingRectangle, RainConfig, generate_synthetic_sequence, smooth_noise_background


class _Parser(argparse.ArgumentParser):
    """argparse reports usage mistakes as configuration errors (exit 1)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigurationError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="derainkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic rainy dataset")
    p.add_argument("--out", type=Path, required=True, help="dataset directory to create")
    p.add_argument("--name", default="synthetic", help="sequence name in the manifest")
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--fps", type=float, default=10.0)
    p.add_argument("--streaks", type=float, default=150.0, help="expected streaks per frame")
    p.add_argument("--slope", type=float, default=0.02, help="photometric slope of streak brightness")
    p.add_argument("--offset", type=float, default=30.0, help="streak brightness offset")
    p.add_argument("--gt-every", type=int, default=1, help="annotate every k-th frame")
    p.add_argument("--no-object", action="store_true", help="omit the moving foreground object")
    p.add_argument("--color", choices=("luma", "rgb"), default="luma")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("derain", help="apply one rain-removal method")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--sequence", required=True, help="sequence name from the manifest")
    p.add_argument("--out", type=Path, required=True, help="directory for derained frames")
    p.add_argument("--derainer", help="label of the derainer to apply (default: the only treated one)")
    p.add_argument("--dump-masks", type=Path, help="also write detection masks here (garg_nayar only)")

    for name, help_text in (
        ("eval-seg", "score segmentation on annotated frames"),
        ("eval-track", "score forward-backward feature tracking"),
        ("eval-restore", "score PSNR/SSIM against clean frames"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=True)
        p.add_argument("--manifest", type=Path, required=True)
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="seed recorded in the report (overrides config)")
        p.add_argument("--jobs", type=int, help="parallel evaluation cells (overrides config)")

    p = sub.add_parser("report", help="re-render a CSV report")
    p.add_argument("--csv", type=Path, required=True, help="report produced by an eval command")
    p.add_argument("--out", type=Path, help="output directory (default: next to the CSV)")
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.width < 16 or args.height < 16:
        raise ConfigurationError("frames must be at least 16x16")
    if args.frames < 1:
        raise ConfigurationError("--frames must be >= 1")
    if args.gt_every < 1:
        raise ConfigurationError("--gt-every must be >= 1")

    background = smooth_noise_background(
        args.width,
        args.height,
        seed=args.seed,
        channels=3 if args.color == "rgb" else 1,
    )
    rect = None
    if not args.no_object:
        rw, rh = max(8, args.width // 8), max(8, args.height // 8)
        x0, y0 = 2.0, args.height / 3.0
        dx = (args.width - 4.0 - rw - x0) / max(args.frames - 1, 1)
        rect = MovingRectangle(x0, y0, rw, rh, dx, 0.0, 60.0)
    rain = RainConfig(
        streaks_per_frame=args.streaks,
        photometric_slope=args.slope,
        brightness_offset=args.offset,
        seed=args.seed,
    )
    clean, rainy, streak_masks, gt_masks = generate_synthetic_sequence(
        background, rect, rain, args.frames, args.fps
    )

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_sequence(clean, out / "clean")
    save_sequence(rainy, out / "rainy")
    (out / "streak_masks").mkdir(exist_ok=True)
    (out / "gt_masks").mkdir(exist_ok=True)
    for i, mask in enumerate(streak_masks):
        save_binary_mask(mask, out / "streak_masks" / f"{i:06d}.png")
    for i in range(0, args.frames, args.gt_every):
        save_tristate_mask(gt_masks[i], out / "gt_masks" / f"{i:06d}.png")

    spec = SequenceSpec(
        name=args.name,
        frames_dir=out / "rainy",
        fps=args.fps,
        color_mode=args.color,
        gt_masks_dir=out / "gt_masks",
        clean_frames_dir=out / "clean",
    )
    save_manifest(DatasetManifest((spec,)), out / "manifest.json")
    print(f"wrote {args.frames} frames to {out} (manifest: {out / 'manifest.json'})")
    return 0


def _pick_derainer(config: EvalConfig, label: Optional[str]):
    if label is not None:
        for spec in config.derainers:
            if spec.label == label:
                return spec
        raise ConfigurationError(f"no derainer labeled {label!r} in the config")
    treated = [d for d in config.derainers if not d.is_baseline]
    if len(treated) != 1:
        raise ConfigurationError(
            f"config lists {len(treated)} treated derainers; pick one with --derainer"
        )
    return treated[0]


def _cmd_derain(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    manifest = load_manifest(args.manifest)
    matches = [s for s in manifest if s.name == args.sequence]
    if not matches:
        raise ConfigurationError(f"no sequence named {args.sequence!r} in the manifest")
    spec = matches[0]
    dspec = _pick_derainer(config, args.derainer)

    frames = spec.load_frames()
    if args.dump_masks is not None:
        if dspec.kind != "garg_nayar":
            raise ConfigurationError("--dump-masks requires a garg_nayar derainer")
        derained, masks = garg_nayar(frames, dspec.params)
        args.dump_masks.mkdir(parents=True, exist_ok=True)
        for i, mask in enumerate(masks):
            save_binary_mask(mask, args.dump_masks / f"{i:06d}.png")
    else:
        derained = build_derainer(dspec)(frames, spec)
    save_sequence(derained, args.out)
    print(f"wrote {len(derained)} derained frames to {args.out}")
    return 0


def _write_report(report: EvalReport, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(report, out_dir / f"{report.kind}.csv")
    md_path = write_markdown(report, out_dir / f"{report.kind}.md")
    figure_paths = render_figures(report, out_dir)
    for path in [csv_path, md_path, *figure_paths]:
        print(f"wrote {path}")
    return 0


def _cmd_eval(args: argparse.Namespace, runner) -> int:
    config = load_config(args.config, out_dir=args.out, seed=args.seed, jobs=args.jobs)
    manifest = load_manifest(args.manifest)
    report = runner(manifest, config)
    return _write_report(report, config.out_dir)


def _cmd_report(args: argparse.Namespace) -> int:
    report = read_csv(args.csv)
    out_dir = args.out if args.out is not None else args.csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    md_path = write_markdown(report, out_dir / f"{report.kind}.md")
    figure_paths = render_figures(report, out_dir)
    for path in [md_path, *figure_paths]:
        print(f"wrote {path}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "derain":
            return _cmd_derain(args)
        if args.command == "eval-seg":
            return _cmd_eval(args, run_segmentation_eval)
        if args.command == "eval-track":
            return _cmd_eval(args, run_tracking_eval)
        if args.command == "eval-restore":
            return _cmd_eval(args, run_restoration_eval)
        if args.command == "report":
            return _cmd_report(args)
        raise AssertionError(f"unhandled command {args.command!r}")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
