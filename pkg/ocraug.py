#!/usr/bin/env python3
"""
OCR Line Augmentation Tool (CLI)

Command-line frontend that delegates all work to the core modules:
- augment: render augmented replicas of a manifest (augment_core)
- evaluate: CER/WER report of recognized text against a manifest (ocr_metrics)
- inspect: one rendered frame with its projected text quad outlined
- take-fraction: stratified subset of a manifest
- compare: percentage-point differences between evaluation reports
- create-config: write the default configuration

Exit codes: 0 success, 1 input/config/argument error, 2 failure during a run.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image, ImageDraw

from augment_core import (
    AugmentConfig, AugmentEngine, AugmentSummary, ConfigError, OutputCollisionError, ReplicaSlot,
    render_replica_frame, replica_plan, take_fraction,
)
from dataset_manifest import (
    DIFFICULTIES, ManifestParseError, SampleError, class_counts, load_manifest, read_image,
    write_png, write_sample_manifest,
)
from line_extract import extract_line
from ocr_metrics import (
    EvalInputError, EvalReport, compare_reports, evaluate_run, export_comparison_csv,
    format_comparison, format_report_lines,
)
from scene_geometry import BehindCameraError, DegeneratePoseError

logger = logging.getLogger('ocraug')

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RUNTIME = 2

OVERLAY_COLOR = (255, 0, 0)


class ArgumentParser(argparse.ArgumentParser):
    """argparse with unknown flags and bad values mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def setup_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def format_class_counts(counts) -> str:
    return ", ".join(f"{name} {counts.get(name, 0)}" for name in DIFFICULTIES)


def load_config(path: Optional[str]) -> AugmentConfig:
    if path is None:
        logger.info("No --config given, using the default configuration")
        return AugmentConfig.default()
    return AugmentConfig.from_file(path)


def make_progress_logger(step: float = 0.1):
    """Progress callback that logs every ``step`` of completion."""
    state = {'next': 0.0}

    def callback(message: str, progress: Optional[float]) -> None:
        if progress is None or progress >= state['next'] or progress >= 1.0:
            logger.info(message)
            if progress is not None:
                state['next'] = math.floor(progress / step) * step + step

    return callback


def print_summary(summary: AugmentSummary) -> None:
    """Line-oriented run summary on standard output."""
    print(f"Master seed: {summary.seed}")
    print(f"Enlargement factor: {summary.enlargement_factor}")
    print(f"Samples: {summary.originals} ({format_class_counts(summary.original_counts)})")
    print(f"Original lines written: {summary.originals}")
    print(f"Augmented lines written: {summary.augmented}")
    print(f"Passed through (unaugmentable): {summary.passthrough}")
    reasons = ", ".join(f"{k} {v}" for k, v in sorted(summary.rejection_reasons.items()))
    print(f"Rejected attempts: {summary.rejections}" + (f" ({reasons})" if reasons else ""))
    print(f"Rendered frames: {summary.rendered_frames}")
    print(f"Manifest entries: {summary.total_entries} ({format_class_counts(summary.output_counts())})")
    print(f"Manifest: {summary.manifest_path}")
    print(f"Wall time: {summary.wall_time:.2f} s")


def cmd_augment(args) -> int:
    try:
        config = load_config(args.config).with_overrides(
            enlargement_factor=args.factor, seed=args.seed, workers=args.workers)
        samples = load_manifest(args.input, strict=args.strict, allow_empty_transcripts=args.allow_empty)
    except (ConfigError, ManifestParseError, SampleError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except OSError as e:
        logger.error(f"Cannot read input: {e}")
        return EXIT_INPUT

    selected = list(samples)
    if args.take_fraction is not None:
        try:
            selected = take_fraction(selected, args.take_fraction, config.seed)
        except ValueError as e:
            logger.error(str(e))
            return EXIT_INPUT
        logger.info("Selected %d of %d samples (%s)", len(selected), len(samples),
                    format_class_counts(class_counts(selected)))

    logger.info("Master seed %d, enlargement factor %d", config.seed, config.enlargement_factor)
    engine = AugmentEngine(config)
    engine.set_progress_callback(make_progress_logger())
    try:
        summary = engine.run(selected, args.out)
    except OutputCollisionError as e:
        logger.error(str(e))
        return EXIT_INPUT
    except (OSError, SampleError) as e:
        logger.error(f"Augmentation failed: {e}")
        return EXIT_RUNTIME

    summary.warnings = samples.sample_errors + summary.warnings
    print_summary(summary)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        report = evaluate_run(args.ref, args.hyp)
    except (ManifestParseError, EvalInputError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except OSError as e:
        logger.error(f"Cannot read {e.filename or args.ref}: {e.strerror or e}")
        return EXIT_INPUT

    try:
        if args.report:
            report.save_json(args.report)
            logger.info("Report written to %s", args.report)
        if args.csv:
            report.export_to_csv(args.csv)
            logger.info("CSV table written to %s", args.csv)
    except OSError as e:
        logger.error(f"Cannot write report: {e}")
        return EXIT_RUNTIME

    meta = report.metadata
    if meta.get('missing_hypotheses') or meta.get('excluded_lines'):
        print(f"Missing hypotheses: {meta['missing_hypotheses']}, excluded lines: {meta['excluded_lines']}")
    for line in format_report_lines(report):
        print(line)
    return EXIT_OK


def draw_quad_overlay(image: np.ndarray, corners) -> Image.Image:
    """Frame as RGB with the quad outlined by 1-px red lines."""
    canvas = Image.fromarray(np.ascontiguousarray(image)).convert('RGB')
    width, height = canvas.size
    points = [(min(max(int(math.floor(x)), 0), width - 1), min(max(int(math.floor(y)), 0), height - 1))
              for x, y in corners]
    ImageDraw.Draw(canvas).line(points + [points[0]], fill=OVERLAY_COLOR, width=1)
    return canvas


def cmd_inspect(args) -> int:
    try:
        config = load_config(args.config).with_overrides(enlargement_factor=args.factor, seed=args.seed)
        samples = load_manifest(args.input, allow_empty_transcripts=True)
    except (ConfigError, ManifestParseError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except OSError as e:
        logger.error(f"Cannot read input: {e}")
        return EXIT_INPUT

    sample = samples.by_id().get(args.sample)
    if sample is None:
        logger.error(f"Unknown sample id '{args.sample}'")
        return EXIT_INPUT

    plan = replica_plan(config.enlargement_factor, config.trajectory.frames_per_scene)
    if not 1 <= args.replica <= len(plan):
        logger.error(f"Replica must be in 1..{len(plan)} for enlargement factor {config.enlargement_factor}")
        return EXIT_INPUT
    slot = plan[args.replica - 1]
    if args.frame is not None:
        if not 0 <= args.frame < config.trajectory.frames_per_scene:
            logger.error(f"Frame must be in 0..{config.trajectory.frames_per_scene - 1}")
            return EXIT_INPUT
        slot = ReplicaSlot(slot.replica, slot.scene_slot, args.frame)
    scene_slots = plan[-1].scene_slot + 1

    print(f"Master seed: {config.seed}")
    try:
        image = read_image(sample.absolute_path)
        frame = render_replica_frame(image, config, sample.id, slot, scene_slots=scene_slots)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        draw_quad_overlay(frame.image, frame.quad.corners).save(out, format='PNG')
    except (BehindCameraError, DegeneratePoseError) as e:
        logger.error(f"Frame cannot be rendered: {e}")
        return EXIT_RUNTIME
    except (OSError, SampleError) as e:
        logger.error(f"Inspect failed: {e}")
        return EXIT_RUNTIME

    prov = frame.provenance
    print(f"Sample: {sample.id} replica {slot.replica} frame {slot.frame}")
    print(f"Camera: {prov.camera} radius {prov.radius:.4f} m psi {prov.psi:.2f} deg")
    print("Quad: " + " ".join(f"({x!r}, {y!r})" for x, y in frame.quad.corners))
    print(f"Frame written: {out} ({frame.width}x{frame.height})")

    if args.extracted:
        result = extract_line(frame, sample.height)
        if not result.accepted:
            logger.warning("Extraction rejected [%s]: %s", result.reason, result.message)
            print(f"Extraction rejected: {result.reason}")
        else:
            line_path = out.with_name(f"{out.stem}_line.png")
            try:
                write_png(result.image, line_path)
            except OSError as e:
                logger.error(f"Cannot write extracted line: {e}")
                return EXIT_RUNTIME
            print(f"Extracted line written: {line_path} ({result.image.shape[1]}x{result.image.shape[0]})")
    return EXIT_OK


def cmd_take_fraction(args) -> int:
    try:
        samples = load_manifest(args.input, strict=args.strict, decode_images=False)
        selected = take_fraction(list(samples), args.fraction, args.seed)
    except (ManifestParseError, SampleError, ValueError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except OSError as e:
        logger.error(f"Cannot read input: {e}")
        return EXIT_INPUT

    try:
        count = write_sample_manifest(selected, args.out)
    except OSError as e:
        logger.error(f"Cannot write manifest: {e}")
        return EXIT_RUNTIME

    print(f"Master seed: {args.seed}")
    print(f"Input: {len(samples)} ({format_class_counts(class_counts(samples))})")
    print(f"Selected: {count} ({format_class_counts(class_counts(selected))})")
    print(f"Manifest: {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    runs = []
    try:
        reference = EvalReport.load_json(args.reference)
        for spec in args.run:
            name, sep, path = spec.partition('=')
            if not sep or not name or not path:
                raise EvalInputError(f"--run expects NAME=REPORT.json, got '{spec}'")
            runs.append((name, EvalReport.load_json(path)))
    except EvalInputError as e:
        logger.error(str(e))
        return EXIT_INPUT

    rows = compare_reports(reference, runs, kind='micro' if args.micro else 'macro')
    for line in format_comparison(rows):
        print(line)
    if args.csv:
        try:
            export_comparison_csv(rows, args.csv)
        except OSError as e:
            logger.error(f"Cannot write CSV: {e}")
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_create_config(args) -> int:
    try:
        created = AugmentConfig.create_sample_config(args.path)
    except OSError as e:
        logger.error(f"Error creating config file: {e}")
        return EXIT_RUNTIME
    if created:
        print(f"Sample configuration file created: {args.path}")
        print("Edit this file to customize cameras, lights and trajectory.")
    else:
        print(f"Configuration file already exists: {args.path}")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='ocraug', description='3D-scene data augmentation for OCR text lines')
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    parser.add_argument('--log-file', help='Also write the log to this file')
    subparsers = parser.add_subparsers(dest='command', help='Available commands', parser_class=ArgumentParser)

    augment = subparsers.add_parser('augment', help='Augment a manifest')
    augment.add_argument('--input', required=True, help='Input manifest (image_path<TAB>difficulty<TAB>transcript)')
    augment.add_argument('--out', required=True, help='Output directory')
    augment.add_argument('--config', help='Configuration JSON (defaults if omitted)')
    augment.add_argument('--factor', type=int, help='Enlargement factor (overrides config)')
    augment.add_argument('--seed', type=int, help='Master seed (overrides config)')
    augment.add_argument('--workers', type=int, help='Worker processes (overrides config)')
    augment.add_argument('--strict', action='store_true', help='Fail on the first unreadable sample')
    augment.add_argument('--allow-empty', action='store_true', help='Accept empty transcripts')
    augment.add_argument('--take-fraction', type=float, metavar='F',
                         help='Augment a stratified fraction of the input only')
    augment.set_defaults(handler=cmd_augment)

    evaluate = subparsers.add_parser('evaluate', help='Score hypotheses against a reference manifest')
    evaluate.add_argument('--ref', required=True, help='Reference manifest')
    evaluate.add_argument('--hyp', required=True, help='Hypothesis file (id<TAB>text)')
    evaluate.add_argument('--report', help='Write the JSON report here')
    evaluate.add_argument('--csv', help='Write the CSV table here')
    evaluate.set_defaults(handler=cmd_evaluate)

    inspect = subparsers.add_parser('inspect', help='Render one frame with the text quad outlined')
    inspect.add_argument('--input', required=True, help='Input manifest')
    inspect.add_argument('--config', help='Configuration JSON (defaults if omitted)')
    inspect.add_argument('--sample', required=True, help='Sample id (image path as in the manifest)')
    inspect.add_argument('--replica', type=int, default=1, help='Replica index (default 1)')
    inspect.add_argument('--frame', type=int, help='Frame index (default: the replica\'s frame)')
    inspect.add_argument('--factor', type=int, help='Enlargement factor (overrides config)')
    inspect.add_argument('--seed', type=int, help='Master seed (overrides config)')
    inspect.add_argument('--out', required=True, help='Output PNG')
    inspect.add_argument('--extracted', action='store_true', help='Also write the extracted line')
    inspect.set_defaults(handler=cmd_inspect)

    fraction = subparsers.add_parser('take-fraction', help='Stratified subset of a manifest')
    fraction.add_argument('--input', required=True, help='Input manifest')
    fraction.add_argument('--fraction', type=float, required=True, help='Fraction in (0, 1]')
    fraction.add_argument('--seed', type=int, default=0, help='Master seed')
    fraction.add_argument('--out', required=True, help='Output manifest')
    fraction.add_argument('--strict', action='store_true', help='Fail on the first unusable sample')
    fraction.set_defaults(handler=cmd_take_fraction)

    compare = subparsers.add_parser('compare', help='Compare evaluation reports to a reference')
    compare.add_argument('--reference', required=True, help='Reference report JSON')
    compare.add_argument('--run', action='append', required=True, metavar='NAME=REPORT',
                         help='Run report to compare (repeatable)')
    compare.add_argument('--micro', action='store_true', help='Compare pooled instead of per-line rates')
    compare.add_argument('--csv', help='Write the table as CSV')
    compare.set_defaults(handler=cmd_compare)

    create = subparsers.add_parser('create-config', help='Write the default configuration')
    create.add_argument('path', help='Configuration file to create')
    create.set_defaults(handler=cmd_create_config)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_INPUT
    setup_logging(args.verbose, args.log_file)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
