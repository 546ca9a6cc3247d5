"""Command-line entry point.

Data goes to files, diagnostics go to stderr. Exit codes: 0 success,
1 usage error, 2 data error (bad manifests, unreadable images, malformed
config), 3 internal failure. Every command is deterministic: identical
inputs and flags produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback

from . import dataset, metrics, ops, pipeline, sift
from .errors import ToolError
from .image import load_image, save_image

log = logging.getLogger("touchprint")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    p = _Parser(prog="touchprint", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("scan", help="inventory a subject-per-directory image tree")
    sp.add_argument("--root", required=True, help="dataset root directory")
    sp.add_argument("--out", required=True, help="manifest CSV to write")
    sp.add_argument("--modality", default="touchless", choices=dataset.MODALITIES)

    sp = sub.add_parser("split", help="assign train/test splits to a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--fraction", required=True, type=float, help="train fraction in (0, 1)")
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--out", required=True, help="split manifest CSV to write")

    for name, helptext in (
        ("augment", "run the photometric augmentation pipeline over a manifest"),
        ("enhance", "run the ridge enhancement pipeline over a manifest"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--manifest", required=True)
        sp.add_argument("--images", help="image root (default: the manifest's directory)")
        sp.add_argument("--config", help="pipeline config JSON (default: built-in)")
        sp.add_argument("--out-dir", required=True)
        sp.add_argument("--out-manifest", required=True)
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        sp.add_argument(
            "--modality",
            default="touchless",
            choices=(*dataset.MODALITIES, "all"),
            help="which records to process (default: touchless)",
        )

    sp = sub.add_parser("prepare", help="resize manifest images for trainer ingest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--images", help="image root (default: the manifest's directory)")
    sp.add_argument("--size", type=int, default=224, help="square target size (default 224)")
    sp.add_argument("--out-dir", required=True)

    sp = sub.add_parser("evaluate", help="summarize a predictions CSV")
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--classes", required=True, type=int, help="number of classes K")
    sp.add_argument("--out", required=True, help="summary JSON to write")
    sp.add_argument("--model", default="", help="model name recorded in the summary")

    sp = sub.add_parser("report", help="render a without/with-preprocessing comparison")
    sp.add_argument("--without", required=True, nargs="+", metavar="SUMMARY_JSON")
    sp.add_argument("--with", dest="with_", required=True, nargs="+", metavar="SUMMARY_JSON")
    sp.add_argument("--out", required=True, help="plain-text report to write")
    sp.add_argument("--json-out", help="machine-readable report to write")

    sp = sub.add_parser("sift-dump", help="dump keypoints for one image as JSON")
    sp.add_argument("--image", required=True)
    sp.add_argument("--out", required=True)

    return p


def _load_and_filter(path: str, modality: str, images_root: str | None = None) -> dataset.Manifest:
    m = dataset.read_manifest(path, source_root=images_root)
    if modality != "all":
        m = m.filter(modality=modality)
    return m


def _cmd_scan(args) -> int:
    manifest = dataset.scan_root(args.root, modality=args.modality)
    dataset.write_manifest(manifest, args.out)
    log.info("scanned %d records across %d subjects", len(manifest.records), manifest.class_count)
    return EXIT_OK


def _cmd_split(args) -> int:
    manifest = dataset.read_manifest(args.manifest)
    result = dataset.assign_splits(manifest, args.fraction, args.seed)
    dataset.write_manifest(result, args.out)
    log.info("split: %d train / %d test", result.count("train"), result.count("test"))
    return EXIT_OK


def _cmd_pipeline(args, default_cfg) -> int:
    manifest = _load_and_filter(args.manifest, args.modality, args.images)
    cfg = pipeline.load_config(args.config) if args.config else default_cfg()
    derived, failures = pipeline.run_batch(manifest, cfg, args.out_dir, jobs=args.jobs)
    dataset.write_manifest(derived, args.out_manifest)
    log.info(
        "pipeline %s: %d inputs -> %d outputs, %d failures",
        cfg.name, len(manifest.records), len(derived.records), len(failures),
    )
    for path, error in failures:
        log.error("  %s: %s", path, error)
    return EXIT_OK if not failures else EXIT_DATA


def _cmd_prepare(args) -> int:
    manifest = dataset.read_manifest(args.manifest, source_root=args.images)
    if args.size < 1:
        raise ToolError(f"size must be >= 1, got {args.size}")
    os.makedirs(args.out_dir, exist_ok=True)
    for record in manifest.records:
        img = load_image(os.path.join(manifest.source_root, record.path))
        resized = ops.resize_bilinear(img, args.size, args.size)
        out_path = os.path.join(args.out_dir, record.path)
        os.makedirs(os.path.dirname(out_path) or args.out_dir, exist_ok=True)
        save_image(resized, out_path)
    log.info("prepared %d images at %dx%d", len(manifest.records), args.size, args.size)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    preds, k = metrics.read_predictions(args.predictions)
    if k != args.classes:
        raise ToolError(f"{args.predictions}: file has {k} classes, --classes says {args.classes}")
    model = args.model or os.path.splitext(os.path.basename(args.predictions))[0]
    summary = metrics.summarize(preds, k, model_name=model)
    metrics.write_summary(summary, args.out)
    log.info("evaluate %s: accuracy %.4f loss %.4f", model, summary.accuracy, summary.loss)
    return EXIT_OK


def _cmd_report(args) -> int:
    without = [metrics.read_summary(p) for p in args.without]
    with_ = [metrics.read_summary(p) for p in args.with_]
    report = metrics.compare_reports(without, with_)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_text())
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report.to_json_dict(), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_sift_dump(args) -> int:
    img = ops.to_grayscale(load_image(args.image))
    space = sift.build_scale_space(img)
    kps = sift.detect_keypoints(space)
    described = sift.compute_descriptors(img, kps, space=space)
    doc = sift.keypoint_dicts([kp for kp, _ in described])
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    log.info("%s: %d keypoints, %d oriented descriptors", args.image, len(kps), len(doc))
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help and friends
        return int(e.code or 0)

    handlers = {
        "scan": _cmd_scan,
        "split": _cmd_split,
        "augment": lambda a: _cmd_pipeline(a, pipeline.default_direct_config),
        "enhance": lambda a: _cmd_pipeline(a, pipeline.default_indirect_config),
        "prepare": _cmd_prepare,
        "evaluate": _cmd_evaluate,
        "report": _cmd_report,
        "sift-dump": _cmd_sift_dump,
    }
    try:
        return handlers[args.command](args)
    except ToolError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
