"""Command-line entry point.

Subcommands:

    generate         run the full pipeline from a config file
    eval             score a prediction file against a manifest
    contact-sheet    compose an (edge map, image) grid for eyeballing
    validate-config  parse + validate a config and its meshes

Exit codes: 0 success; 1 unusable inputs (config, meshes, predictions);
2 partial generation failures (manifest still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .config import load_config
from .dataset import MeshRepository, read_manifest
from .errors import ConfigError, CoverageError, ManifestError, MeshPromptError
from .evaluation import ACC_THRESHOLDS, evaluate_rotations, load_predictions, top1_accuracy
from .pipeline import generate_dataset


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_generate(args) -> int:
    try:
        config = load_config(args.config, output_override=args.out)
    except ConfigError as exc:
        _err(str(exc))
        return 1
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.mock_diffusion:
        overrides["diffusion"] = dataclasses.replace(config.diffusion, mock=True)
    if args.mock_llm:
        overrides["llm"] = dataclasses.replace(config.llm, mock=True)
    if overrides:
        config = dataclasses.replace(config, **overrides)

    try:
        result = generate_dataset(
            config,
            fresh=args.fresh,
            log=None if args.quiet else (lambda m: print(m, file=sys.stderr)),
        )
    except (MeshPromptError, FileNotFoundError) as exc:
        _err(str(exc))
        return 1

    counts = result.manifest.counts
    print(
        f"wrote {len(result.manifest.records)} records "
        f"({result.generated} generated, {result.reused} reused, {result.failed} failed) "
        f"to {config.output_dir / 'manifest.jsonl'}"
    )
    print(f"per-class counts: {json.dumps(counts)}")
    return 2 if result.failed else 0


def _parse_threshold(text: str) -> float:
    # accepts plain floats and "pi/6"-style fractions
    text = text.strip().lower()
    if text.startswith("pi/"):
        return math.pi / float(text[3:])
    if text == "pi":
        return math.pi
    return float(text)


def cmd_eval(args) -> int:
    try:
        manifest = read_manifest(args.manifest)
    except (ManifestError, FileNotFoundError) as exc:
        _err(str(exc))
        return 1
    try:
        kind, preds = load_predictions(args.predictions)
    except (ManifestError, FileNotFoundError) as exc:
        _err(str(exc))
        return 1

    thresholds = tuple(_parse_threshold(t) for t in args.threshold) if args.threshold else ACC_THRESHOLDS
    try:
        if kind == "rotation":
            report = evaluate_rotations(preds, manifest, thresholds)
            payload = report.to_json()
            if args.table:
                print(report.table(), file=sys.stderr)
        else:
            payload = {"count": len(manifest.ok_records), "accuracy": top1_accuracy(preds, manifest)}
    except (CoverageError, ValueError) as exc:
        _err(str(exc))
        return 1

    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_contact_sheet(args) -> int:
    try:
        manifest = read_manifest(args.manifest)
    except (ManifestError, FileNotFoundError) as exc:
        _err(str(exc))
        return 1
    ok = manifest.ok_records
    if not ok:
        _err("manifest has no ok records")
        return 1
    n = min(args.n, len(ok))
    picks = sorted({int(round(i)) for i in np.linspace(0, len(ok) - 1, n)})
    records = [ok[i] for i in picks]

    root = Path(args.manifest)
    if root.is_file():
        root = root.parent
    cells = []
    for r in records:
        with Image.open(root / r.edge_map_path) as e:
            edge = e.convert("RGB").copy()
        with Image.open(root / r.image_path) as g:
            img = g.convert("RGB").copy()
        cells.append((edge, img))

    cw = max(c.width for pair in cells for c in pair)
    ch = max(c.height for pair in cells for c in pair)
    sheet = Image.new("RGB", (cw * len(cells), ch * 2), (255, 255, 255))
    for col, (edge, img) in enumerate(cells):
        sheet.paste(edge, (col * cw, 0))
        sheet.paste(img, (col * cw, ch))
    sheet.save(args.out, format="PNG")
    print(f"wrote {len(cells)}-column contact sheet to {args.out}")
    return 0


def cmd_validate_config(args) -> int:
    try:
        config = load_config(args.config, output_override=args.out)
    except ConfigError as exc:
        _err(str(exc))
        return 1
    problems = []
    repo = MeshRepository(config.mesh_root)
    for spec in config.classes:
        for cad in spec.cad_models:
            try:
                repo.load(cad)
            except (MeshPromptError, FileNotFoundError) as exc:
                problems.append(f"class {spec.name!r} model {cad!r}: {exc}")
    if problems:
        for p in problems:
            _err(p)
        return 1
    n_models = sum(len(s.cad_models) for s in config.classes)
    print(
        f"config ok: {len(config.classes)} classes, {n_models} CAD models, "
        f"{config.images_per_class} images/class -> {config.output_dir}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshprompt", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int, default=None, help="override base_seed")
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--mock-diffusion", action="store_true", help="force the mock diffusion backend")
    g.add_argument("--mock-llm", action="store_true", help="force the mock LLM client")
    g.add_argument("--fresh", action="store_true", help="ignore the journal and start over")
    g.add_argument("--out", default=None, help="override output_dir")
    g.add_argument("--quiet", action="store_true")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("eval", help="evaluate predictions against a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--predictions", required=True)
    e.add_argument(
        "--threshold", action="append", default=None,
        help="accuracy threshold in radians (or pi/N); repeatable; default pi/6 and pi/18",
    )
    e.add_argument("--out", default=None, help="also write the JSON report here")
    e.add_argument("--table", action="store_true", help="print a text table to stderr")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("contact-sheet", help="write an inspection grid of edge maps and images")
    c.add_argument("--manifest", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("-n", type=int, default=8, help="number of (edge map, image) pairs")
    c.set_defaults(func=cmd_contact_sheet)

    v = sub.add_parser("validate-config", help="check a config file and its meshes")
    v.add_argument("--config", required=True)
    v.add_argument("--out", default=None, help="output_dir override to validate against")
    v.set_defaults(func=cmd_validate_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
