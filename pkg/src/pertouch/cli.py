"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 input format error,
4 processing error. With --json, errors also go to stderr as one
machine-readable JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import agent
from .augment import AugmentConfig, prepare_dataset
from .errors import (
    FormatError,
    InvalidArgumentError,
    NotFoundError,
    ParseError,
    PerTouchError,
    StorageError,
)
from .imagecore import Image, psnr
from .instruction import WeakInstruction, parse as parse_instruction
from .parammap import build_map, load_pmap, save_pmap
from .retouch import TransferConfig, get_backend, render
from .segmentation import load_segmentation

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_PROCESSING = 4


def _load_image_and_mask(image_path: str, mask_path: str):
    img = Image.from_file(image_path)
    seg = load_segmentation(mask_path, img.width, img.height)
    return img, seg


def _cmd_score(args) -> int:
    img, seg = _load_image_and_mask(args.image, args.mask)
    pm = build_map(img, seg)
    out = {str(rid): vec.to_dict() for rid, vec in sorted(pm.scores.items())}
    json.dump(out, sys.stdout, indent=2)
    print()
    return EXIT_OK


def _cmd_build_map(args) -> int:
    img, seg = _load_image_and_mask(args.image, args.mask)
    save_pmap(build_map(img, seg), args.output)
    return EXIT_OK


def _cmd_apply(args) -> int:
    img = Image.from_file(args.image)
    pm = load_pmap(args.pmap)
    render(img, pm, TransferConfig()).save_png(args.output)
    return EXIT_OK


def _raster_to_png(values: np.ndarray, path: Path) -> None:
    # [-1, 1] values stored as round((v + 1) / 2 * 255) gray levels.
    levels = np.rint((values + 1.0) / 2.0 * 255.0).astype(np.uint8)
    PILImage.fromarray(levels, mode="L").save(path, format="PNG")


def _cmd_augment(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{args.manifest}: invalid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise FormatError("manifest must be a JSON list of {image, mask} objects")
    base = manifest_path.parent
    inputs = []
    stems = []
    for i, entry in enumerate(entries):
        try:
            image_path = base / entry["image"]
            mask_path = base / entry["mask"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"manifest entry {i} malformed: {exc}") from exc
        img = Image.from_file(image_path)
        seg = load_segmentation(mask_path, img.width, img.height)
        inputs.append((img, seg))
        stems.append(Path(entry["image"]).stem)
    cfg = AugmentConfig(replacement_probability=args.replace_prob, seed=args.seed)
    samples = prepare_dataset(inputs, cfg)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    for stem, sample in zip(stems, samples):
        save_pmap(sample.pair.map, out_dir / f"{stem}.pmap.json")
        sample.pair.target.save_png(out_dir / f"{stem}.target.png")
        for k, raster in enumerate(sample.perturbed_channels):
            _raster_to_png(raster.values, out_dir / f"{stem}.ch{k}.png")
    return EXIT_OK


def _cmd_instruct(args) -> int:
    img, seg = _load_image_and_mask(args.image, args.mask)
    bank = agent.MemoryBank.load(args.memory) if args.memory else agent.MemoryBank()
    instr = parse_instruction(args.text)
    if isinstance(instr, WeakInstruction):
        result = agent.weak_edit(img, seg, bank)
    else:
        result = agent.strong_edit(img, seg, bank, instr)
    result.output.save_png(args.output)
    rescored = build_map(result.output, seg)
    report = {
        "rounds": result.rounds,
        "saturated": result.saturated,
        "scores": {str(rid): vec.to_dict() for rid, vec in sorted(rescored.scores.items())},
    }
    json.dump(report, sys.stdout, indent=2)
    print()
    return EXIT_OK


def _cmd_psnr(args) -> int:
    a = Image.from_file(args.a)
    b = Image.from_file(args.b)
    print(repr(psnr(a, b)))
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import ServiceConfig, run_service

    run_service(ServiceConfig.from_file(args.config))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pertouch", description="Region-aware instruction-driven image retouching."
    )
    parser.add_argument(
        "--json", action="store_true", help="emit machine-readable errors on stderr"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="print per-region attribute scores as JSON")
    p.add_argument("image")
    p.add_argument("mask")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("build-map", help="measure an image into a PMAP file")
    p.add_argument("image")
    p.add_argument("mask")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_build_map)

    p = sub.add_parser("apply", help="render an image under a PMAP file")
    p.add_argument("image")
    p.add_argument("pmap")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("augment", help="build training pairs from a manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replace-prob", type=float, default=0.1)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("instruct", help="run one DSL command through the agent")
    p.add_argument("image")
    p.add_argument("mask")
    p.add_argument("text")
    p.add_argument("--memory", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_instruct)

    p = sub.add_parser("psnr", help="peak signal-to-noise ratio between two images")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_psnr)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_serve)

    return parser


def _report_error(args, code: str, exc: Exception) -> None:
    message = str(exc)
    if getattr(args, "json", False):
        payload = {"error": code, "message": message}
        offset = getattr(exc, "offset", None)
        if offset is not None:
            payload["offset"] = offset
        print(json.dumps(payload), file=sys.stderr)
    else:
        print(f"pertouch: {code}: {message}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ParseError, InvalidArgumentError, FileNotFoundError) as exc:
        _report_error(args, "input-error", exc)
        return EXIT_INPUT
    except (NotFoundError, StorageError, PerTouchError, OSError) as exc:
        _report_error(args, "processing-error", exc)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
