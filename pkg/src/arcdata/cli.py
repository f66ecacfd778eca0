"""Command line entry point.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .actions import ActionQuantileStats, ActionVocabulary
from .chains import SAMPLE_KINDS, make_steering_request
from .depth import DepthCodebook, train_codebook
from .episodes import find_episode_dirs
from .fixtures import generate_corpus
from .mixture import validate_config
from .overlay import RgbImage, YELLOW, overlay_trace
from .pipeline import (
    convert_corpus,
    dataset_report,
    fit_corpus_stats,
    format_report,
    load_corpus_grids,
)
from .traces import MAX_POINTS, VisualTrace


class CliError(RuntimeError):
    """Runtime failure; main() reports it and exits 1."""


class CliUsageError(RuntimeError):
    """Bad arguments detected past argparse; main() reports it and exits 2."""


def _episode_dirs_or_fail(roots) -> list[Path]:
    dirs = find_episode_dirs(roots)
    if not dirs:
        raise CliError("no episodes found under the given roots")
    return dirs


def cmd_gen_fixture(args) -> int:
    dirs = generate_corpus(
        args.out,
        episodes=args.episodes,
        frames=args.frames,
        seed=args.seed,
        bimanual=args.bimanual,
    )
    print(f"wrote {len(dirs)} episodes under {args.out}")
    return 0


def cmd_fit_stats(args) -> int:
    dirs = _episode_dirs_or_fail(args.roots)
    stats = fit_corpus_stats(dirs)
    stats.save(args.out)
    print(f"fit {stats.dims}-dim quantile stats over {len(dirs)} episodes -> {args.out}")
    return 0


def cmd_train_codebook(args) -> int:
    dirs = _episode_dirs_or_fail(args.roots)
    grids = load_corpus_grids(dirs)
    if not grids:
        raise CliError("no depth grids found in the given episodes")
    book = train_codebook(grids, seed=args.seed)
    book.save(args.out)
    print(f"trained {book.n_codes}-code depth codebook on {len(grids)} grids -> {args.out}")
    return 0


def cmd_convert(args) -> int:
    if args.chunk_size < 1:
        raise CliUsageError(f"--chunk-size must be >= 1, got {args.chunk_size}")
    dirs = _episode_dirs_or_fail(args.roots)
    stats = ActionQuantileStats.load(args.stats)
    book = DepthCodebook.load(args.codebook)
    vocab = ActionVocabulary.load()
    kinds = _parse_kinds(args.kinds)
    counts = convert_corpus(
        dirs,
        args.out,
        stats,
        book,
        vocab,
        kinds=kinds,
        chunk_size=args.chunk_size,
        strict=args.strict,
    )
    for kind in kinds:
        print(f"{kind}: {counts[kind]} samples (verified)")
    return 0


def cmd_stats(args) -> int:
    dirs = _episode_dirs_or_fail(args.roots)
    print(format_report(dataset_report(dirs)))
    return 0


def cmd_check_mixture(args) -> int:
    config = validate_config(args.config)
    print(f"{args.config}: {len(config.streams)} streams, weights sum to 1.0")
    return 0


def cmd_steer(args) -> int:
    points = _parse_points(args.trace)
    trace = VisualTrace(points=points)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    image = RgbImage.load(args.image)
    overlay_path = out_dir / "overlay.png"
    overlay_trace(image, trace, color=args.overlay_color).save(overlay_path)

    # image ref is relative to the request file, so outputs are byte-identical
    # for the same inputs regardless of --out
    request = make_steering_request("overlay.png", args.instruction, trace)
    request_path = out_dir / "request.json"
    request_path.write_text(request.to_json_line() + "\n", encoding="utf-8")
    print(f"wrote {overlay_path} and {request_path}")
    return 0


def _parse_kinds(value: str) -> tuple[str, ...]:
    if value == "all":
        return SAMPLE_KINDS
    kinds = tuple(k.strip() for k in value.split(",") if k.strip())
    if not kinds:
        raise CliUsageError("--kinds needs at least one sample kind")
    for kind in kinds:
        if kind not in SAMPLE_KINDS:
            raise CliUsageError(
                f"unknown sample kind {kind!r}; choose from {', '.join(SAMPLE_KINDS)}"
            )
    return kinds


def _parse_points(text: str) -> tuple[tuple[int, int], ...]:
    try:
        raw = json.loads(text)
        points = tuple((int(p[0]), int(p[1])) for p in raw)
    except (ValueError, TypeError, IndexError):
        raise CliUsageError('trace must look like "[[u1,v1],[u2,v2],...]"') from None
    if not 1 <= len(points) <= MAX_POINTS:
        raise CliUsageError(f"trace must have 1-{MAX_POINTS} points, got {len(points)}")
    for u, v in points:
        if not (0 <= u <= 255 and 0 <= v <= 255):
            raise CliUsageError(f"trace point ({u}, {v}) outside [0, 255]")
    return points


def _color(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("color must be R,G,B")
    try:
        rgb = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("color must be R,G,B integers") from None
    if any(not 0 <= c <= 255 for c in rgb):
        raise argparse.ArgumentTypeError("color channels must be in [0, 255]")
    return rgb


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arcdata",
        description="Convert robot episodes into tokenized action reasoning data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-fixture", help="emit a synthetic episode corpus")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bimanual", action="store_true")
    p.set_defaults(func=cmd_gen_fixture)

    p = sub.add_parser("fit-stats", help="fit per-dimension action quantile stats")
    p.add_argument("roots", nargs="+", help="episode directories or corpus roots")
    p.add_argument("--out", default="stats.json")
    p.set_defaults(func=cmd_fit_stats)

    p = sub.add_parser("train-codebook", help="train the depth token codebook")
    p.add_argument("roots", nargs="+")
    p.add_argument("--out", default="depth_codebook.bin")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_codebook)

    p = sub.add_parser("convert", help="convert episodes into JSONL sample streams")
    p.add_argument("roots", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--stats", required=True, help="stats.json from fit-stats")
    p.add_argument("--codebook", required=True, help="codebook from train-codebook")
    p.add_argument(
        "--chunk-size", type=int, default=1, help="actions per target (8 for post-training)"
    )
    p.add_argument("--kinds", default="all", help="comma list of sample kinds, or 'all'")
    p.add_argument("--strict", action="store_true", help="abort on the first bad frame")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", help="report dataset statistics (verb distribution)")
    p.add_argument("roots", nargs="+")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("check-mixture", help="validate a mixture config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_check_mixture)

    p = sub.add_parser("steer", help="build a steering request from a drawn trace")
    p.add_argument("--image", required=True, help="observation PNG")
    p.add_argument("--trace", required=True, help='points as "[[u1,v1],[u2,v2],...]"')
    p.add_argument("--instruction", default="", help="optional task instruction")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--overlay-color", type=_color, default=YELLOW, metavar="R,G,B")
    p.set_defaults(func=cmd_steer)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
