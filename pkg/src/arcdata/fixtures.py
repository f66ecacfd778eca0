"""Synthetic episode corpora and depth grids for tests and demos.

Everything here is seeded and deterministic: the generator doubles as the
oracle for ingestion tests (known episode/frame counts, known dimensionality,
known gripper paths).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .episodes import (
    BIMANUAL,
    SINGLE_ARM,
    DepthGrid,
    Episode,
    Frame,
    save_depth_grid,
    write_manifest,
)

_INSTRUCTIONS = (
    "put the bowl in the sink",
    "close the drawer",
    "put the fork in the bin",
    "open the microwave",
    "wipe the table",
    "pick up the sponge",
    "put the cup on the plate",
    "close the lid",
    "turn the handle",
    "put the can in the bin",
)

DEFAULT_IMAGE_EDGE = 64
DEFAULT_DEPTH_SHAPE = (48, 64)  # (height, width)


def ramp_grid(height: int, width: int) -> DepthGrid:
    """A linear ramp: 0.0 at the top-left corner, 1.0 at the bottom-right."""
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    values = (rows + cols) / float((height - 1) + (width - 1))
    return DepthGrid(width=width, height=height, values=values.astype(np.float32))


def checker_grid(height: int, width: int, block: int = 8, phase: int = 0) -> DepthGrid:
    rows = np.arange(height)[:, None] // block
    cols = np.arange(width)[None, :] // block
    values = ((rows + cols + phase) % 2).astype(np.float32)
    return DepthGrid(width=width, height=height, values=values)


def depth_corpus(n: int, seed: int, shape: tuple[int, int] = (64, 64)) -> list[DepthGrid]:
    """A seeded mix of tilted ramps, checkers, and radial bumps."""
    rng = np.random.Generator(np.random.PCG64(seed))
    height, width = shape
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    grids = []
    for i in range(n):
        style = i % 3
        if style == 0:
            a, b = rng.random(2) + 0.1
            values = a * rows / height + b * cols / width
        elif style == 1:
            block = int(rng.integers(4, 13))
            values = (((rows // block) + (cols // block) + int(rng.integers(2))) % 2).astype(
                np.float64
            )
            values += 0.05 * rng.random((height, width))
        else:
            cy = rng.random() * height
            cx = rng.random() * width
            values = np.hypot(rows - cy, cols - cx) / np.hypot(height, width)
        grids.append(
            DepthGrid(width=width, height=height, values=values.astype(np.float32))
        )
    return grids


def _gripper_path(rng: np.random.Generator, frames: int) -> list[tuple[float, float]]:
    # smooth arc from one side of the workspace to the other, kept in [5, 95]
    x0, y0 = rng.uniform(5, 40, 2)
    x1, y1 = rng.uniform(60, 95, 2)
    bow = rng.uniform(-20, 20)
    points = []
    for f in range(frames):
        s = f / max(frames - 1, 1)
        x = x0 + (x1 - x0) * s
        y = y0 + (y1 - y0) * s + bow * s * (1 - s)
        points.append((float(np.clip(x, 0, 100)), float(np.clip(y, 0, 100))))
    return points


def _frame_image(edge: int, grippers, palette_shift: int) -> Image.Image:
    arr = np.zeros((edge, edge, 3), dtype=np.uint8)
    ramp = np.linspace(40, 120, edge).astype(np.uint8)
    arr[..., 0] = ramp[None, :]
    arr[..., 1] = ramp[:, None]
    arr[..., 2] = (palette_shift * 37) % 200
    for arm, (x, y) in enumerate(grippers):
        px = int(round(x / 100 * (edge - 1)))
        py = int(round(y / 100 * (edge - 1)))
        lo_x, hi_x = max(px - 2, 0), min(px + 3, edge)
        lo_y, hi_y = max(py - 2, 0), min(py + 3, edge)
        arr[lo_y:hi_y, lo_x:hi_x] = (230, 60 + 120 * arm, 60)
    return Image.fromarray(arr, mode="RGB")


def generate_corpus(
    out_root: str | Path,
    episodes: int = 10,
    frames: int = 30,
    seed: int = 0,
    bimanual: bool = False,
    image_edge: int = DEFAULT_IMAGE_EDGE,
    depth_shape: tuple[int, int] = DEFAULT_DEPTH_SHAPE,
) -> list[Path]:
    """Write a synthetic corpus of episode directories and return their paths.

    Single-arm episodes have 7 action dimensions, bimanual ones 14.  The
    default settings produce the ``mini10`` fixture: 10 episodes x 30 frames.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    arms = 2 if bimanual else 1
    dims = 7 * arms
    depth_h, depth_w = depth_shape

    episode_dirs = []
    for ep in range(episodes):
        ep_dir = out_root / f"ep{ep:03d}"
        ep_dir.mkdir(parents=True, exist_ok=True)
        instruction = _INSTRUCTIONS[ep % len(_INSTRUCTIONS)]
        paths = [_gripper_path(rng, frames) for _ in range(arms)]
        action = rng.uniform(-0.5, 0.5, dims)

        frame_objs = []
        for f in range(frames):
            action = action + rng.normal(0.0, 0.05, dims)
            grippers = tuple(paths[a][f] for a in range(arms))

            rgb_ref = f"rgb_{f:04d}.png"
            _frame_image(image_edge, grippers, ep).save(ep_dir / rgb_ref, format="PNG")

            depth_ref = f"depth_{f:04d}.bin"
            tilt = rng.random(2) + 0.2
            rows = np.arange(depth_h, dtype=np.float64)[:, None]
            cols = np.arange(depth_w, dtype=np.float64)[None, :]
            bump_y = paths[0][f][1] / 100 * depth_h
            bump_x = paths[0][f][0] / 100 * depth_w
            values = (
                tilt[0] * rows / depth_h
                + tilt[1] * cols / depth_w
                + np.exp(-((rows - bump_y) ** 2 + (cols - bump_x) ** 2) / 60.0)
            )
            grid = DepthGrid(
                width=depth_w, height=depth_h, values=values.astype(np.float32)
            )
            save_depth_grid(grid, ep_dir / depth_ref)

            frame_objs.append(
                Frame(
                    index=f,
                    rgb_refs=(rgb_ref,),
                    depth_ref=depth_ref,
                    gripper_points=grippers,
                    action=action.copy(),
                    instruction=instruction,
                )
            )

        episode = Episode(
            id=ep_dir.name,
            frames=tuple(frame_objs),
            embodiment=BIMANUAL if bimanual else SINGLE_ARM,
            source=out_root.name,
            root=ep_dir,
        )
        write_manifest(episode, ep_dir)
        episode_dirs.append(ep_dir)
    return episode_dirs
