"""Episode domain types and the on-disk episode format.

An episode directory contains:

* ``episode.jsonl`` -- one JSON object per frame, in frame order, with keys
  ``index``, ``rgb`` (list of relative image paths, primary side view first),
  ``depth`` (relative path of a depth grid, or null), ``grippers`` (per-arm
  ``[x, y]`` points with coordinates in [0, 100]), ``action`` (list of reals),
  and ``instruction`` (UTF-8 text, constant across the episode).
* the referenced PNG images (8-bit RGB) and binary depth grids.

Depth grids use a 16-byte header -- magic ``ARCD``, width (u32 LE), height
(u32 LE), reserved u32 zero -- followed by width*height IEEE-754 32-bit LE
floats in row-major order.  Values are relative (unitless) depth.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import readonly

DEPTH_MAGIC = b"ARCD"
_DEPTH_HEADER = struct.Struct("<4sIII")

SINGLE_ARM = "single_arm"
BIMANUAL = "bimanual"


class EpisodeError(ValueError):
    """Raised when an episode or depth grid fails format or invariant checks."""


@dataclass(frozen=True)
class DepthGrid:
    """A width x height grid of finite relative-depth values (row-major)."""

    width: int
    height: int
    values: np.ndarray  # (height, width) float32, read-only

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise EpisodeError("depth grid dimensions must be positive")
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.shape != (self.height, self.width):
            raise EpisodeError(
                f"depth grid has {arr.size} values, expected {self.width * self.height}"
            )
        if not np.all(np.isfinite(arr)):
            raise EpisodeError("depth grid contains non-finite values")
        object.__setattr__(self, "values", readonly(arr))


@dataclass(frozen=True)
class Frame:
    index: int
    rgb_refs: tuple[str, ...]
    depth_ref: str | None
    gripper_points: tuple[tuple[float, float], ...]  # one (x, y) per arm
    action: np.ndarray  # (D,) float64, read-only
    instruction: str

    def __post_init__(self):
        if self.index < 0:
            raise EpisodeError(f"frame index {self.index} is negative")
        if not self.rgb_refs:
            raise EpisodeError(f"frame {self.index} has no image references")
        if len(self.gripper_points) not in (1, 2):
            raise EpisodeError(
                f"frame {self.index} has {len(self.gripper_points)} gripper arms, "
                "expected 1 (single arm) or 2 (bimanual)"
            )
        for arm, (x, y) in enumerate(self.gripper_points):
            if not (0.0 <= x <= 100.0 and 0.0 <= y <= 100.0):
                raise EpisodeError(
                    f"frame {self.index} arm {arm}: gripper point ({x}, {y}) "
                    "outside [0, 100]"
                )
        action = np.asarray(self.action, dtype=np.float64)
        if action.ndim != 1 or action.size == 0:
            raise EpisodeError(f"frame {self.index} action must be a non-empty vector")
        object.__setattr__(self, "action", readonly(action))


@dataclass(frozen=True)
class Episode:
    id: str
    frames: tuple[Frame, ...]
    embodiment: str  # SINGLE_ARM or BIMANUAL
    source: str
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.frames:
            raise EpisodeError(f"episode {self.id} has no frames")
        if self.embodiment not in (SINGLE_ARM, BIMANUAL):
            raise EpisodeError(f"episode {self.id}: unknown embodiment {self.embodiment!r}")
        arms = 2 if self.embodiment == BIMANUAL else 1
        dims = self.frames[0].action.shape[0]
        instruction = self.frames[0].instruction
        for pos, frame in enumerate(self.frames):
            if frame.index != pos:
                raise EpisodeError(
                    f"episode {self.id}: frame indices must run 0..{len(self.frames) - 1}, "
                    f"found {frame.index} at position {pos}"
                )
            if len(frame.gripper_points) != arms:
                raise EpisodeError(
                    f"episode {self.id} frame {pos}: arm count changed mid-episode"
                )
            if frame.action.shape[0] != dims:
                raise EpisodeError(
                    f"episode {self.id} frame {pos}: action dimension changed "
                    f"from {dims} to {frame.action.shape[0]}"
                )
            if frame.instruction != instruction:
                raise EpisodeError(
                    f"episode {self.id} frame {pos}: instruction changed mid-episode"
                )

    @property
    def dims(self) -> int:
        return self.frames[0].action.shape[0]

    @property
    def instruction(self) -> str:
        return self.frames[0].instruction

    def resolve(self, ref: str) -> Path:
        if self.root is None:
            raise EpisodeError(f"episode {self.id} has no root directory to resolve {ref!r}")
        return self.root / ref


def load_depth_grid(path: str | Path) -> DepthGrid:
    """Read a binary depth grid, bit-exact, validating header and payload."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _DEPTH_HEADER.size:
        raise EpisodeError(f"{path}: truncated depth grid header")
    magic, width, height, _reserved = _DEPTH_HEADER.unpack_from(data)
    if magic != DEPTH_MAGIC:
        raise EpisodeError(f"{path}: bad magic {magic!r}, expected {DEPTH_MAGIC!r}")
    expected = width * height * 4
    payload = data[_DEPTH_HEADER.size:]
    if len(payload) != expected:
        raise EpisodeError(
            f"{path}: header says {width}x{height} ({width * height} values), "
            f"payload has {len(payload) // 4} values"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise EpisodeError(f"{path}: depth grid contains non-finite values")
    return DepthGrid(width=width, height=height, values=values)


def save_depth_grid(grid: DepthGrid, path: str | Path) -> None:
    path = Path(path)
    header = _DEPTH_HEADER.pack(DEPTH_MAGIC, grid.width, grid.height, 0)
    payload = np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    path.write_bytes(header + payload)


def _frame_from_record(record: dict, where: str) -> Frame:
    try:
        grippers = tuple((float(p[0]), float(p[1])) for p in record["grippers"])
        return Frame(
            index=int(record["index"]),
            rgb_refs=tuple(str(r) for r in record["rgb"]),
            depth_ref=None if record.get("depth") is None else str(record["depth"]),
            gripper_points=grippers,
            action=np.asarray(record["action"], dtype=np.float64),
            instruction=str(record["instruction"]),
        )
    except KeyError as exc:
        raise EpisodeError(f"{where}: missing key {exc.args[0]!r}") from None
    except (TypeError, IndexError) as exc:
        raise EpisodeError(f"{where}: malformed record ({exc})") from None


def load_episode(root: str | Path, source: str | None = None) -> Episode:
    """Load and validate one episode directory.

    All invariants are enforced before returning: contiguous frame indices,
    constant action dimensionality, arm count, and instruction, coordinates in
    range, and every referenced image/depth file present on disk.  No partially
    loaded episode is ever returned.
    """
    root = Path(root)
    manifest = root / "episode.jsonl"
    if not manifest.is_file():
        raise FileNotFoundError(str(manifest))

    frames = []
    with open(manifest, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EpisodeError(f"{manifest}:{lineno}: invalid JSON: {exc.msg}") from None
            frames.append(_frame_from_record(record, f"{manifest}:{lineno}"))

    if source is None:
        source = root.parent.name
    arms = len(frames[0].gripper_points) if frames else 1
    episode = Episode(
        id=root.name,
        frames=tuple(frames),
        embodiment=BIMANUAL if arms == 2 else SINGLE_ARM,
        source=source,
        root=root,
    )

    for frame in episode.frames:
        for ref in frame.rgb_refs:
            if not (root / ref).is_file():
                raise FileNotFoundError(str(root / ref))
        if frame.depth_ref is not None and not (root / frame.depth_ref).is_file():
            raise FileNotFoundError(str(root / frame.depth_ref))
    return episode


def write_manifest(episode: Episode, root: str | Path) -> Path:
    """Write ``episode.jsonl`` for an in-memory episode (referenced files are
    the caller's responsibility)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = root / "episode.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for frame in episode.frames:
            record = {
                "index": frame.index,
                "rgb": list(frame.rgb_refs),
                "depth": frame.depth_ref,
                "grippers": [[x, y] for x, y in frame.gripper_points],
                "action": frame.action.tolist(),
                "instruction": frame.instruction,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return manifest


def find_episode_dirs(roots: list[str | Path]) -> list[Path]:
    """Expand input roots into a sorted list of episode directories.

    A root that itself contains ``episode.jsonl`` counts as one episode;
    otherwise its immediate subdirectories holding a manifest are used.
    """
    found = []
    for root in roots:
        root = Path(root)
        if (root / "episode.jsonl").is_file():
            found.append(root)
            continue
        if root.is_dir():
            for sub in sorted(root.iterdir()):
                if (sub / "episode.jsonl").is_file():
                    found.append(sub)
    return sorted(set(found))
