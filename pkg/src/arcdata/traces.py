"""Visual trace construction from per-frame gripper tracks.

A trace for query frame t is the gripper point at t, the point at the episode
end e, and up to three intermediate points spaced uniformly between them (all
interior points when fewer than three exist; a single point when t == e).
Coordinates arrive in [0, 100] and are rescaled to the [0, 255] integer grid.
Rounding is half-up throughout.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass

from .episodes import BIMANUAL, Episode

ARM_SINGLE = "single"
ARM_LEFT = "left"
ARM_RIGHT = "right"
_ARMS = (ARM_SINGLE, ARM_LEFT, ARM_RIGHT)

MAX_POINTS = 5
MAX_INTERMEDIATE = 3


@dataclass(frozen=True)
class VisualTrace:
    """A 1-5 point polyline of end-effector waypoints on the [0, 255] grid."""

    points: tuple[tuple[int, int], ...]
    arm: str = ARM_SINGLE

    def __post_init__(self):
        if not 1 <= len(self.points) <= MAX_POINTS:
            raise ValueError(f"trace must have 1-{MAX_POINTS} points, got {len(self.points)}")
        normalized = []
        for u, v in self.points:
            try:
                u, v = operator.index(u), operator.index(v)
            except TypeError:
                raise ValueError(f"trace points must be integers, got ({u!r}, {v!r})") from None
            if not (0 <= u <= 255 and 0 <= v <= 255):
                raise ValueError(f"trace point ({u}, {v}) outside [0, 255]")
            normalized.append((u, v))
        object.__setattr__(self, "points", tuple(normalized))
        if self.arm not in _ARMS:
            raise ValueError(f"unknown arm tag {self.arm!r}")


@dataclass(frozen=True)
class GripperTrack:
    """One gripper point per frame for a single arm, coordinates in [0, 100]."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("gripper track is empty")
        for i, (x, y) in enumerate(self.points):
            if not (0.0 <= x <= 100.0 and 0.0 <= y <= 100.0):
                raise ValueError(f"track point {i} ({x}, {y}) outside [0, 100]")

    def __len__(self) -> int:
        return len(self.points)


def _round_half_up_ratio(num: int, den: int) -> int:
    # floor(num/den + 1/2) in exact integer arithmetic, for num, den >= 0
    return (2 * num + den) // (2 * den)


def rescale_point(point: tuple[float, float]) -> tuple[int, int]:
    """Map an (x, y) point from [0, 100] to the [0, 255] integer grid,
    rounding half-up."""
    x, y = point
    if not (0.0 <= x <= 100.0 and 0.0 <= y <= 100.0):
        raise ValueError(f"point ({x}, {y}) outside [0, 100]")
    u = math.floor(x * 255.0 / 100.0 + 0.5)
    v = math.floor(y * 255.0 / 100.0 + 0.5)
    return u, v


def subsample_indices(t: int, e: int) -> list[int]:
    """Frame indices for the trace between query frame t and terminal frame e.

    Returns [t] when t == e; otherwise t and e plus min(3, e-t-1) uniformly
    spaced intermediates (half-up rounding), strictly increasing, length in
    [1, 5].
    """
    if t < 0 or e < t:
        raise ValueError(f"need 0 <= t <= e, got t={t}, e={e}")
    if t == e:
        return [t]
    gap = e - t
    m = min(MAX_INTERMEDIATE, gap - 1)
    indices = [t]
    for k in range(1, m + 1):
        idx = t + _round_half_up_ratio(k * gap, m + 1)
        if idx != indices[-1]:  # rounding collisions collapse (shrinking L)
            indices.append(idx)
    if indices[-1] != e:
        indices.append(e)
    return indices


def build_trace(track: GripperTrack, t: int, e: int, arm: str = ARM_SINGLE) -> VisualTrace:
    """Build the trace for query frame t with terminal frame e."""
    if e >= len(track):
        raise ValueError(f"track of length {len(track)} does not cover frame {e}")
    points = tuple(rescale_point(track.points[i]) for i in subsample_indices(t, e))
    return VisualTrace(points=points, arm=arm)


def build_bimanual_traces(
    left: GripperTrack, right: GripperTrack, t: int, e: int
) -> tuple[VisualTrace, VisualTrace]:
    """Build independent left/right traces over the same frame range."""
    if left is None or right is None:
        raise ValueError("embodiment mismatch: bimanual traces need two gripper tracks")
    return (
        build_trace(left, t, e, arm=ARM_LEFT),
        build_trace(right, t, e, arm=ARM_RIGHT),
    )


def episode_tracks(episode: Episode) -> tuple[GripperTrack, ...]:
    """Extract one GripperTrack per arm from an episode's frames."""
    arms = len(episode.frames[0].gripper_points)
    return tuple(
        GripperTrack(points=tuple(f.gripper_points[a] for f in episode.frames))
        for a in range(arms)
    )


def episode_traces(episode: Episode, t: int, e: int | None = None) -> tuple[VisualTrace, ...]:
    """Build the trace(s) for one frame, routed by embodiment.

    Single-arm episodes yield one trace; bimanual episodes yield (left, right).
    """
    if e is None:
        e = len(episode.frames) - 1
    tracks = episode_tracks(episode)
    if episode.embodiment == BIMANUAL:
        if len(tracks) != 2:
            raise ValueError(f"episode {episode.id}: embodiment mismatch")
        return build_bimanual_traces(tracks[0], tracks[1], t, e)
    if len(tracks) != 1:
        raise ValueError(f"episode {episode.id}: embodiment mismatch")
    return (build_trace(tracks[0], t, e, arm=ARM_SINGLE),)
