"""Depth token codec: 128-entry patch codebook, 100-token strings, and the
sentinel-delimited text form.

A depth grid is min-max normalized to [0, 1], bilinearly resized to 320x320
(corner-aligned sampling), and split row-major into a 10x10 grid of 32x32
patches.  Each patch is assigned its nearest codebook centroid, giving exactly
100 indices in [1, 128].  The text form is
``<DEPTH_START><DEPTH_z1>...<DEPTH_z100><DEPTH_END>`` with no separators.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .episodes import DepthGrid
from .validation import readonly

PATCH_EDGE = 32
GRID_EDGE = 10
CANVAS_EDGE = PATCH_EDGE * GRID_EDGE  # 320
N_CODES = 128
N_TOKENS = GRID_EDGE * GRID_EDGE  # 100

DEPTH_START = "<DEPTH_START>"
DEPTH_END = "<DEPTH_END>"

CODEBOOK_MAGIC = b"ARCB"
_CODEBOOK_HEADER = struct.Struct("<4sIIIQ")

_KMEANS_ITERATIONS = 20


@dataclass(frozen=True)
class DepthVocabulary:
    """Sentinels plus the code tokens ``<DEPTH_1>`` .. ``<DEPTH_128>``."""

    start: str = DEPTH_START
    end: str = DEPTH_END
    codes: tuple[str, ...] = tuple(f"<DEPTH_{k}>" for k in range(1, N_CODES + 1))


class DepthStringError(ValueError):
    """Raised by the depth-string parser; carries the failing byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class DepthCodebook:
    """Patch centroids implementing the depth token codec.

    Centroids are stored as float32 (the on-disk precision) so a codebook is
    bit-identical before and after a save/load round trip.
    """

    patch_edge: int
    grid_edge: int
    centroids: np.ndarray  # (k, patch_edge**2) float32, read-only
    seed: int

    def __post_init__(self):
        arr = np.asarray(self.centroids, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[1] != self.patch_edge**2:
            raise ValueError(
                f"centroids must be (k, {self.patch_edge**2}), got {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise ValueError("codebook needs at least one centroid")
        if not np.all(np.isfinite(arr)):
            raise ValueError("codebook centroids must be finite")
        object.__setattr__(self, "centroids", readonly(arr))

    @property
    def n_codes(self) -> int:
        return self.centroids.shape[0]

    def save(self, path: str | Path) -> None:
        header = _CODEBOOK_HEADER.pack(
            CODEBOOK_MAGIC, self.patch_edge, self.grid_edge, self.n_codes, self.seed
        )
        payload = np.ascontiguousarray(self.centroids, dtype="<f4").tobytes()
        Path(path).write_bytes(header + payload)

    @classmethod
    def load(cls, path: str | Path) -> "DepthCodebook":
        data = Path(path).read_bytes()
        if len(data) < _CODEBOOK_HEADER.size:
            raise ValueError(f"{path}: truncated codebook header")
        magic, patch_edge, grid_edge, k, seed = _CODEBOOK_HEADER.unpack_from(data)
        if magic != CODEBOOK_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {CODEBOOK_MAGIC!r}")
        payload = data[_CODEBOOK_HEADER.size:]
        expected = k * patch_edge**2 * 4
        if len(payload) != expected:
            raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
        centroids = np.frombuffer(payload, dtype="<f4").reshape(k, patch_edge**2)
        return cls(patch_edge=patch_edge, grid_edge=grid_edge, centroids=centroids, seed=seed)


def normalize_grid(values: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1] in float64; a constant grid maps to zeros."""
    arr = np.asarray(values, dtype=np.float64)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize (output corners sample input corners)."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape
    ys = np.linspace(0.0, h - 1.0, out_h) if h > 1 else np.zeros(out_h)
    xs = np.linspace(0.0, w - 1.0, out_w) if w > 1 else np.zeros(out_w)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = arr[np.ix_(y0, x0)] * (1.0 - fx) + arr[np.ix_(y0, x1)] * fx
    bottom = arr[np.ix_(y1, x0)] * (1.0 - fx) + arr[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bottom * fy


def grid_patches(grid: DepthGrid) -> np.ndarray:
    """Normalize, resize to the canonical canvas, and flatten the row-major
    patch grid into a (100, 1024) float64 matrix."""
    canvas = resize_bilinear(normalize_grid(grid.values), CANVAS_EDGE, CANVAS_EDGE)
    tiles = canvas.reshape(GRID_EDGE, PATCH_EDGE, GRID_EDGE, PATCH_EDGE)
    return tiles.transpose(0, 2, 1, 3).reshape(N_TOKENS, PATCH_EDGE**2)


def _nearest(
    points: np.ndarray, centroids: np.ndarray, points_sq: np.ndarray | None = None
) -> np.ndarray:
    # squared Euclidean via expansion; exact ties resolve to the lowest index
    # because argmin returns the first minimum
    if points_sq is None:
        points_sq = (points * points).sum(axis=1)
    d2 = (
        points_sq[:, None]
        - 2.0 * (points @ centroids.T)
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    return d2.argmin(axis=1)


def _kmeans_pp_init(
    points: np.ndarray, k: int, rng: np.random.Generator, points_sq: np.ndarray
) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    c = points[rng.integers(n)]
    centroids[0] = c
    # expansion form can go slightly negative under cancellation; clamp so the
    # cumulative-sum sampling below stays monotone
    d2 = np.maximum(points_sq - 2.0 * (points @ c) + c @ c, 0.0)
    for j in range(1, k):
        cum = np.cumsum(d2)
        pick = np.searchsorted(cum, rng.random() * cum[-1], side="right")
        c = points[min(pick, n - 1)]
        centroids[j] = c
        d2 = np.minimum(d2, np.maximum(points_sq - 2.0 * (points @ c) + c @ c, 0.0))
    return centroids


def _lloyd_update(points: np.ndarray, assign: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    order = np.argsort(assign, kind="stable")
    sorted_points = points[order]
    sorted_assign = assign[order]
    boundaries = np.searchsorted(sorted_assign, np.arange(k + 1))
    updated = centroids.copy()
    for j in range(k):
        lo, hi = boundaries[j], boundaries[j + 1]
        if hi > lo:  # empty clusters keep their previous centroid
            updated[j] = sorted_points[lo:hi].sum(axis=0) / (hi - lo)
    return updated


def train_codebook(grids, seed: int, n_codes: int = N_CODES) -> DepthCodebook:
    """Fit a codebook by k-means over all patches of all grids.

    k-means++ initialization from ``seed``, then Lloyd iterations (at most 20,
    stopping early once assignments are stable).  Deterministic given
    (grids, seed): identical runs produce bit-identical centroids.
    """
    grids = list(grids)
    if not grids:
        raise ValueError("no depth grids to train on")
    points = np.concatenate([grid_patches(g) for g in grids])
    if not np.all(np.isfinite(points)):
        raise ValueError("depth grids contain non-finite values")
    distinct = len({row.tobytes() for row in points})
    if distinct < n_codes:
        raise ValueError(
            f"only {distinct} distinct patches available, need at least {n_codes}"
        )

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    points_sq = (points * points).sum(axis=1)
    centroids = _kmeans_pp_init(points, n_codes, rng, points_sq)
    assign = None
    for _ in range(_KMEANS_ITERATIONS):
        new_assign = _nearest(points, centroids, points_sq)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        centroids = _lloyd_update(points, assign, centroids)
    return DepthCodebook(
        patch_edge=PATCH_EDGE,
        grid_edge=GRID_EDGE,
        centroids=centroids.astype(np.float32),
        seed=int(seed),
    )


def encode_depth(grid: DepthGrid, book: DepthCodebook) -> tuple[int, ...]:
    """Tokenize a depth grid: 100 nearest-centroid indices in [1, n_codes]."""
    patches = grid_patches(grid)
    assign = _nearest(patches, book.centroids.astype(np.float64))
    return tuple(int(a) + 1 for a in assign)


def decode_depth(tokens, book: DepthCodebook) -> DepthGrid:
    """Rebuild the canonical 320x320 grid by pasting centroid patches."""
    tokens = tuple(int(t) for t in tokens)
    if len(tokens) != book.grid_edge**2:
        raise ValueError(f"expected {book.grid_edge**2} tokens, found {len(tokens)}")
    edge = book.patch_edge
    canvas = np.empty((book.grid_edge * edge, book.grid_edge * edge), dtype=np.float64)
    for pos, tok in enumerate(tokens):
        if not 1 <= tok <= book.n_codes:
            raise ValueError(f"token index {tok} outside [1, {book.n_codes}]")
        row, col = divmod(pos, book.grid_edge)
        patch = book.centroids[tok - 1].astype(np.float64).reshape(edge, edge)
        canvas[row * edge:(row + 1) * edge, col * edge:(col + 1) * edge] = patch
    canvas = np.clip(canvas, 0.0, 1.0)
    return DepthGrid(width=canvas.shape[1], height=canvas.shape[0], values=canvas.astype(np.float32))


def render_depth_string(tokens) -> str:
    tokens = tuple(int(t) for t in tokens)
    if len(tokens) != N_TOKENS:
        raise ValueError(f"expected {N_TOKENS} tokens, found {len(tokens)}")
    for t in tokens:
        if not 1 <= t <= N_CODES:
            raise ValueError(f"token index {t} outside [1, {N_CODES}]")
    return DEPTH_START + "".join(f"<DEPTH_{t}>" for t in tokens) + DEPTH_END


def scan_depth_string(data: bytes, pos: int = 0) -> tuple[tuple[int, ...], int]:
    """Scan one depth string starting at byte ``pos``; return (tokens, end).

    Used both by :func:`parse_depth_string` (which requires the string to end
    at the final byte) and by the chain parser (where more sections follow).
    """
    start = DEPTH_START.encode()
    end_word = b"END>"
    if not data.startswith(start, pos):
        raise DepthStringError(f"missing {DEPTH_START} sentinel at byte {pos}", offset=pos)
    pos += len(start)
    tokens = []
    while True:
        if not data.startswith(b"<DEPTH_", pos):
            raise DepthStringError(
                f"unknown depth token at byte {pos} (missing {DEPTH_END} sentinel?)",
                offset=pos,
            )
        cursor = pos + len(b"<DEPTH_")
        if data.startswith(end_word, cursor):
            pos = cursor + len(end_word)
            break
        digits = cursor
        while digits < len(data) and data[digits:digits + 1].isdigit():
            digits += 1
        if digits == cursor or not data.startswith(b">", digits):
            raise DepthStringError(f"unknown depth token at byte {pos}", offset=pos)
        text = data[cursor:digits].decode()
        if text[0] == "0":  # no zero padding allowed
            raise DepthStringError(f"unknown depth token at byte {pos}", offset=pos)
        value = int(text)
        if not 1 <= value <= N_CODES:
            raise DepthStringError(
                f"depth token index {value} at byte {pos} outside [1, {N_CODES}]",
                offset=pos,
            )
        tokens.append(value)
        pos = digits + 1
    if len(tokens) != N_TOKENS:
        raise DepthStringError(
            f"expected {N_TOKENS} depth tokens, found {len(tokens)}", offset=pos
        )
    return tuple(tokens), pos


def parse_depth_string(text: str) -> tuple[int, ...]:
    """Exact inverse of :func:`render_depth_string`; rejects anything else."""
    data = text.encode("utf-8")
    tokens, pos = scan_depth_string(data, 0)
    if pos != len(data):
        raise DepthStringError(f"trailing bytes after {DEPTH_END} at byte {pos}", offset=pos)
    return tokens


class DepthTokenizer(BaseEstimator, TransformerMixin):
    """Estimator wrapper around the depth codec.

    ``fit`` trains the codebook on a list of :class:`DepthGrid`, ``transform``
    maps grids to (n, 100) token index arrays, and ``inverse_transform``
    rebuilds approximate grids.
    """

    def __init__(self, n_codes: int = N_CODES, random_state: int = 0):
        self.n_codes = n_codes
        self.random_state = random_state

    def fit(self, X, y=None):
        self.codebook_ = train_codebook(X, seed=self.random_state, n_codes=self.n_codes)
        return self

    def transform(self, X) -> np.ndarray:
        return np.asarray([encode_depth(g, self.codebook_) for g in X], dtype=np.int64)

    def inverse_transform(self, T) -> list[DepthGrid]:
        return [decode_depth(row, self.codebook_) for row in np.asarray(T, dtype=np.int64)]
