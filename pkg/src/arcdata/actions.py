"""Action discretization: quantile stats, 256-bin codec, token vocabulary, chunking.

Each action dimension is normalized by its dataset 1st/99th percentiles and
discretized into 256 uniform-width bins; values outside the percentile range
clamp to the extreme bins.  Bins map one-to-one onto a fixed vocabulary of 256
symbol strings (shipped as ``data/action_vocab.json``), ordered so adjacent
bins get adjacent symbols.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import as_float_matrix, readonly

N_BINS = 256
MID_BIN = 127  # encoding target for a degenerate (q01 == q99) dimension


@dataclass(frozen=True)
class ActionQuantileStats:
    """Per-dimension 1st/99th percentile bounds of a dataset's actions."""

    q01: np.ndarray
    q99: np.ndarray

    def __post_init__(self):
        q01 = np.asarray(self.q01, dtype=np.float64)
        q99 = np.asarray(self.q99, dtype=np.float64)
        if q01.ndim != 1 or q01.shape != q99.shape:
            raise ValueError("q01 and q99 must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(q01)) and np.all(np.isfinite(q99))):
            raise ValueError("quantile stats must be finite")
        if np.any(q01 > q99):
            raise ValueError("q01 must be <= q99 in every dimension")
        object.__setattr__(self, "q01", readonly(q01))
        object.__setattr__(self, "q99", readonly(q99))

    @property
    def dims(self) -> int:
        return self.q01.shape[0]

    def to_json_obj(self) -> dict:
        return {"dims": self.dims, "q01": self.q01.tolist(), "q99": self.q99.tolist()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ActionQuantileStats":
        stats = cls(q01=np.asarray(obj["q01"]), q99=np.asarray(obj["q99"]))
        if stats.dims != int(obj["dims"]):
            raise ValueError("stats 'dims' does not match quantile vector length")
        return stats

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ActionQuantileStats":
        return cls.from_json_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_quantiles(actions) -> ActionQuantileStats:
    """Compute per-dimension 1st/99th percentiles over a stream of D-vectors.

    Percentiles use linear interpolation between closest order statistics.
    Requires at least two samples; ragged dimensionality is an error.
    """
    data = as_float_matrix(actions, "actions")
    if data.shape[0] < 2:
        raise ValueError(f"need at least 2 action samples, got {data.shape[0]}")
    if not np.all(np.isfinite(data)):
        raise ValueError("actions contain non-finite values")
    q01, q99 = np.quantile(data, [0.01, 0.99], axis=0, method="linear")
    return ActionQuantileStats(q01=q01, q99=q99)


def _spans(stats: ActionQuantileStats) -> tuple[np.ndarray, np.ndarray]:
    span = stats.q99 - stats.q01
    return span, span == 0.0


def encode_action(action, stats: ActionQuantileStats) -> np.ndarray:
    """Discretize one D-vector into bins 0..255.

    bin = clamp(floor((a - q01) / (q99 - q01) * 256), 0, 255); values below
    q01 clamp to 0, above q99 to 255.  A degenerate dimension encodes to 127.
    """
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (stats.dims,):
        raise ValueError(f"action has shape {a.shape}, expected ({stats.dims},)")
    if np.any(np.isnan(a)):
        raise ValueError("action contains NaN")
    span, degenerate = _spans(stats)
    # clamping into [q01, q99] first implements the outlier rule and bounds the
    # ratio at 1.0, so the only out-of-range value left is floor(256) at a == q99
    clamped = np.minimum(np.maximum(a, stats.q01), stats.q99)
    scaled = np.floor((clamped - stats.q01) / np.where(degenerate, 1.0, span) * N_BINS)
    bins = np.minimum(scaled, N_BINS - 1).astype(np.int64)
    bins[degenerate] = MID_BIN
    return bins


def decode_action(bins, stats: ActionQuantileStats) -> np.ndarray:
    """Map bins back to continuous values at bin centers.

    Accepts a flat sequence whose length is a multiple of ``stats.dims``
    (chunked actions decode dimension-cyclically).  A degenerate dimension
    decodes to its constant q01 value.
    """
    b = np.asarray(bins, dtype=np.int64)
    if b.ndim != 1 or b.size == 0 or b.size % stats.dims != 0:
        raise ValueError(f"bin sequence length {b.size} is not a multiple of D={stats.dims}")
    if np.any(b < 0) or np.any(b > N_BINS - 1):
        raise ValueError("bin out of range [0, 255]")
    steps = b.size // stats.dims
    span, degenerate = _spans(stats)
    q01 = np.tile(stats.q01, steps)
    values = q01 + (b + 0.5) * np.tile(span, steps) / N_BINS
    values[np.tile(degenerate, steps)] = q01[np.tile(degenerate, steps)]
    return values


def chunk_actions(episode, t: int, stats: ActionQuantileStats, chunk_size: int) -> np.ndarray:
    """Encode actions for frames t .. t+chunk_size-1 as one flat bin sequence.

    Frames past the episode end repeat the final frame's action, so the result
    always has length chunk_size * D.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    n = len(episode.frames)
    if not 0 <= t < n:
        raise ValueError(f"timestep {t} outside episode of length {n}")
    parts = []
    for step in range(chunk_size):
        frame = episode.frames[min(t + step, n - 1)]
        parts.append(encode_action(frame.action, stats))
    return np.concatenate(parts)


@dataclass(frozen=True)
class ActionVocabulary:
    """The ordered 256-symbol action token table (index == bin)."""

    tokens: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)
    _by_length: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.tokens) != N_BINS:
            raise ValueError(f"vocabulary has {len(self.tokens)} entries, expected {N_BINS}")
        if len(set(self.tokens)) != N_BINS:
            raise ValueError("vocabulary entries must be pairwise distinct")
        object.__setattr__(self, "_index", {tok: i for i, tok in enumerate(self.tokens)})
        object.__setattr__(
            self, "_by_length", tuple(sorted(self.tokens, key=len, reverse=True))
        )

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ActionVocabulary":
        """Load the vocabulary; defaults to the table bundled with the package."""
        if path is None:
            text = resources.files("arcdata.data").joinpath("action_vocab.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls(tokens=tuple(json.loads(text)))

    def segment(self, text: str, base_offset: int = 0) -> list[str]:
        """Split a concatenation of vocabulary tokens back into tokens.

        Greedy longest-match is exact for this table: the only prefix
        collision is resolved because no token begins with the dangling
        suffix character.  Unknown content raises ValueError with the byte
        offset of the failure.
        """
        out = []
        pos = 0
        while pos < len(text):
            for tok in self._by_length:
                if text.startswith(tok, pos):
                    out.append(tok)
                    pos += len(tok)
                    break
            else:
                offset = base_offset + len(text[:pos].encode("utf-8"))
                raise ValueError(f"unknown action token at byte {offset}")
        return out


def bins_to_tokens(bins, vocab: ActionVocabulary) -> list[str]:
    out = []
    for i, b in enumerate(np.asarray(bins, dtype=np.int64)):
        if not 0 <= b < N_BINS:
            raise ValueError(f"bin {b} at position {i} outside [0, 255]")
        out.append(vocab.tokens[b])
    return out


def tokens_to_bins(tokens, vocab: ActionVocabulary) -> list[int]:
    out = []
    for i, tok in enumerate(tokens):
        try:
            out.append(vocab._index[tok])
        except KeyError:
            raise ValueError(f"unknown action token at position {i}: {tok!r}") from None
    return out


class ActionQuantizer(BaseEstimator, TransformerMixin):
    """Estimator wrapper: fit percentile stats, transform actions to bins.

    ``fit(X)`` expects an (n_samples, n_dims) array; ``transform`` returns
    int bins of the same shape and ``inverse_transform`` maps bins back to
    bin-center values.
    """

    def fit(self, X, y=None):
        self.stats_ = fit_quantiles(X)
        return self

    def transform(self, X) -> np.ndarray:
        data = as_float_matrix(X, "X")
        return np.stack([encode_action(row, self.stats_) for row in data])

    def inverse_transform(self, B) -> np.ndarray:
        bins = np.asarray(B, dtype=np.int64)
        if bins.ndim != 2:
            raise ValueError("expected a 2-D array of bins")
        return np.stack([decode_action(row, self.stats_) for row in bins])
