"""Weighted stream sampling for assembling training corpora.

Draws are made with numpy's PCG64 generator (a named, portable algorithm) so
identical (config, n) inputs give identical sequences everywhere.  Workers
needing independent streams derive their seed as ``seed XOR worker_index``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

SUM_TOLERANCE = 1e-9


class MixtureConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MixtureConfig:
    """Named streams with sampling weights that must sum to 1."""

    streams: tuple[tuple[str, float], ...]
    seed: int

    def __post_init__(self):
        if not self.streams:
            raise MixtureConfigError("mixture has no streams")
        names = [name for name, _ in self.streams]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise MixtureConfigError(f"duplicate stream names: {', '.join(dupes)}")
        for name, weight in self.streams:
            if not (0.0 < weight <= 1.0):
                raise MixtureConfigError(
                    f"stream {name!r} has weight {weight}, must be in (0, 1]"
                )
        total = math.fsum(w for _, w in self.streams)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise MixtureConfigError(
                f"stream weights sum to {total!r}, off by {total - 1.0:+.3g}"
            )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.streams)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(weight for _, weight in self.streams)


def validate_config(path: str | Path) -> MixtureConfig:
    """Load and invariant-check a mixture config file.

    Format: {"seed": int, "streams": [{"name": str, "weight": float}, ...]}.
    """
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        streams = tuple((str(s["name"]), float(s["weight"])) for s in obj["streams"])
        seed = int(obj["seed"])
    except (KeyError, TypeError) as exc:
        raise MixtureConfigError(f"{path}: malformed mixture config ({exc})") from None
    return MixtureConfig(streams=streams, seed=seed)


def pretrain_config() -> MixtureConfig:
    """The bundled pre-training mixture (nine streams)."""
    with resources.as_file(
        resources.files("arcdata.data").joinpath("mixtures/pretrain.json")
    ) as path:
        return validate_config(path)


class MixtureSampler:
    """Stateful seeded sampler; one instance per worker (not thread-safe)."""

    def __init__(self, config: MixtureConfig, worker: int = 0):
        self.config = config
        self._names = config.names
        self._cum = np.cumsum(np.asarray(config.weights, dtype=np.float64))
        self._rng = np.random.Generator(np.random.PCG64(config.seed ^ worker))

    def draw(self, n: int) -> list[str]:
        if n < 0:
            raise ValueError("draw count must be non-negative")
        u = self._rng.random(n)
        idx = np.searchsorted(self._cum, u, side="right")
        idx = np.minimum(idx, len(self._names) - 1)  # guard the top float edge
        return [self._names[i] for i in idx]


def sample_stream(config: MixtureConfig, n: int) -> list[str]:
    """Draw ``n`` stream names; deterministic given (config, n)."""
    return MixtureSampler(config).draw(n)
