"""Episode-to-sample conversion, JSONL sharding, and dataset reports.

Episodes are converted independently (sorted by id, frames in order) so
output bytes are deterministic.  Every frame of every episode yields one
sample per enabled kind; the trace/depth supervision always comes from the
primary side view (``rgb_refs[0]``), extra views ride along as additional
image references.
"""

from __future__ import annotations

import logging
from collections import Counter
from pathlib import Path

from .actions import ActionQuantileStats, ActionVocabulary, chunk_actions, fit_quantiles
from .chains import (
    KIND_ACTION_REASONING,
    KIND_AUX_DEPTH,
    KIND_AUX_TRACE,
    KIND_TRAJ_CONDITIONED,
    SAMPLE_KINDS,
    ReasoningSample,
    make_sample,
    parse_target,
)
from .depth import DepthCodebook, encode_depth
from .episodes import Episode, load_depth_grid, load_episode
from .overlay import RgbImage, overlay_bimanual, overlay_trace
from .traces import episode_traces

log = logging.getLogger("arcdata")

SHARD_SIZE = 10_000


class ShardWriter:
    """Append samples for one stream to zero-padded 10k-line JSONL shards."""

    def __init__(self, out_dir: Path, stream: str, shard_size: int = SHARD_SIZE):
        self.out_dir = Path(out_dir)
        self.stream = stream
        self.shard_size = shard_size
        self.count = 0
        self.paths: list[Path] = []
        self._handle = None

    def write(self, sample: ReasoningSample) -> None:
        if self.count % self.shard_size == 0:
            if self._handle is not None:
                self._handle.close()
            shard = self.out_dir / f"{self.stream}-{len(self.paths):05d}.jsonl"
            self._handle = open(shard, "w", encoding="utf-8")
            self.paths.append(shard)
        self._handle.write(sample.to_json_line() + "\n")
        self.count += 1

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def convert_frame(
    episode: Episode,
    t: int,
    stats: ActionQuantileStats,
    book: DepthCodebook,
    vocab: ActionVocabulary,
    kinds,
    chunk_size: int,
    out_dir: Path,
) -> list[ReasoningSample]:
    """Build the enabled samples for one frame, writing the overlay PNG when
    traj_conditioned is requested."""
    frame = episode.frames[t]
    last = len(episode.frames) - 1
    image_refs = tuple(f"{episode.id}/{ref}" for ref in frame.rgb_refs)
    instruction = episode.instruction

    needs_depth = KIND_AUX_DEPTH in kinds or KIND_ACTION_REASONING in kinds
    depth_tokens = None
    if needs_depth:
        if frame.depth_ref is None:
            raise ValueError(f"{episode.id} frame {t}: no depth grid reference")
        depth_tokens = encode_depth(load_depth_grid(episode.resolve(frame.depth_ref)), book)

    traces = episode_traces(episode, t, last)
    bins = chunk_actions(episode, t, stats, chunk_size)

    samples = []
    if KIND_ACTION_REASONING in kinds:
        samples.append(
            make_sample(
                KIND_ACTION_REASONING,
                instruction,
                image_refs,
                vocab,
                depth=depth_tokens,
                traces=traces,
                actions=bins,
            )
        )
    if KIND_AUX_DEPTH in kinds:
        samples.append(
            make_sample(KIND_AUX_DEPTH, instruction, image_refs, depth=depth_tokens)
        )
    if KIND_AUX_TRACE in kinds:
        samples.append(make_sample(KIND_AUX_TRACE, instruction, image_refs, traces=traces))
    if KIND_TRAJ_CONDITIONED in kinds:
        overlay_rel = f"overlays/{episode.id}/frame_{t:05d}.png"
        overlay_path = out_dir / overlay_rel
        overlay_path.parent.mkdir(parents=True, exist_ok=True)
        base = RgbImage.load(episode.resolve(frame.rgb_refs[0]))
        if len(traces) == 2:
            image = overlay_bimanual(base, traces[0], traces[1])
        else:
            image = overlay_trace(base, traces[0])
        image.save(overlay_path)
        samples.append(
            make_sample(
                KIND_TRAJ_CONDITIONED,
                instruction,
                image_refs,
                vocab,
                actions=bins,
                overlay_ref=overlay_rel,
            )
        )
    return samples


def convert_corpus(
    episode_dirs,
    out_dir: str | Path,
    stats: ActionQuantileStats,
    book: DepthCodebook,
    vocab: ActionVocabulary,
    kinds=SAMPLE_KINDS,
    chunk_size: int = 1,
    strict: bool = False,
) -> dict[str, int]:
    """Convert episode directories into per-kind JSONL streams.

    Bad frames abort the run under ``strict``, otherwise they are logged and
    skipped (conservation then holds over valid frames).  After writing, every
    target is re-parsed with its kind's grammar; any failure raises.
    """
    kinds = tuple(kinds)
    for kind in kinds:
        if kind not in SAMPLE_KINDS:
            raise ValueError(f"unknown sample kind {kind!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writers = {kind: ShardWriter(out_dir, kind) for kind in kinds}

    try:
        for ep_dir in sorted(Path(d) for d in episode_dirs):
            try:
                episode = load_episode(ep_dir)
            except Exception:
                if strict:
                    raise
                log.warning("skipping unloadable episode %s", ep_dir, exc_info=True)
                continue
            for t in range(len(episode.frames)):
                try:
                    samples = convert_frame(
                        episode, t, stats, book, vocab, kinds, chunk_size, out_dir
                    )
                except Exception:
                    if strict:
                        raise
                    log.warning("skipping %s frame %d", episode.id, t, exc_info=True)
                    continue
                for sample in samples:
                    writers[sample.kind].write(sample)
    finally:
        for writer in writers.values():
            writer.close()

    counts = {kind: writers[kind].count for kind in kinds}
    verified = verify_outputs(out_dir, kinds, vocab)
    for kind in kinds:
        if verified[kind] != counts[kind]:
            raise RuntimeError(
                f"verification mismatch for {kind}: wrote {counts[kind]}, "
                f"re-parsed {verified[kind]}"
            )
    return counts


def verify_outputs(out_dir: str | Path, kinds, vocab: ActionVocabulary) -> dict[str, int]:
    """Re-parse every emitted target under its kind-specific grammar."""
    out_dir = Path(out_dir)
    verified = {}
    for kind in kinds:
        n = 0
        for shard in sorted(out_dir.glob(f"{kind}-*.jsonl")):
            with open(shard, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    sample = ReasoningSample.from_json_line(line)
                    if sample.kind != kind:
                        raise RuntimeError(f"{shard}:{lineno}: stream/kind mismatch")
                    parse_target(kind, sample.target, vocab)
                    n += 1
        verified[kind] = n
    return verified


def fit_corpus_stats(episode_dirs) -> ActionQuantileStats:
    """Fit action quantile stats over all frames of all episodes."""
    actions = []
    for ep_dir in sorted(Path(d) for d in episode_dirs):
        episode = load_episode(ep_dir)
        actions.extend(frame.action for frame in episode.frames)
    return fit_quantiles(actions)


def load_corpus_grids(episode_dirs):
    """All depth grids of a corpus, in deterministic order."""
    grids = []
    for ep_dir in sorted(Path(d) for d in episode_dirs):
        episode = load_episode(ep_dir)
        for frame in episode.frames:
            if frame.depth_ref is not None:
                grids.append(load_depth_grid(episode.resolve(frame.depth_ref)))
    return grids


def dataset_report(episode_dirs) -> dict:
    """Episode/frame counts, mean episode length, and the verb histogram.

    The verb is the first whitespace-delimited token of the instruction,
    lowercased; empty instructions bucket under ``<none>``.
    """
    verbs = Counter()
    episodes = 0
    frames = 0
    for ep_dir in sorted(Path(d) for d in episode_dirs):
        episode = load_episode(ep_dir)
        episodes += 1
        frames += len(episode.frames)
        words = episode.instruction.split()
        verbs[words[0].lower() if words else "<none>"] += 1
    return {
        "episodes": episodes,
        "frames": frames,
        "mean_episode_length": frames / episodes if episodes else 0.0,
        "verbs": dict(sorted(verbs.items(), key=lambda kv: (-kv[1], kv[0]))),
    }


def format_report(report: dict) -> str:
    lines = [
        f"episodes: {report['episodes']}",
        f"frames: {report['frames']}",
        f"mean_episode_length: {report['mean_episode_length']:.2f}",
        "verbs:",
    ]
    lines += [f"  {verb} {count}" for verb, count in report["verbs"].items()]
    return "\n".join(lines)
