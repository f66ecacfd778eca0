"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the
per-criterion PASS lines immediately).
"""

import json
import math
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from arcdata.actions import (
    ActionQuantileStats,
    ActionVocabulary,
    bins_to_tokens,
    decode_action,
    encode_action,
    tokens_to_bins,
)
from arcdata.chains import (
    ChainParseError,
    SAMPLE_KINDS,
    parse_chain,
    parse_target,
    render_chain,
    render_depth_string,
)
from arcdata.cli import main
from arcdata.depth import encode_depth, parse_depth_string, train_codebook
from arcdata.fixtures import depth_corpus
from arcdata.mixture import pretrain_config, sample_stream
from arcdata.overlay import RgbImage, overlay_bimanual, overlay_trace
from arcdata.traces import ARM_LEFT, ARM_RIGHT, VisualTrace, subsample_indices

from conftest import random_chain
from test_overlay import oracle_line_pixels
from test_traces import oracle_indices

GOLDEN = Path(__file__).parent / "golden"


def test_criterion_1_action_round_trip():
    start = time.perf_counter()
    rng = np.random.default_rng(1001)
    all_bins = np.arange(256)
    for _ in range(50):
        lo = rng.uniform(-10.0, 10.0)
        hi = lo + rng.uniform(0.1, 20.0)  # non-degenerate by construction
        stats = ActionQuantileStats(q01=np.full(256, lo), q99=np.full(256, hi))
        decoded = decode_action(all_bins, stats)
        assert np.array_equal(encode_action(decoded, stats), all_bins)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"round-trip sweep took {elapsed:.2f}s"
    print("ACCEPTANCE 1 action round-trip: PASS")


def test_criterion_2_vocabulary_fidelity():
    vocab = ActionVocabulary.load()
    assert vocab.tokens[0] == "â½Ĺ"
    assert vocab.tokens[128] == "Ýĵ"
    assert vocab.tokens[255] == "ðŁİĳ"
    bins = list(range(256))
    assert tokens_to_bins(bins_to_tokens(bins, vocab), vocab) == bins
    assert bins_to_tokens(tokens_to_bins(list(vocab.tokens), vocab), vocab) == list(vocab.tokens)
    print("ACCEPTANCE 2 vocabulary fidelity: PASS")


def test_criterion_3_trace_oracle_equivalence():
    start = time.perf_counter()
    cases = 0
    for t in range(0, 21):
        for e in range(t, 21):
            assert subsample_indices(t, e) == oracle_indices(t, e), (t, e)
            cases += 1
    assert cases == 231
    assert subsample_indices(7, 7) == [7]  # t == e -> one point
    assert subsample_indices(0, 2) == [0, 1, 2]  # e - t < 4 -> all points
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"exhaustive sweep took {elapsed:.2f}s"
    print("ACCEPTANCE 3 trace oracle equivalence: PASS")


def test_criterion_4_depth_codec_contracts():
    corpus = depth_corpus(200, seed=42)

    books = {k: train_codebook(corpus, seed=7, n_codes=k) for k in (128, 16, 1)}
    retrained = train_codebook(corpus, seed=7, n_codes=128)
    assert retrained.centroids.tobytes() == books[128].centroids.tobytes()

    for grid in corpus:
        tokens = encode_depth(grid, books[128])
        assert len(tokens) == 100
        assert all(1 <= t <= 128 for t in tokens)

    rng = np.random.default_rng(4242)
    for _ in range(1000):
        tokens = tuple(int(t) for t in rng.integers(1, 129, size=100))
        assert parse_depth_string(render_depth_string(tokens)) == tokens

    from arcdata.depth import decode_depth, normalize_grid, resize_bilinear

    def mean_mse(book):
        total = 0.0
        for grid in corpus:
            target = resize_bilinear(normalize_grid(grid.values), 320, 320)
            approx = decode_depth(encode_depth(grid, book), book).values.astype(np.float64)
            total += float(((target - approx) ** 2).mean())
        return total / len(corpus)

    mse = {k: mean_mse(book) for k, book in books.items()}
    assert mse[128] <= mse[16] <= mse[1], mse
    print("ACCEPTANCE 4 depth codec contracts: PASS")


def test_criterion_5_chain_grammar():
    vocab = ActionVocabulary.load()
    rng = np.random.default_rng(501)
    for i in range(1000):
        bimanual = bool(i % 2)
        chunk = 1 if i % 4 < 2 else 8
        dims = 14 if bimanual else 7
        chain = random_chain(rng, bimanual=bimanual, n_actions=chunk * dims)
        assert parse_chain(render_chain(chain, vocab), vocab) == chain

    depth = render_depth_string([1] * 100)
    malformed = [
        (";TRACE=[[0,0]]" + depth, "order"),
        (depth + ";ACTION=" + vocab.tokens[0], "order"),
        ("<DEPTH_START>" + "<DEPTH_1>" * 99 + "<DEPTH_END>;TRACE=[[0,0]];ACTION=" + vocab.tokens[0], "depth"),
        (depth + ";TRACE=[" + ",".join(["[1,1]"] * 6) + "];ACTION=" + vocab.tokens[0], "trace"),
        (depth + ";TRACE_R=[[0,0]];ACTION=" + vocab.tokens[0], "trace"),
        (depth + ";TRACE=[[0,0]];ACTION=garbage", "action"),
        (depth + ";TRACE=[[0,0]];ACTION=", "action"),
    ]
    for text, stage in malformed:
        with pytest.raises(ChainParseError) as err:
            parse_chain(text, vocab)
        assert err.value.stage == stage, text[:40]
    print("ACCEPTANCE 5 chain grammar: PASS")


def test_criterion_6_mixture_statistics():
    config = pretrain_config()
    assert math.fsum(config.weights) == 1.0
    assert sum(config.weights) == 1.0
    counts = Counter(sample_stream(config, 100_000))
    for name, weight in config.streams:
        freq = counts[name] / 100_000
        assert abs(freq - weight) <= 0.005, (name, freq, weight)
    print("ACCEPTANCE 6 mixture statistics: PASS")


def test_criterion_7_overlay_determinism(tmp_path):
    point = overlay_trace(RgbImage.blank(64, 64), VisualTrace(points=((0, 0),)))
    band = overlay_trace(RgbImage.blank(256, 256), VisualTrace(points=((0, 128), (255, 128))))
    both = overlay_bimanual(
        RgbImage.blank(64, 64),
        VisualTrace(points=((10, 10), (120, 40)), arm=ARM_LEFT),
        VisualTrace(points=((200, 180), (240, 230)), arm=ARM_RIGHT),
    )
    for image, name in ((point, "overlay_point.png"), (band, "overlay_hband.png"),
                        (both, "overlay_bimanual.png")):
        out = tmp_path / name
        image.save(out)
        assert out.read_bytes() == (GOLDEN / name).read_bytes(), name

    from arcdata.overlay import line_pixels

    rng = np.random.default_rng(777)
    for _ in range(200):
        p0 = tuple(int(v) for v in rng.integers(0, 256, 2))
        p1 = tuple(int(v) for v in rng.integers(0, 256, 2))
        assert set(line_pixels(p0, p1)) == set(oracle_line_pixels(p0, p1))
    print("ACCEPTANCE 7 overlay determinism: PASS")


def test_criterion_8_end_to_end(tmp_path):
    start = time.perf_counter()
    corpus = tmp_path / "mini10"
    assert main(["gen-fixture", "--out", str(corpus), "--episodes", "10",
                 "--frames", "30", "--seed", "0"]) == 0
    assert main(["fit-stats", str(corpus), "--out", str(tmp_path / "stats.json")]) == 0
    assert main(["train-codebook", str(corpus), "--out", str(tmp_path / "codebook.bin"),
                 "--seed", "7"]) == 0
    out = tmp_path / "converted"
    assert main(["convert", str(corpus), "--out", str(out),
                 "--stats", str(tmp_path / "stats.json"),
                 "--codebook", str(tmp_path / "codebook.bin")]) == 0
    elapsed = time.perf_counter() - start

    vocab = ActionVocabulary.load()
    for kind in SAMPLE_KINDS:
        total = 0
        for shard in sorted(out.glob(f"{kind}-*.jsonl")):
            for line in shard.read_text(encoding="utf-8").splitlines():
                sample = json.loads(line)
                parse_target(kind, sample["target"], vocab)  # 100% re-parse
                total += 1
        assert total == 300, (kind, total)
    assert len(list((out / "overlays").rglob("*.png"))) == 300
    assert elapsed < 60.0, f"pipeline took {elapsed:.1f}s"
    print(f"ACCEPTANCE 8 end-to-end ({elapsed:.1f}s): PASS")
