import numpy as np
import pytest

from arcdata.actions import ActionVocabulary
from arcdata.depth import train_codebook
from arcdata.fixtures import depth_corpus, generate_corpus


@pytest.fixture(scope="session")
def vocab():
    return ActionVocabulary.load()


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """Small single-arm corpus: 3 episodes x 10 frames, D = 7."""
    root = tmp_path_factory.mktemp("corpus") / "mini"
    dirs = generate_corpus(root, episodes=3, frames=10, seed=5)
    return root, dirs


@pytest.fixture(scope="session")
def bimanual_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus") / "bimanual"
    dirs = generate_corpus(root, episodes=2, frames=8, seed=9, bimanual=True)
    return root, dirs


@pytest.fixture(scope="session")
def small_codebook():
    """A full 128-code codebook trained on a small synthetic grid corpus."""
    return train_codebook(depth_corpus(30, seed=11), seed=3)


def random_trace_points(rng: np.random.Generator, n: int):
    return tuple((int(u), int(v)) for u, v in rng.integers(0, 256, size=(n, 2)))


def random_chain(rng: np.random.Generator, bimanual: bool, n_actions: int):
    from arcdata.chains import ReasoningChain
    from arcdata.traces import ARM_LEFT, ARM_RIGHT, VisualTrace

    depth = tuple(int(t) for t in rng.integers(1, 129, size=100))
    if bimanual:
        traces = (
            VisualTrace(random_trace_points(rng, int(rng.integers(1, 6))), arm=ARM_LEFT),
            VisualTrace(random_trace_points(rng, int(rng.integers(1, 6))), arm=ARM_RIGHT),
        )
    else:
        traces = (VisualTrace(random_trace_points(rng, int(rng.integers(1, 6)))),)
    actions = tuple(int(b) for b in rng.integers(0, 256, size=n_actions))
    return ReasoningChain(depth=depth, traces=traces, actions=actions)
