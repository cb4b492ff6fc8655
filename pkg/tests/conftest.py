"""Shared fixtures: tiny models, toy corpora and 64-bit numerics."""

import numpy as np
import pytest

from datakit.corpus import TriSample
from model import DualModel, ModelConfig
from numcore import precision
from subword import EOS_ID

# content tokens start after PAD, BOS, EOS, UNK
FIRST_CONTENT = 4


@pytest.fixture(autouse=True)
def float64():
    with precision(np.float64):
        yield


def tiny_config(**overrides):
    values = dict(src_vocab_size=12, tgt_vocab_size=12, d_model=16, d_ff=32, heads=2,
                  enc_layers=1, dec_layers=1, coupling="dual", dropout=0.0, max_positions=64, seed=3)
    values.update(overrides)
    return ModelConfig(**values)


def tiny_model(**overrides):
    return DualModel(tiny_config(**overrides)).eval()


@pytest.fixture
def make_model():
    return tiny_model


@pytest.fixture
def dual_model():
    return tiny_model()


def copy_reverse_samples(count=32, length=5, vocab=12, seed=0):
    """Toy task: tgt1 copies the source, tgt2 reverses it."""
    rng = np.random.default_rng(seed)
    samples, seen = [], set()
    while len(samples) < count:
        body = tuple(int(t) for t in rng.integers(FIRST_CONTENT, vocab, size=length))
        if body in seen:
            continue
        seen.add(body)
        samples.append(TriSample(body + (EOS_ID,), body, tuple(reversed(body))))
    return samples


@pytest.fixture
def toy_samples():
    return copy_reverse_samples()
