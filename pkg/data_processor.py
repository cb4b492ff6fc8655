"""
Data processor for dual-decoder training.

This module turns trilingual sentence samples into padded id arrays:
- Subword encoding of the three sides
- BOS/EOS framing of targets, with optional wait-k delay placeholders
- Length-bucketed batching under a token budget
- Seeded train/dev splitting
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import train_test_split

from datakit.corpus import TriSample
from errors import ConfigError, InputError
from subword import BOS_ID, EOS_ID, PAD_ID

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@dataclass
class Batch:
    """
    Padded arrays for one training step.

    Attributes:
        src (numpy.ndarray): (B, S) source ids
        inputs1, inputs2 (numpy.ndarray): (B, L) decoder inputs, BOS first
        outputs1, outputs2 (numpy.ndarray): (B, L) next-token targets, PAD where ignored
        weights (numpy.ndarray): (B,) sample weights
    """
    src: np.ndarray
    inputs1: np.ndarray
    outputs1: np.ndarray
    inputs2: np.ndarray
    outputs2: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.src.shape[0]

    @property
    def num_tokens(self):
        return int((self.outputs1 != PAD_ID).sum() + (self.outputs2 != PAD_ID).sum())


def encode_source(src_model, sentence, tag=None, number=None):
    """Source ids: optional tag, subwords, EOS."""
    prefix = [src_model.tag_id(tag)] if tag else []
    body = src_model.encode(sentence)
    if not body:
        where = f"Sample {number}" if number is not None else "Source sentence"
        raise InputError(f"{where} encodes to an empty sequence")
    return prefix + body + [EOS_ID]


def encode_samples(samples, src_model, tgt_model, src_tag=None):
    """
    Encode sentence samples into id samples.

    Args:
        samples (list): TriSample objects with sentence fields
        src_model (SubwordModel): source subword model
        tgt_model (SubwordModel): target subword model (shared by both targets)
        src_tag (str, optional): tag token prepended to every source

    Returns:
        list: TriSample objects with tuple-of-int fields; the source ends with EOS
    """
    encoded = []
    for number, sample in enumerate(samples, start=1):
        src = encode_source(src_model, sample.src, src_tag, number)
        tgt1, tgt2 = tgt_model.encode(sample.tgt1), tgt_model.encode(sample.tgt2)
        if not tgt1 or not tgt2:
            raise InputError(f"Sample {number} encodes to an empty sequence")
        encoded.append(TriSample(tuple(src), tuple(tgt1), tuple(tgt2), sample.weight, dict(sample.meta)))
    logger.debug(f"Encoded {len(encoded)} samples")
    return encoded


def frame_target(ids, wait=0):
    """
    Decoder input and output for one target.

    With wait = k the decoder first reads k PAD placeholders after BOS and
    is trained to emit PAD there (ignored by the loss).

    Returns:
        tuple: (inputs, outputs) lists of equal length
    """
    framed = [BOS_ID] + [PAD_ID] * wait + list(ids) + [EOS_ID]
    return framed[:-1], framed[1:]


def sample_length(sample, wait_k1=0, wait_k2=0):
    return max(len(sample.src), len(sample.tgt1) + 1 + wait_k1, len(sample.tgt2) + 1 + wait_k2)


def _pad(rows, length):
    array = np.full((len(rows), length), PAD_ID, dtype=np.int64)
    for i, row in enumerate(rows):
        array[i, :len(row)] = row
    return array


def make_batch(samples, wait_k1=0, wait_k2=0):
    """
    Collate id samples into a Batch.

    Raises:
        InputError: empty batch
    """
    if not samples:
        raise InputError("Cannot build an empty batch")
    framed1 = [frame_target(s.tgt1, wait_k1) for s in samples]
    framed2 = [frame_target(s.tgt2, wait_k2) for s in samples]
    length = max(len(inp) for inp, _ in framed1 + framed2)
    return Batch(
        src=_pad([s.src for s in samples], max(len(s.src) for s in samples)),
        inputs1=_pad([inp for inp, _ in framed1], length),
        outputs1=_pad([out for _, out in framed1], length),
        inputs2=_pad([inp for inp, _ in framed2], length),
        outputs2=_pad([out for _, out in framed2], length),
        weights=np.array([s.weight for s in samples], dtype=float),
    )


def bucket_batches(samples, batch_tokens, rng=None, wait_k1=0, wait_k2=0):
    """
    Group samples of similar length so that batch size x longest sample
    stays within the token budget.

    Args:
        samples (list): id samples
        batch_tokens (int): token budget per batch
        rng (numpy.random.Generator, optional): shuffles samples within equal
            lengths and the batch order; None keeps a fixed order

    Returns:
        list: lists of samples

    Raises:
        ConfigError: a single sample exceeds the budget
    """
    lengths = [sample_length(s, wait_k1, wait_k2) for s in samples]
    if lengths and max(lengths) > batch_tokens:
        raise ConfigError(f"batch_tokens={batch_tokens} is smaller than the longest sample ({max(lengths)})")

    order = np.arange(len(samples)) if rng is None else rng.permutation(len(samples))
    order = sorted(order.tolist(), key=lambda i: lengths[i])

    batches, current, longest = [], [], 0
    for index in order:
        longest_if_added = max(longest, lengths[index])
        if current and longest_if_added * (len(current) + 1) > batch_tokens:
            batches.append(current)
            current, longest_if_added = [], lengths[index]
        current.append(samples[index])
        longest = longest_if_added
    if current:
        batches.append(current)

    if rng is not None:
        batches = [batches[i] for i in rng.permutation(len(batches))]
    logger.debug(f"Bucketed {len(samples)} samples into {len(batches)} batches")
    return batches


def split_dev(samples, dev_fraction, seed):
    """Seeded train/dev split; returns (train, dev)."""
    if not 0.0 < dev_fraction < 1.0:
        raise ConfigError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    if len(samples) < 2:
        raise InputError("Need at least two samples to carve out a dev set")
    train, dev = train_test_split(list(samples), test_size=dev_fraction, random_state=seed, shuffle=True)
    return train, dev


def _key(sample):
    return (tuple(sample.src), tuple(sample.tgt1), tuple(sample.tgt2))


def check_disjoint(train, dev):
    """
    Raises:
        InputError: a dev sample also occurs in the training set
    """
    train_keys = {_key(s) for s in train}
    overlap = sum(1 for s in dev if _key(s) in train_keys)
    if overlap:
        raise InputError(f"{overlap} dev samples also occur in the training set")
