"""
Search configuration, hypotheses and exact pair scoring.
"""

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from errors import ConfigError, InputError
from model import COUPLING_SCHEMES, dual_forward, encode
from numcore import log_softmax, no_grad
from subword import BOS_ID, EOS_ID, PAD_ID, UNK_ID

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# never emitted by search
BANNED_IDS = (PAD_ID, BOS_ID, UNK_ID)


@dataclass
class SearchConfig:
    """
    Decoding settings.

    Attributes:
        beam_size (int): k
        coupling_scheme (str): rank-aligned, attend-best or attend-average
        wait_k1, wait_k2 (int): PAD steps before a side starts; at most one non-zero
        forced1, forced2 (list, optional): token ids a side must emit verbatim
        max_len (int): maximum emissions per side, EOS and placeholders included
        length_penalty_alpha (float): exponent of the length normalizer
        normalize (bool): divide by the length normalizer; False ranks by raw log-probability
    """
    beam_size: int = 4
    coupling_scheme: str = "rank-aligned"
    wait_k1: int = 0
    wait_k2: int = 0
    forced1: list = None
    forced2: list = None
    max_len: int = 100
    length_penalty_alpha: float = 1.0
    normalize: bool = True

    def __post_init__(self):
        if self.beam_size < 1:
            raise ConfigError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.coupling_scheme not in COUPLING_SCHEMES:
            raise ConfigError(f"Unknown coupling scheme {self.coupling_scheme!r}, expected one of {COUPLING_SCHEMES}")
        if self.wait_k1 < 0 or self.wait_k2 < 0 or (self.wait_k1 and self.wait_k2):
            raise ConfigError("At most one of wait_k1 / wait_k2 may be non-zero, and neither negative")
        if self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")
        if self.length_penalty_alpha < 0:
            raise ConfigError("length_penalty_alpha must be non-negative")
        for side in (1, 2):
            forced = self.forced(side)
            if forced is None:
                continue
            forced = [int(t) for t in forced]
            if any(t in (PAD_ID, BOS_ID, EOS_ID) for t in forced):
                raise InputError(f"forced{side} must not contain PAD, BOS or EOS")
            if len(forced) + 1 > self.max_len:
                raise InputError(f"forced{side} has {len(forced)} tokens, longer than max_len={self.max_len} allows")
            setattr(self, f"forced{side}", forced)

    def forced(self, side):
        return self.forced1 if side == 1 else self.forced2

    def wait(self, side):
        return self.wait_k1 if side == 1 else self.wait_k2

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown search settings: {sorted(unknown)}")
        return cls(**values)


def strip_output(tokens):
    """User-facing tokens: placeholders dropped, cut at the first EOS."""
    output = []
    for token in tokens:
        if token == EOS_ID:
            break
        if token != PAD_ID:
            output.append(int(token))
    return output


def emitted_length(tokens):
    """Number of emitted non-PAD tokens (EOS included), at least 1."""
    return max(1, sum(1 for t in tokens if t != PAD_ID))


def joint_score(logp1, logp2, n1, n2, alpha=1.0, normalize=True):
    """(logp1 + logp2) / ((n1 + n2) / 2) ** alpha, or the raw sum."""
    if not normalize:
        return logp1 + logp2
    return (logp1 + logp2) / (((n1 + n2) / 2.0) ** alpha)


def single_score(logp, n, alpha=1.0, normalize=True):
    return logp / (n ** alpha) if normalize else logp


@dataclass
class DualHypothesis:
    """
    A pair of token streams with their scores.

    tokens1/tokens2 are the raw streams: wait placeholders and post-EOS
    padding appear as PAD, which contributes nothing to the log-probability.
    """
    tokens1: list
    tokens2: list
    logp1: float = 0.0
    logp2: float = 0.0
    done1: bool = False
    done2: bool = False
    score: float = 0.0
    truncated: bool = False

    @property
    def done(self):
        return self.done1 and self.done2

    @property
    def output1(self):
        return strip_output(self.tokens1)

    @property
    def output2(self):
        return strip_output(self.tokens2)

    def to_dict(self):
        record = asdict(self)
        record["output1"], record["output2"] = self.output1, self.output2
        return record


@dataclass
class Hypothesis:
    """Single-decoder hypothesis."""
    tokens: list = field(default_factory=list)
    logp: float = 0.0
    done: bool = False
    score: float = 0.0
    truncated: bool = False

    @property
    def output(self):
        return strip_output(self.tokens)

    def to_dict(self):
        record = asdict(self)
        record["output"] = self.output
        return record


def prefix_array(streams):
    """BOS-led prefixes for a list of equal-length token streams: (B, t + 1) ids."""
    length = len(streams[0])
    array = np.full((len(streams), length + 1), BOS_ID, dtype=np.int64)
    if length:
        array[:, 1:] = np.asarray(streams, dtype=np.int64)
    return array


def allowed_log_probs(log_probs):
    """Copy of next-token log-probabilities with banned ids at -inf."""
    masked = np.array(log_probs, copy=True)
    masked[..., list(BANNED_IDS)] = -np.inf
    return masked


def score_pairs(model, enc, pairs):
    """
    Exact log-probabilities of complete token-stream pairs.

    One rank-aligned forward pass over all pairs; PAD emissions count zero.

    Args:
        model (DualModel): two-decoder model
        enc (EncoderOutput): encoding with batch 1
        pairs (list): (tokens1, tokens2) streams

    Returns:
        list: (logp1, logp2) per pair
    """
    if not pairs:
        return []
    length = max(max(len(a), len(b)) for a, b in pairs)

    def padded(tokens):
        return list(tokens) + [PAD_ID] * (length - len(tokens))

    streams1 = np.asarray([padded(a) for a, _ in pairs], dtype=np.int64)
    streams2 = np.asarray([padded(b) for _, b in pairs], dtype=np.int64)
    with no_grad():
        logits1, logits2 = dual_forward(model, enc, prefix_array(streams1), prefix_array(streams2))

    rows = np.arange(len(pairs))[:, None]
    steps = np.arange(length)[None, :]
    sums = []
    for logits, streams in ((logits1, streams1), (logits2, streams2)):
        log_probs = log_softmax(logits, axis=-1).data
        picked = log_probs[rows, steps, streams]
        sums.append(np.where(streams != PAD_ID, picked, 0.0).sum(axis=1))
    return [(float(a), float(b)) for a, b in zip(*sums)]


def score_pair(model, src, tokens1, tokens2, config=None):
    """
    Exact joint score of one pair for a source id sequence.

    Returns:
        DualHypothesis: the pair with recomputed log-probabilities and score
    """
    config = config or SearchConfig()
    with no_grad():
        enc = encode(model, [list(src)])
    (logp1, logp2), = score_pairs(model, enc, [(list(tokens1), list(tokens2))])
    return DualHypothesis(
        list(tokens1), list(tokens2), logp1, logp2,
        done1=EOS_ID in tokens1, done2=EOS_ID in tokens2,
        score=joint_score(logp1, logp2, emitted_length(tokens1), emitted_length(tokens2),
                          config.length_penalty_alpha, config.normalize),
    )
