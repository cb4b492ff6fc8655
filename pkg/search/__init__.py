"""
Decoding: greedy and beam search for one decoder, synchronous dual beam
search, wait-k and forced decoding, two-pass sequential decoding and
bi-directional selection.
"""

from search.hypothesis import (
    BANNED_IDS, DualHypothesis, Hypothesis, SearchConfig, emitted_length,
    joint_score, score_pair, score_pairs, strip_output,
)
from search.greedy import greedy_decode, greedy_dual_decode
from search.beam import beam_search, dual_beam_search
from search.sequential import bidi_select, sequential_decode
