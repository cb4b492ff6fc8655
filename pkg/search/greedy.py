"""
Greedy decoding for one decoder and for both decoders in lockstep.
"""

import logging

import numpy as np

from errors import ContractError
from model import decoder_forward, dual_forward, encode, next_token_log_probs
from numcore import no_grad
from search.hypothesis import (
    DualHypothesis, Hypothesis, SearchConfig, allowed_log_probs, emitted_length,
    joint_score, prefix_array, score_pairs, single_score,
)
from subword import EOS_ID, PAD_ID

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def side_candidates(config, side, step, done, log_probs, width):
    """
    Tokens one side may emit at this step, best first.

    A finished side emits PAD at no cost. A forced side emits its next
    forced token, then EOS. A waiting side emits PAD. Otherwise the `width`
    most probable allowed tokens are returned; equal log-probabilities keep
    vocabulary order.

    Returns:
        tuple: (token ids, log-probabilities)
    """
    if done:
        return [PAD_ID], [0.0]
    forced = config.forced(side)
    if forced is not None:
        token = forced[step] if step < len(forced) else EOS_ID
        return [token], [float(log_probs[token])]
    if step < config.wait(side):
        return [PAD_ID], [0.0]
    allowed = allowed_log_probs(log_probs)
    limit = min(width, int(np.isfinite(allowed).sum()))
    order = np.argsort(-allowed, kind="stable")[:limit]
    return order.tolist(), allowed[order].tolist()


def require_two_decoders(model):
    if model.config.num_decoders != 2:
        raise ContractError("Dual decoding needs a model with two decoders")


def finalize_pair(model, enc, tokens1, tokens2, config, truncated=False):
    """Build a DualHypothesis scored with one exact forward pass."""
    (logp1, logp2), = score_pairs(model, enc, [(tokens1, tokens2)])
    return DualHypothesis(
        list(tokens1), list(tokens2), logp1, logp2,
        done1=EOS_ID in tokens1, done2=EOS_ID in tokens2,
        score=joint_score(logp1, logp2, emitted_length(tokens1), emitted_length(tokens2),
                          config.length_penalty_alpha, config.normalize),
        truncated=truncated,
    )


def greedy_dual_decode(model, src, config=None):
    """
    Both decoders emit their most probable next token at every step.

    Args:
        model (DualModel): two-decoder model (dual or independent)
        src (list of int): source ids
        config (SearchConfig, optional): wait, forcing and length settings

    Returns:
        DualHypothesis: the decoded pair
    """
    config = config or SearchConfig(beam_size=1)
    require_two_decoders(model)
    model.eval()
    with no_grad():
        enc = encode(model, [list(src)])
        tokens = {1: [], 2: []}
        done = {1: False, 2: False}
        for step in range(config.max_len):
            if done[1] and done[2]:
                break
            logits = dual_forward(model, enc, prefix_array([tokens[1]]), prefix_array([tokens[2]]),
                                  config.coupling_scheme)
            for side, side_logits in zip((1, 2), logits):
                log_probs = next_token_log_probs(side_logits)[0]
                (token,), _ = side_candidates(config, side, step, done[side], log_probs, 1)
                tokens[side].append(token)
                done[side] = done[side] or token == EOS_ID
        return finalize_pair(model, enc, tokens[1], tokens[2], config, truncated=not (done[1] and done[2]))


def single_side_log_probs(model, enc, streams, side):
    """
    Next-token log-probabilities of one decoder for a batch of streams.

    A cross-attending model runs its partner decoder on placeholder-only
    prefixes, so the partner contributes no content.
    """
    prefixes = prefix_array(streams)
    if model.config.has_cross_attention:
        muted = np.full_like(prefixes, PAD_ID)
        muted[:, 0] = prefixes[:, 0]
        pair = (prefixes, muted) if side == 1 else (muted, prefixes)
        logits = dual_forward(model, enc, *pair)[side - 1]
    else:
        logits = decoder_forward(model, enc, prefixes, side)
    return next_token_log_probs(logits)


def greedy_decode(model, src, config=None, side=1):
    """
    Greedy decoding with a single decoder.

    Returns:
        Hypothesis: tokens end with EOS unless truncated at max_len
    """
    config = config or SearchConfig(beam_size=1)
    model.eval()
    with no_grad():
        enc = encode(model, [list(src)])
        tokens, logp, done = [], 0.0, False
        for _ in range(config.max_len):
            log_probs = allowed_log_probs(single_side_log_probs(model, enc, [tokens], side)[0])
            token = int(np.argmax(log_probs))
            tokens.append(token)
            logp += float(log_probs[token])
            if token == EOS_ID:
                done = True
                break
    return Hypothesis(tokens, logp, done, single_score(logp, emitted_length(tokens),
                                                       config.length_penalty_alpha, config.normalize),
                      truncated=not done)
