"""
Beam search for one decoder and synchronous beam search for two.

In the synchronous search each live entry is a pair of hypotheses. At every
step the live pairs are stacked in rank order and run through both decoders
at once, so the cross attention of rank r looks at rank r of the other
decoder (or at rank 0 / the rank average under the relaxed coupling
schemes). Because the ranking changes from step to step, every prefix is
recomputed from scratch rather than cached.
"""

import logging

import numpy as np

from model import dual_forward, encode, next_token_log_probs
from numcore import no_grad
from search.greedy import finalize_pair, require_two_decoders, side_candidates, single_side_log_probs
from search.hypothesis import (
    DualHypothesis, Hypothesis, SearchConfig, allowed_log_probs, emitted_length,
    joint_score, prefix_array, score_pairs, single_score,
)
from subword import EOS_ID

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def _expand(live, step, lp1, lp2, config):
    """All candidate pairs from the live pairs, as parallel lists plus a score array."""
    width = config.beam_size
    parents, choice1, choice2, scores, logps = [], [], [], [], []
    for row, hyp in enumerate(live):
        tokens1, gains1 = side_candidates(config, 1, step, hyp.done1, lp1[row], width)
        tokens2, gains2 = side_candidates(config, 2, step, hyp.done2, lp2[row], width)
        n1 = np.array([emitted_length(hyp.tokens1 + [t]) for t in tokens1], dtype=float)
        n2 = np.array([emitted_length(hyp.tokens2 + [t]) for t in tokens2], dtype=float)
        total1 = hyp.logp1 + np.asarray(gains1)
        total2 = hyp.logp2 + np.asarray(gains2)
        grid = joint_score(total1[:, None], total2[None, :], n1[:, None], n2[None, :],
                           config.length_penalty_alpha, config.normalize)
        for a in range(len(tokens1)):
            for b in range(len(tokens2)):
                parents.append(row)
                choice1.append(tokens1[a])
                choice2.append(tokens2[b])
                logps.append((float(total1[a]), float(total2[b])))
        scores.append(np.asarray(grid, dtype=float).reshape(-1))
    return parents, choice1, choice2, logps, np.concatenate(scores)


def dual_beam_search(model, src, config=None):
    """
    Synchronous beam search over pairs of outputs.

    Args:
        model (DualModel): two-decoder model
        src (list of int): source ids
        config (SearchConfig): beam size, coupling scheme, wait/forcing, length settings

    Returns:
        DualHypothesis: best finished pair, scored exactly with a rank-aligned
        forward pass; when no pair finishes within max_len, the best live pair
        flagged as truncated
    """
    config = config or SearchConfig()
    require_two_decoders(model)
    model.eval()
    k = config.beam_size

    with no_grad():
        enc = encode(model, [list(src)])
        live = [DualHypothesis([], [])]
        finished = []

        for step in range(config.max_len):
            logits1, logits2 = dual_forward(model, enc,
                                            prefix_array([h.tokens1 for h in live]),
                                            prefix_array([h.tokens2 for h in live]),
                                            config.coupling_scheme)
            lp1, lp2 = next_token_log_probs(logits1), next_token_log_probs(logits2)
            parents, choice1, choice2, logps, scores = _expand(live, step, lp1, lp2, config)

            order = np.argsort(-scores, kind="stable")[:k]
            next_live, newly_done = [], []
            for index in order:
                parent = live[parents[index]]
                t1, t2 = choice1[index], choice2[index]
                hyp = DualHypothesis(
                    parent.tokens1 + [t1], parent.tokens2 + [t2],
                    logps[index][0], logps[index][1],
                    done1=parent.done1 or t1 == EOS_ID,
                    done2=parent.done2 or t2 == EOS_ID,
                    score=float(scores[index]),
                )
                (newly_done if hyp.done else next_live).append(hyp)

            if newly_done:
                exact = score_pairs(model, enc, [(h.tokens1, h.tokens2) for h in newly_done])
                for hyp, (logp1, logp2) in zip(newly_done, exact):
                    hyp.logp1, hyp.logp2 = logp1, logp2
                    hyp.score = joint_score(logp1, logp2, emitted_length(hyp.tokens1),
                                            emitted_length(hyp.tokens2),
                                            config.length_penalty_alpha, config.normalize)
                finished.extend(newly_done)

            live = next_live
            logger.debug(f"step {step}: {len(live)} live, {len(finished)} finished pairs")
            if not live or len(finished) >= k:
                break

        if finished:
            return max(finished, key=lambda h: h.score)
        best = live[0]
        return finalize_pair(model, enc, best.tokens1, best.tokens2, config, truncated=True)


def beam_search(model, src, config=None, side=1):
    """
    Beam search with one decoder.

    With a cross-attending model the partner decoder only sees placeholders.

    Returns:
        Hypothesis: best finished hypothesis, or the best live one flagged as truncated
    """
    config = config or SearchConfig()
    model.eval()
    k = config.beam_size

    with no_grad():
        enc = encode(model, [list(src)])
        live = [Hypothesis([])]
        finished = []

        for _ in range(config.max_len):
            log_probs = allowed_log_probs(single_side_log_probs(model, enc, [h.tokens for h in live], side))
            width = min(k, int(np.isfinite(log_probs[0]).sum()))
            candidates = []
            for row, hyp in enumerate(live):
                for token in np.argsort(-log_probs[row], kind="stable")[:width]:
                    tokens = hyp.tokens + [int(token)]
                    logp = hyp.logp + float(log_probs[row, token])
                    score = single_score(logp, emitted_length(tokens), config.length_penalty_alpha, config.normalize)
                    candidates.append(Hypothesis(tokens, logp, int(token) == EOS_ID, score))

            scores = np.array([c.score for c in candidates])
            next_live = []
            for index in np.argsort(-scores, kind="stable")[:k]:
                hyp = candidates[index]
                (finished if hyp.done else next_live).append(hyp)
            live = next_live
            if not live or len(finished) >= k:
                break

    if finished:
        return max(finished, key=lambda h: h.score)
    best = live[0]
    best.truncated = True
    return best
