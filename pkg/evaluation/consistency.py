"""
Agreement between the left-to-right and right-to-left outputs of a
bi-directional system.
"""

import logging

from datakit.corpus import reverse_sentence
from errors import InputError
from evaluation.bleu import corpus_bleu

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def consistency_score(fwd_hyps, bwd_hyps, symmetric=True, **kwargs):
    """
    BLEU between forward outputs and reversed backward outputs.

    Args:
        fwd_hyps (list of str): left-to-right outputs
        bwd_hyps (list of str): right-to-left outputs, in generation order
        symmetric (bool): average the two scoring directions; otherwise
            score the forward outputs against the reversed backward ones only

    Returns:
        float: 0..100
    """
    fwd_hyps, bwd_hyps = list(fwd_hyps), list(bwd_hyps)
    if len(fwd_hyps) != len(bwd_hyps):
        raise InputError(f"{len(fwd_hyps)} forward but {len(bwd_hyps)} backward outputs")
    restored = [reverse_sentence(h) for h in bwd_hyps]
    forward = corpus_bleu(fwd_hyps, restored, **kwargs).score
    if not symmetric:
        return forward
    backward = corpus_bleu(restored, fwd_hyps, **kwargs).score
    return (forward + backward) / 2.0
