"""
Two-pass sequential decoding and bi-directional output selection.
"""

import logging
from dataclasses import replace

from errors import ContractError, InputError
from search.beam import beam_search, dual_beam_search
from search.greedy import require_two_decoders
from search.hypothesis import SearchConfig

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def sequential_decode(model, src, first_side, config=None, reference=None):
    """
    Decode one side first, then the other with the first side fixed.

    Pass 1 decodes `first_side` alone (its partner sees only placeholders),
    or takes `reference` as that side's output. Pass 2 is a synchronous
    beam search with the first side forced.

    Args:
        model (DualModel): two-decoder model
        src (list of int): source ids
        first_side (int): 1 or 2
        config (SearchConfig, optional): search settings
        reference (list of int, optional): token ids to use instead of pass 1

    Returns:
        DualHypothesis: pass-2 result

    Raises:
        InputError: reference longer than max_len allows
        ContractError: first_side not 1 or 2
    """
    config = config or SearchConfig()
    require_two_decoders(model)
    if first_side not in (1, 2):
        raise ContractError(f"first_side must be 1 or 2, got {first_side}")

    if reference is not None:
        fixed = [int(t) for t in reference]
        if len(fixed) + 1 > config.max_len:
            raise InputError(f"Reference of {len(fixed)} tokens exceeds max_len={config.max_len}")
    else:
        first_pass = beam_search(model, src, replace(config, forced1=None, forced2=None), side=first_side)
        # a truncated first pass still leaves room for the forced EOS
        fixed = first_pass.output[:config.max_len - 1]
        logger.debug(f"Pass 1 (side {first_side}): {len(fixed)} tokens, score {first_pass.score:.4f}")

    forced = {"forced1": fixed, "forced2": None} if first_side == 1 else {"forced1": None, "forced2": fixed}
    second = replace(config, wait_k1=0, wait_k2=0, **forced)
    return dual_beam_search(model, src, second)


def bidi_select(y_l2r, score_l2r, y_r2l, score_r2l):
    """
    Pick the better of a left-to-right and a right-to-left output.

    Ties go to the left-to-right output; a right-to-left winner is reversed.
    """
    if score_l2r >= score_r2l:
        return list(y_l2r)
    return list(reversed(y_r2l))
