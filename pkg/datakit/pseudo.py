"""
Synthetic trilingual and bi-directional training corpora.

A translator is any callable mapping a source sentence to an output
sentence. Reverse translators produce right-to-left output, i.e. the target
tokens already in reversed order. A translator that raises, or returns an
empty line, makes the sample be skipped with a warning.
"""

import logging

from datakit.corpus import TriSample, reverse_sentence
from errors import InputError
from utils import make_rng

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

BIDI_MODES = ("gold", "pseudo", "pseudo-dup")


def _translate(translator, src, what):
    try:
        output = translator(src)
    except Exception as exc:
        logger.warning(f"{what} translator failed on {src!r}: {exc}")
        return None
    if not output or not output.strip():
        logger.warning(f"{what} translator returned an empty output for {src!r}")
        return None
    return output


def half_split(count, seed):
    """
    Seeded half/half partition of sample indices.

    Returns:
        set: indices taking the first role; ceil(count / 2) of them
    """
    order = make_rng(seed).permutation(count)
    return {int(index) for index in order[0::2]}


def make_pseudo_trilingual(samples, translator1, translator2, seed):
    """
    Replace one target per sample with machine output, half and half.

    Half of the samples (ceil(N/2), chosen with the seed) keep their tgt2
    reference and get a synthetic tgt1; the other half keep tgt1 and get a
    synthetic tgt2. Every source occurs once, in input order.

    Args:
        samples (list): TriSample corpus with sentence fields
        translator1 (callable): source -> target-1 sentence
        translator2 (callable): source -> target-2 sentence
        seed (int): split seed

    Returns:
        list: TriSample corpus; meta["synthetic"] names the generated side
    """
    first = half_split(len(samples), seed)
    output = []
    for index, sample in enumerate(samples):
        if index in first:
            hyp = _translate(translator1, sample.src, "target-1")
            if hyp is not None:
                output.append(TriSample(sample.src, hyp, sample.tgt2, sample.weight, {"synthetic": 1}))
        else:
            hyp = _translate(translator2, sample.src, "target-2")
            if hyp is not None:
                output.append(TriSample(sample.src, sample.tgt1, hyp, sample.weight, {"synthetic": 2}))

    skipped = len(samples) - len(output)
    logger.info(f"Pseudo-trilingual corpus: {len(output)} samples, {skipped} skipped")
    return output


def make_bidi_corpus(bitext, mode, reverse_translator=None, forward_translator=None, seed=1):
    """
    Build a left-to-right / right-to-left corpus from a bitext.

    tgt1 holds the left-to-right target and tgt2 the right-to-left one.

    Modes:
        gold        tgt2 is the reversed reference; N samples
        pseudo      half the samples get a synthetic R2L side, the others a
                    synthetic L2R side; N samples
        pseudo-dup  every source twice, once with each reference direction
                    and machine output on the other side; 2N samples

    Raises:
        InputError: unknown mode, or a pseudo mode without translators
    """
    if mode not in BIDI_MODES:
        raise InputError(f"Unknown bidi mode {mode!r}, expected one of {BIDI_MODES}")
    if mode != "gold" and (reverse_translator is None or forward_translator is None):
        raise InputError(f"Mode {mode!r} needs both a forward and a reverse translator")

    pairs = bitext.pairs()
    output = []
    if mode == "gold":
        output = [TriSample(src, tgt, reverse_sentence(tgt)) for src, tgt in pairs]
    elif mode == "pseudo":
        synthetic_r2l = half_split(len(pairs), seed)
        for index, (src, tgt) in enumerate(pairs):
            if index in synthetic_r2l:
                hyp = _translate(reverse_translator, src, "R2L")
                if hyp is not None:
                    output.append(TriSample(src, tgt, hyp, meta={"synthetic": 2}))
            else:
                hyp = _translate(forward_translator, src, "L2R")
                if hyp is not None:
                    output.append(TriSample(src, hyp, reverse_sentence(tgt), meta={"synthetic": 1}))
    else:
        for src, tgt in pairs:
            hyp = _translate(reverse_translator, src, "R2L")
            if hyp is not None:
                output.append(TriSample(src, tgt, hyp, meta={"synthetic": 2}))
            hyp = _translate(forward_translator, src, "L2R")
            if hyp is not None:
                output.append(TriSample(src, hyp, reverse_sentence(tgt), meta={"synthetic": 1}))

    logger.info(f"Bi-directional corpus ({mode}): {len(output)} samples from {len(pairs)} pairs")
    return output
