"""
Code-switched corpus synthesis.

For each sentence pair a primary language is drawn uniformly. A replacement
count r is drawn with P(r = k) proportional to 1 / 2^(k+1) over k = 1..rep
and clamped to n = min(S // 2, T // 2, r). Then n non-overlapping consistent
phrase pairs are picked at random and their primary-side fragments are
replaced by the secondary-side counterparts. The two original sentences are
the references, so every token of the mixed sentence occurs in one of them.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from datakit.phrases import extract_phrase_pairs
from errors import InputError
from utils import make_rng

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

FLAG_NO_PHRASES = "no-phrase-pairs"
FLAG_CLAMPED = "clamped-to-zero"


@dataclass
class CswSample:
    """
    A code-switched source with its two monolingual references.

    Attributes:
        csw (str): mixed sentence
        ref1 (str): language-1 reference (source side of the bitext)
        ref2 (str): language-2 reference (target side of the bitext)
        primary (int): 1 or 2, the language the mixed sentence is based on
        replacements (list): (PhrasePair, direction) with direction "2->1"
            when a language-2 fragment went into a language-1 sentence
        flags (list): FLAG_NO_PHRASES or FLAG_CLAMPED when nothing was replaced
    """
    csw: str
    ref1: str
    ref2: str
    primary: int
    replacements: list = field(default_factory=list)
    flags: list = field(default_factory=list)


def replacement_weights(rep):
    """Weights 1/2^(k+1) for k = 1..rep, renormalized to sum to one."""
    if rep < 1:
        raise InputError(f"rep must be >= 1, got {rep}")
    weights = 0.5 ** (np.arange(1, rep + 1) + 1)
    return weights / weights.sum()


def sample_replacement_count(rep, src_len, tgt_len, rng):
    """
    Draw the number of fragments to replace in one sentence pair.

    Args:
        rep (int): maximum number of replacements
        src_len (int): source length S
        tgt_len (int): target length T
        rng (numpy.random.Generator): random source

    Returns:
        int: min(S // 2, T // 2, r)
    """
    if src_len < 1 or tgt_len < 1:
        raise InputError(f"Sentence lengths must be positive, got S={src_len}, T={tgt_len}")
    r = int(rng.choice(np.arange(1, rep + 1), p=replacement_weights(rep)))
    return min(src_len // 2, tgt_len // 2, r)


def choose_fragments(phrase_pairs, count, rng):
    """Pick up to count pairs, uniformly ordered, skipping any overlapping an earlier pick."""
    chosen = []
    for index in rng.permutation(len(phrase_pairs)):
        candidate = phrase_pairs[int(index)]
        if any(candidate.overlaps(existing) for existing in chosen):
            continue
        chosen.append(candidate)
        if len(chosen) == count:
            break
    return chosen


def _splice(primary_tokens, secondary_tokens, fragments, primary):
    """Replace primary-side spans with their secondary-side counterparts."""
    def spans(pair):
        if primary == 1:
            return pair.src_span, pair.tgt_span
        return pair.tgt_span, pair.src_span

    output, position = [], 0
    for pair in sorted(fragments, key=lambda p: spans(p)[0].start):
        own, other = spans(pair)
        output.extend(primary_tokens[position:own.start])
        output.extend(secondary_tokens[other.start:other.stop])
        position = own.stop
    output.extend(primary_tokens[position:])
    return output


def make_csw_sample(src, tgt, links, rep, rng, max_phrase_len=4):
    src_tokens, tgt_tokens = src.split(), tgt.split()
    primary = int(rng.integers(1, 3))
    primary_tokens, secondary_tokens = (src_tokens, tgt_tokens) if primary == 1 else (tgt_tokens, src_tokens)

    phrase_pairs = extract_phrase_pairs(links, len(src_tokens), len(tgt_tokens), max_phrase_len)
    count = sample_replacement_count(rep, len(src_tokens), len(tgt_tokens), rng)

    sample = CswSample(" ".join(primary_tokens), src, tgt, primary)
    if not phrase_pairs:
        sample.flags.append(FLAG_NO_PHRASES)
        return sample
    if count == 0:
        sample.flags.append(FLAG_CLAMPED)
        return sample

    fragments = choose_fragments(phrase_pairs, count, rng)
    direction = "2->1" if primary == 1 else "1->2"
    sample.csw = " ".join(_splice(primary_tokens, secondary_tokens, fragments, primary))
    sample.replacements = [(pair, direction) for pair in sorted(fragments)]
    return sample


def make_csw_corpus(bitext, alignments, rep, seed, max_phrase_len=4):
    """
    Generate one code-switched sample per sentence pair.

    Args:
        bitext (Bitext): language-1 / language-2 sentence pairs
        alignments (list): symmetrized link set per pair, (language-1, language-2) positions
        rep (int): maximum replacements per sentence
        seed (int): random seed
        max_phrase_len (int): longest replaced fragment, in words

    Returns:
        list: CswSample objects in bitext order
    """
    if len(alignments) != len(bitext):
        raise InputError(f"{len(alignments)} alignments for {len(bitext)} sentence pairs")
    replacement_weights(rep)

    rng = make_rng(seed)
    samples = []
    for (src, tgt), links in zip(bitext.pairs(), alignments):
        sample = make_csw_sample(src, tgt, links, rep, rng, max_phrase_len)
        if FLAG_NO_PHRASES in sample.flags:
            logger.warning(f"No phrase pairs for {src!r}; emitted unmodified")
        samples.append(sample)

    replaced = sum(len(s.replacements) for s in samples)
    logger.info(f"Code-switched corpus: {len(samples)} samples, {replaced} fragments replaced")
    return samples
