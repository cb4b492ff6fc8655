"""
Variant triples: one source, its target in two stylistic variants.
"""

import logging

from datakit.corpus import TriSample
from errors import InputError
from utils import make_rng

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

NEUTRAL = "neutral"


def make_variant_triples(records, tag_translator, seed, variants=("A", "B")):
    """
    Build (src, variant-A target, variant-B target) triples.

    A sentence labeled with one variant keeps its reference on that side and
    gets the other side from the tag-steered translator. As many neutral
    sentences as labeled ones are sampled and duplicated on both sides.

    Args:
        records (list): (src, ref, label) tuples; label is a variant name or "neutral"
        tag_translator (callable): (src, variant) -> sentence in that variant
        seed (int): neutral sampling seed
        variants (tuple): the two variant labels, in tgt1/tgt2 order

    Returns:
        list: labeled triples in input order, then the sampled neutral triples

    Raises:
        InputError: a label outside variants + neutral
    """
    variant_a, variant_b = variants
    labeled, neutral = [], []
    for number, (src, ref, label) in enumerate(records, start=1):
        if label == NEUTRAL:
            neutral.append((src, ref))
        elif label in variants:
            labeled.append((src, ref, label))
        else:
            raise InputError(f"Record {number}: unknown label {label!r}, expected {variants} or {NEUTRAL!r}")

    output = []
    for src, ref, label in labeled:
        other = variant_b if label == variant_a else variant_a
        try:
            predicted = tag_translator(src, other)
        except Exception as exc:
            logger.warning(f"Variant translator failed on {src!r}: {exc}")
            continue
        if label == variant_a:
            output.append(TriSample(src, ref, predicted, meta={"label": label, "synthetic": 2}))
        else:
            output.append(TriSample(src, predicted, ref, meta={"label": label, "synthetic": 1}))

    wanted = len(output)
    if wanted > len(neutral):
        logger.warning(f"Only {len(neutral)} neutral sentences for {wanted} labeled ones; using all")
    picked = sorted(make_rng(seed).permutation(len(neutral))[:wanted].tolist()) if neutral else []
    output.extend(TriSample(neutral[i][0], neutral[i][1], neutral[i][1], meta={"label": NEUTRAL})
                  for i in picked)

    logger.info(f"Variant triples: {len(output) - len(picked)} labeled, {len(picked)} neutral")
    return output
