"""
Corpus BLEU on pre-tokenized text, computed with sacreBLEU.
"""

import logging
from dataclasses import asdict, dataclass

from sacrebleu.metrics import BLEU

from errors import InputError

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

SMOOTHING = ("none", "add-k")


@dataclass
class BleuReport:
    """
    Corpus BLEU with its components.

    Attributes:
        score (float): 0..100
        precisions (list): modified n-gram precisions, percent, orders 1..max_n
        bp (float): brevity penalty
        hyp_len (int): total hypothesis tokens
        ref_len (int): total reference tokens
    """
    score: float
    precisions: list
    bp: float
    hyp_len: int
    ref_len: int

    def to_dict(self):
        return asdict(self)


def corpus_bleu(hyps, refs, max_n=4, smoothing="none", smooth_value=1.0):
    """
    Score hypotheses against one reference each.

    Inputs are whitespace-tokenized strings and are not re-tokenized.

    Args:
        hyps (list of str): system outputs
        refs (list of str): references, aligned with hyps
        max_n (int): highest n-gram order
        smoothing (str): "none" or "add-k"
        smooth_value (float): k for add-k smoothing

    Returns:
        BleuReport: score and components

    Raises:
        InputError: empty hypothesis set, count mismatch, unknown smoothing
    """
    hyps, refs = list(hyps), list(refs)
    if not hyps:
        raise InputError("BLEU needs at least one hypothesis")
    if len(hyps) != len(refs):
        raise InputError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if smoothing not in SMOOTHING:
        raise InputError(f"Unknown smoothing {smoothing!r}, expected one of {SMOOTHING}")

    metric = BLEU(
        tokenize="none",
        smooth_method=smoothing,
        smooth_value=smooth_value if smoothing == "add-k" else None,
        max_ngram_order=max_n,
        effective_order=False,
        force=True,
    )
    result = metric.corpus_score([" ".join(h.split()) for h in hyps], [[" ".join(r.split()) for r in refs]])
    return BleuReport(
        score=float(result.score),
        precisions=[float(p) for p in result.precisions],
        bp=float(result.bp),
        hyp_len=int(result.sys_len),
        ref_len=int(result.ref_len),
    )


def csw_split_bleu(hyps, refs, primary_flags, **kwargs):
    """
    BLEU on a code-switched test set, overall and split by role.

    Args:
        hyps, refs (list of str): outputs and references in one target language
        primary_flags (list of bool): True where that language was the
            primary language of the mixed source

    Returns:
        dict: "overall", "primary" and "secondary" BleuReport (None for an empty part)
    """
    hyps, refs, primary_flags = list(hyps), list(refs), [bool(f) for f in primary_flags]
    if len(primary_flags) != len(hyps):
        raise InputError(f"{len(primary_flags)} flags for {len(hyps)} hypotheses")

    def part(keep):
        chosen = [(h, r) for h, r, flag in zip(hyps, refs, primary_flags) if flag == keep]
        if not chosen:
            return None
        return corpus_bleu([h for h, _ in chosen], [r for _, r in chosen], **kwargs)

    return {"overall": corpus_bleu(hyps, refs, **kwargs), "primary": part(True), "secondary": part(False)}
