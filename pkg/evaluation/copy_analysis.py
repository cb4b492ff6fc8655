"""
Copy-constraint analysis for code-switched translation.

Every token of a mixed source should reappear in at least one of the two
outputs. Each source token occurrence is classified as:

    lost       matched in neither output
    punct      punctuation or digits, matched in both outputs
    both       matched in both outputs
    exclusive  matched in exactly one output

Matching is per token type with clipped counts: a type occurring n times in
the source and c1, c2 times in the outputs covers m = min(n, c1 + c2)
occurrences, and as many of those as possible are matched in both.
"""

import logging
import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass

from errors import InputError

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

CATEGORIES = ("exclusive", "both", "punct", "lost")


def is_punct_or_digit(token):
    return bool(token) and all(unicodedata.category(ch)[0] in ("P", "N") for ch in token)


@dataclass
class CopyReport:
    """Category percentages over source token occurrences (they sum to 100)."""
    exclusive: float
    both: float
    punct: float
    lost: float
    total: int

    def to_dict(self):
        return asdict(self)


def allocate(n, c1, c2):
    """
    Split n source occurrences of one type given c1 and c2 output occurrences.

    Returns:
        tuple: (exclusive, both, lost) occurrence counts
    """
    covered = min(n, c1 + c2)
    both = min(c1, c2, covered, c1 + c2 - covered)
    return covered - both, both, n - covered


def count_categories(src_tokens, hyp1_tokens, hyp2_tokens):
    """Occurrence counts per category for one sentence."""
    counts = Counter({name: 0 for name in CATEGORIES})
    first, second = Counter(hyp1_tokens), Counter(hyp2_tokens)
    for token, n in Counter(src_tokens).items():
        exclusive, both, lost = allocate(n, first[token], second[token])
        counts["exclusive"] += exclusive
        counts["lost"] += lost
        counts["punct" if is_punct_or_digit(token) else "both"] += both
    return counts


def _report(counts):
    total = sum(counts[name] for name in CATEGORIES)
    if total == 0:
        raise InputError("Copy analysis needs a non-empty source")
    return CopyReport(**{name: 100.0 * counts[name] / total for name in CATEGORIES}, total=total)


def copy_constraint_report(src_tokens, hyp1_tokens, hyp2_tokens):
    """
    Classify the source tokens of one sentence.

    Args:
        src_tokens (list of str): mixed source tokens
        hyp1_tokens, hyp2_tokens (list of str): output tokens

    Returns:
        CopyReport: percentages

    Raises:
        InputError: empty source
    """
    return _report(count_categories(src_tokens, hyp1_tokens, hyp2_tokens))


def corpus_copy_report(sources, hyps1, hyps2):
    """Pooled report over a test set of whitespace-tokenized sentences."""
    sources, hyps1, hyps2 = list(sources), list(hyps1), list(hyps2)
    if not len(sources) == len(hyps1) == len(hyps2):
        raise InputError(f"Line counts differ: {len(sources)}, {len(hyps1)}, {len(hyps2)}")
    counts = Counter()
    for src, h1, h2 in zip(sources, hyps1, hyps2):
        counts.update(count_categories(src.split(), h1.split(), h2.split()))
    return _report(counts)
