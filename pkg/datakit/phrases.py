"""
Consistent phrase pairs from a word alignment.
"""

import logging
from dataclasses import dataclass

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class PhrasePair:
    """Inclusive source span [i1, i2] paired with inclusive target span [j1, j2]."""
    i1: int
    i2: int
    j1: int
    j2: int

    @property
    def src_span(self):
        return range(self.i1, self.i2 + 1)

    @property
    def tgt_span(self):
        return range(self.j1, self.j2 + 1)

    def overlaps(self, other):
        return (self.i1 <= other.i2 and other.i1 <= self.i2) or (self.j1 <= other.j2 and other.j1 <= self.j2)


def is_consistent(links, pair):
    """
    Consistency predicate, checked directly from its definition.

    The pair needs at least one link inside it; every link touching either
    span must land inside the other span; the four boundary words must be
    aligned.
    """
    links = set(links)
    if pair.i1 > pair.i2 or pair.j1 > pair.j2 or pair.i1 < 0 or pair.j1 < 0:
        return False
    inside = False
    for i, j in links:
        in_src = pair.i1 <= i <= pair.i2
        in_tgt = pair.j1 <= j <= pair.j2
        if in_src != in_tgt:
            return False
        inside = inside or in_src
    if not inside:
        return False
    src_aligned = {i for i, _ in links}
    tgt_aligned = {j for _, j in links}
    return {pair.i1, pair.i2} <= src_aligned and {pair.j1, pair.j2} <= tgt_aligned


def extract_phrase_pairs(links, src_len, tgt_len, max_len):
    """
    All consistent phrase pairs whose spans are at most max_len words.

    Args:
        links (set): (i, j) alignment links
        src_len (int): source length
        tgt_len (int): target length
        max_len (int): longest span, in words, on either side

    Returns:
        list: sorted PhrasePair objects
    """
    links = set(links)
    by_src = {}
    for i, j in links:
        by_src.setdefault(i, []).append(j)

    pairs = []
    for i1 in range(src_len):
        for i2 in range(i1, min(src_len, i1 + max_len)):
            targets = [j for i in range(i1, i2 + 1) for j in by_src.get(i, ())]
            if not targets:
                continue
            j1, j2 = min(targets), max(targets)
            if j2 - j1 + 1 > max_len or j2 >= tgt_len:
                continue
            candidate = PhrasePair(i1, i2, j1, j2)
            if is_consistent(links, candidate):
                pairs.append(candidate)
    return sorted(pairs)
