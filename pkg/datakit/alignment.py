"""
Word alignment: IBM Model 1 trained with EM, Viterbi links, and
symmetrization of two directional alignments.

Alignments are sets of (i, j) links, i a source position and j a target
position, both 0-based. On disk they use the Pharaoh format: one line per
sentence pair, space-separated "i-j" tokens.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from errors import InputError
from utils import read_lines, write_lines

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

NULL = "<null>"
HEURISTICS = ("intersection", "union", "grow-diag", "grow-diag-final", "grow-diag-final-and")

# grow-diag neighbourhood: horizontal/vertical first, then diagonals
NEIGHBOURS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass
class Model1Result:
    """
    Output of IBM Model 1 training.

    Attributes:
        src_vocab (list): source words; index 0 is the NULL word
        tgt_vocab (list): target words
        table (numpy.ndarray): t[e, f] = P(f | e), shape (|src_vocab|, |tgt_vocab|)
        alignments (list): Viterbi link set per sentence pair
        log_likelihoods (list): corpus log-likelihood before each EM update
    """
    src_vocab: list
    tgt_vocab: list
    table: np.ndarray
    alignments: list = field(default_factory=list)
    log_likelihoods: list = field(default_factory=list)

    def prob(self, tgt_word, src_word):
        """P(tgt_word | src_word); 0 for unseen words."""
        try:
            e = self.src_vocab.index(src_word)
            f = self.tgt_vocab.index(tgt_word)
        except ValueError:
            return 0.0
        return float(self.table[e, f])


def ibm1_align(pairs, iterations=5):
    """
    Train IBM Model 1 on tokenized sentence pairs and align them.

    Each target word is generated by one source word or by NULL. Viterbi
    alignment links every target word to its most probable source word; the
    NULL word wins only when strictly more probable, and NULL links are not
    reported.

    Args:
        pairs (list): (src_tokens, tgt_tokens) pairs
        iterations (int): EM iterations, at least 1

    Returns:
        Model1Result: translation table, alignments and EM trace
    """
    if iterations < 1:
        raise InputError(f"iterations must be >= 1, got {iterations}")
    if not pairs:
        raise InputError("Cannot align an empty corpus")

    src_vocab = [NULL] + sorted({w for src, _ in pairs for w in src})
    tgt_vocab = sorted({w for _, tgt in pairs for w in tgt})
    src_index = {w: i for i, w in enumerate(src_vocab)}
    tgt_index = {w: i for i, w in enumerate(tgt_vocab)}
    encoded = []
    for number, (src, tgt) in enumerate(pairs, start=1):
        if not src or not tgt:
            raise InputError(f"Sentence pair {number} has an empty side")
        encoded.append((
            np.array([0] + [src_index[w] for w in src], dtype=np.int64),
            np.array([tgt_index[w] for w in tgt], dtype=np.int64),
        ))

    # uniform start
    table = np.full((len(src_vocab), len(tgt_vocab)), 1.0 / len(tgt_vocab))
    log_likelihoods = []

    for iteration in range(iterations):
        counts = np.zeros_like(table)
        log_likelihood = 0.0
        for e_ids, f_ids in encoded:
            sub = table[np.ix_(e_ids, f_ids)]
            totals = sub.sum(axis=0)
            log_likelihood += float(np.log(totals / len(e_ids)).sum())
            np.add.at(counts, (e_ids[:, None], f_ids[None, :]), sub / totals)
        log_likelihoods.append(log_likelihood)
        row_totals = counts.sum(axis=1, keepdims=True)
        table = np.divide(counts, row_totals, out=np.zeros_like(counts), where=row_totals > 0)
        logger.debug(f"IBM1 iteration {iteration + 1}: log-likelihood {log_likelihood:.4f}")

    alignments = []
    for e_ids, f_ids in encoded:
        links = set()
        for j, f in enumerate(f_ids):
            scores = table[e_ids[1:], f]
            best = int(np.argmax(scores))
            if table[0, f] > scores[best]:
                continue
            links.add((best, j))
        alignments.append(links)

    logger.info(f"IBM Model 1: {len(pairs)} pairs, {iterations} iterations, "
                f"final log-likelihood {log_likelihoods[-1]:.4f}")
    return Model1Result(src_vocab, tgt_vocab, table, alignments, log_likelihoods)


def _check_links(links, src_len, tgt_len, what):
    for i, j in links:
        if not (0 <= i < src_len and 0 <= j < tgt_len):
            raise InputError(f"{what} link {i}-{j} outside a {src_len}x{tgt_len} sentence pair")


def symmetrize(fwd, bwd, src_len, tgt_len, heuristic="grow-diag-final-and"):
    """
    Combine two directional alignments of one sentence pair.

    Both alignments are given in (source, target) coordinates.

    Args:
        fwd (set): source-to-target links
        bwd (set): target-to-source links, already flipped to (i, j)
        src_len (int): source length
        tgt_len (int): target length
        heuristic (str): one of HEURISTICS

    Returns:
        set: symmetrized links

    Raises:
        InputError: unknown heuristic, or a link outside the sentence pair
    """
    if heuristic not in HEURISTICS:
        raise InputError(f"Unknown symmetrization heuristic {heuristic!r}, expected one of {HEURISTICS}")
    fwd, bwd = set(fwd), set(bwd)
    _check_links(fwd, src_len, tgt_len, "Forward")
    _check_links(bwd, src_len, tgt_len, "Backward")

    union = fwd | bwd
    if heuristic == "intersection":
        return fwd & bwd
    if heuristic == "union":
        return union

    links = fwd & bwd
    src_aligned = {i for i, _ in links}
    tgt_aligned = {j for _, j in links}

    def add(i, j):
        links.add((i, j))
        src_aligned.add(i)
        tgt_aligned.add(j)

    # grow-diag
    grown = True
    while grown:
        grown = False
        for i in range(src_len):
            for j in range(tgt_len):
                if (i, j) not in links:
                    continue
                for di, dj in NEIGHBOURS:
                    ni, nj = i + di, j + dj
                    if (ni, nj) in links or (ni, nj) not in union:
                        continue
                    if ni not in src_aligned or nj not in tgt_aligned:
                        add(ni, nj)
                        grown = True

    if heuristic == "grow-diag":
        return links

    both_unaligned = heuristic == "grow-diag-final-and"
    for directional in (fwd, bwd):
        for i in range(src_len):
            for j in range(tgt_len):
                if (i, j) not in directional or (i, j) in links:
                    continue
                if both_unaligned:
                    admissible = i not in src_aligned and j not in tgt_aligned
                else:
                    admissible = i not in src_aligned or j not in tgt_aligned
                if admissible:
                    add(i, j)
    return links


def align_corpus(pairs, iterations=5, heuristic="grow-diag-final-and"):
    """
    Align a tokenized corpus in both directions and symmetrize.

    Returns:
        list: one link set per sentence pair
    """
    forward = ibm1_align(pairs, iterations)
    backward = ibm1_align([(tgt, src) for src, tgt in pairs], iterations)
    result = []
    for (src, tgt), fwd, bwd in zip(pairs, forward.alignments, backward.alignments):
        flipped = {(i, j) for j, i in bwd}
        result.append(symmetrize(fwd, flipped, len(src), len(tgt), heuristic))
    logger.info(f"Symmetrized {len(result)} alignments with {heuristic}")
    return result


# ----- Pharaoh format -----

def format_pharaoh(links):
    return " ".join(f"{i}-{j}" for i, j in sorted(links))


def parse_pharaoh(line):
    links = set()
    for token in line.split():
        left, sep, right = token.partition("-")
        if not sep or not left.isdigit() or not right.isdigit():
            raise InputError(f"Malformed alignment link {token!r}")
        links.add((int(left), int(right)))
    return links


def write_pharaoh(path, alignments):
    write_lines(path, (format_pharaoh(links) for links in alignments))


def read_pharaoh(path):
    return [parse_pharaoh(line) for line in read_lines(path, allow_empty=True)]
