"""
Parallel corpora: bitexts, trilingual samples and their file formats.

Bitexts are two line-aligned plain-text files. Trilingual corpora are either
three line-aligned files or one tab-separated file with the columns
src, tgt1, tgt2.
"""

import csv
import logging
from dataclasses import dataclass, field

import pandas as pd

from errors import InputError
from utils import read_lines, require_files, write_lines

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

TRI_COLUMNS = ["src", "tgt1", "tgt2"]


@dataclass
class TriSample:
    """
    One source with two targets.

    Sequences are whitespace-tokenized sentences in the corpus tools and
    lists of token ids once encoded for training.

    Attributes:
        src: source sequence
        tgt1: first target sequence
        tgt2: second target sequence
        weight (float): sample weight in the loss
        meta (dict): provenance, e.g. {"synthetic": 1} when tgt1 is machine output
    """
    src: object
    tgt1: object
    tgt2: object
    weight: float = 1.0
    meta: dict = field(default_factory=dict)

    def swapped(self):
        return TriSample(self.src, self.tgt2, self.tgt1, self.weight, dict(self.meta))


@dataclass
class Bitext:
    """Line-aligned sentence pairs; counts must match and no line may be empty."""
    src: list
    tgt: list

    def __post_init__(self):
        self.src, self.tgt = list(self.src), list(self.tgt)
        if len(self.src) != len(self.tgt):
            raise InputError(f"Bitext sides differ in length: {len(self.src)} vs {len(self.tgt)}")
        for number, (s, t) in enumerate(zip(self.src, self.tgt), start=1):
            if not s.strip() or not t.strip():
                raise InputError(f"Bitext line {number} is empty")

    def __len__(self):
        return len(self.src)

    def pairs(self):
        return list(zip(self.src, self.tgt))

    def token_pairs(self):
        return [(s.split(), t.split()) for s, t in zip(self.src, self.tgt)]

    @classmethod
    def from_files(cls, src_path, tgt_path):
        bitext = cls(read_lines(src_path), read_lines(tgt_path))
        logger.info(f"Loaded bitext of {len(bitext)} pairs from {src_path} / {tgt_path}")
        return bitext

    def save(self, src_path, tgt_path):
        write_lines(src_path, self.src)
        write_lines(tgt_path, self.tgt)


def intersect_trilingual(bitext_a, bitext_b):
    """
    Build a trilingual corpus from two bitexts sharing their source language.

    A source sentence is kept when it occurs in both bitexts; for repeated
    sources the first occurrence in each bitext wins.

    Args:
        bitext_a (Bitext): source to target-1
        bitext_b (Bitext): source to target-2

    Returns:
        list: TriSample objects in the order of bitext_a
    """
    second = {}
    for src, tgt in bitext_b.pairs():
        second.setdefault(src, tgt)

    samples, seen = [], set()
    for src, tgt in bitext_a.pairs():
        if src in seen or src not in second:
            continue
        seen.add(src)
        samples.append(TriSample(src, tgt, second[src]))

    logger.info(f"Trilingual intersection: {len(samples)} shared sources "
                f"(|a|={len(bitext_a)}, |b|={len(bitext_b)})")
    return samples


# ----- trilingual files -----

def _check_fields(samples):
    for number, sample in enumerate(samples, start=1):
        for name in TRI_COLUMNS:
            value = getattr(sample, name)
            if not isinstance(value, str) or not value.strip():
                raise InputError(f"Sample {number}: {name} must be a non-empty sentence")
            if "\t" in value or "\n" in value:
                raise InputError(f"Sample {number}: {name} contains a tab or newline")


def write_tri_tsv(samples, path):
    """Write samples as one src<TAB>tgt1<TAB>tgt2 line each."""
    _check_fields(samples)
    write_lines(path, ("\t".join((s.src, s.tgt1, s.tgt2)) for s in samples))
    logger.info(f"Wrote {len(samples)} trilingual samples to {path}")


def read_tri_tsv(path):
    """
    Read a tab-separated trilingual corpus.

    Raises:
        InputError: missing file, wrong column count or empty fields
    """
    require_files([path])
    try:
        frame = pd.read_csv(path, sep="\t", header=None, names=TRI_COLUMNS, dtype=str,
                            quoting=csv.QUOTE_NONE, keep_default_na=False, skip_blank_lines=False,
                            encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: not a three-column TSV corpus ({exc})") from exc
    if frame.isna().any().any() or (frame == "").any().any():
        raise InputError(f"{path}: every line needs three non-empty tab-separated fields")
    samples = [TriSample(row.src, row.tgt1, row.tgt2) for row in frame.itertuples(index=False)]
    logger.info(f"Loaded {len(samples)} trilingual samples from {path}")
    return samples


def write_tri_files(samples, src_path, tgt1_path, tgt2_path):
    _check_fields(samples)
    write_lines(src_path, (s.src for s in samples))
    write_lines(tgt1_path, (s.tgt1 for s in samples))
    write_lines(tgt2_path, (s.tgt2 for s in samples))


def read_tri_files(src_path, tgt1_path, tgt2_path):
    src, tgt1, tgt2 = read_lines(src_path), read_lines(tgt1_path), read_lines(tgt2_path)
    if not len(src) == len(tgt1) == len(tgt2):
        raise InputError(f"Trilingual files differ in length: {len(src)}, {len(tgt1)}, {len(tgt2)}")
    return [TriSample(s, a, b) for s, a, b in zip(src, tgt1, tgt2)]


def load_trilingual(paths):
    """Read a trilingual corpus from one TSV path or three parallel file paths."""
    if isinstance(paths, str):
        return read_tri_tsv(paths)
    paths = list(paths)
    if len(paths) == 1:
        return read_tri_tsv(paths[0])
    if len(paths) == 3:
        return read_tri_files(*paths)
    raise InputError("A trilingual corpus is one TSV file or three parallel files")


def reverse_sentence(sentence):
    """Token order reversed; used for right-to-left targets."""
    return " ".join(reversed(sentence.split()))
