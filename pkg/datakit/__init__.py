"""
Corpus construction: trilingual intersection, pseudo and bi-directional
data, variant triples, word alignment and code-switched synthesis.
"""

from datakit.corpus import (
    Bitext, TriSample, intersect_trilingual, load_trilingual, read_tri_tsv,
    reverse_sentence, write_tri_tsv,
)
from datakit.pseudo import BIDI_MODES, make_bidi_corpus, make_pseudo_trilingual
from datakit.variants import make_variant_triples
from datakit.alignment import (
    HEURISTICS, align_corpus, ibm1_align, read_pharaoh, symmetrize, write_pharaoh,
)
from datakit.phrases import PhrasePair, extract_phrase_pairs, is_consistent
from datakit.csw import CswSample, make_csw_corpus, replacement_weights, sample_replacement_count
