"""
Byte-pair-encoding subword model.

Words are split on whitespace; each word becomes a sequence of character
units and learned merges join adjacent units. The last unit of a word carries
the end-of-word marker "</w>", which is how decoding restores whitespace.
Pairs are counted without the marker, so a merge never absorbs it.

Persisted format (UTF-8 text):

    #subword-v1 merges=<M> alphabet=<A> specials=<S> vocab=<V>
    <left> <right>            (M lines, acquisition order)
    <token>\t<id>             (V lines, id order)
"""

import logging
from collections import Counter

from errors import ConfigError, InputError
from utils import atomic_write_text, read_lines

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
BASE_SPECIALS = (PAD, BOS, EOS, UNK)
END_OF_WORD = "</w>"
UNK_FINAL = UNK + END_OF_WORD
HEADER = "#subword-v1"


class SubwordModel:
    """
    Merge table plus vocabulary.

    Specials occupy the lowest ids: PAD, BOS, EOS, UNK, then the tag tokens
    (target-language or variant tags). The word-final unknown "<unk></w>"
    comes next, then the learned tokens: every unit in its word-internal form
    and its word-final form ("unit</w>").
    """

    def __init__(self, merges, alphabet, tags=()):
        self.merges = [tuple(pair) for pair in merges]
        self.alphabet = list(alphabet)
        self.tags = list(tags)

        specials = list(BASE_SPECIALS) + self.tags
        if len(set(specials)) != len(specials):
            raise ConfigError(f"Duplicate special symbols: {specials}")
        for tag in self.tags:
            if not tag or any(ch.isspace() for ch in tag):
                raise ConfigError(f"Tag {tag!r} must be a non-empty token without whitespace")

        units = list(self.alphabet) + [left + right for left, right in self.merges]
        self.id_to_token = list(specials)
        self.vocab = {token: index for index, token in enumerate(specials)}
        self.vocab[UNK_FINAL] = len(self.id_to_token)
        self.id_to_token.append(UNK_FINAL)
        for unit in units:
            for token in (unit, unit + END_OF_WORD):
                if token in self.vocab:
                    if token in specials or token == UNK_FINAL:
                        raise ConfigError(f"Learned token {token!r} collides with a special symbol")
                    continue
                self.vocab[token] = len(self.id_to_token)
                self.id_to_token.append(token)

        self._alphabet_set = set(self.alphabet)
        self._ranks = {pair: rank for rank, pair in enumerate(self.merges)}
        self._cache = {}

    # ----- vocabulary -----

    @property
    def num_specials(self):
        return len(BASE_SPECIALS) + len(self.tags)

    @property
    def specials(self):
        return self.id_to_token[:self.num_specials]

    def __len__(self):
        return len(self.id_to_token)

    def tag_id(self, tag):
        """Id of a tag token; ConfigError when the tag is not declared."""
        if tag not in self.tags:
            raise ConfigError(f"Tag {tag!r} is not declared in this subword model (tags: {self.tags})")
        return self.vocab[tag]

    # ----- encoding -----

    def segment_word(self, word):
        """
        Split one word into subword tokens.

        Args:
            word (str): A whitespace-free word

        Returns:
            list: Token strings; the last carries the end-of-word marker
        """
        cached = self._cache.get(word)
        if cached is not None:
            return list(cached)

        units = [ch if ch in self._alphabet_set else UNK for ch in word]
        while len(units) > 1:
            ranked = [
                (self._ranks[pair], i)
                for i, pair in enumerate(zip(units, units[1:]))
                if pair in self._ranks
            ]
            if not ranked:
                break
            best_pair = self.merges[min(ranked)[0]]
            merged, i = [], 0
            while i < len(units):
                if i + 1 < len(units) and (units[i], units[i + 1]) == best_pair:
                    merged.append(units[i] + units[i + 1])
                    i += 2
                else:
                    merged.append(units[i])
                    i += 1
            units = merged

        if units:
            units[-1] = units[-1] + END_OF_WORD
        self._cache[word] = tuple(units)
        return units

    def tokenize(self, sentence):
        tokens = []
        for word in sentence.split():
            if word in self.vocab and self.vocab[word] < self.num_specials:
                tokens.append(word)
            else:
                tokens.extend(self.segment_word(word))
        return tokens

    def encode(self, sentence):
        """
        Encode a sentence into token ids.

        Special symbols written as whole words (e.g. a tag) map to their ids;
        characters outside the training alphabet map to UNK.
        """
        return [self.vocab.get(token, UNK_ID) for token in self.tokenize(sentence)]

    def decode(self, ids):
        """
        Decode token ids back into a whitespace-joined sentence.

        PAD, BOS and EOS are dropped; tags are kept as words.

        Raises:
            InputError: an id outside the vocabulary
        """
        words, current = [], ""
        for index in ids:
            index = int(index)
            if index < 0 or index >= len(self.id_to_token):
                raise InputError(f"Token id {index} outside vocabulary of {len(self.id_to_token)}")
            if index in (PAD_ID, BOS_ID, EOS_ID):
                continue
            token = self.id_to_token[index]
            if index >= len(BASE_SPECIALS) and index < self.num_specials:
                if current:
                    words.append(current)
                    current = ""
                words.append(token)
            elif token.endswith(END_OF_WORD):
                words.append(current + token[:-len(END_OF_WORD)])
                current = ""
            else:
                current += token
        if current:
            words.append(current)
        return " ".join(words)

    # ----- persistence -----

    def save(self, path):
        lines = [
            f"{HEADER} merges={len(self.merges)} alphabet={len(self.alphabet)} "
            f"specials={self.num_specials} vocab={len(self.id_to_token)}"
        ]
        lines.extend(f"{left} {right}" for left, right in self.merges)
        lines.extend(f"{token}\t{index}" for index, token in enumerate(self.id_to_token))
        atomic_write_text(path, "\n".join(lines) + "\n")
        logger.info(f"Subword model saved to {path} ({len(self.merges)} merges, {len(self)} tokens)")

    @classmethod
    def load(cls, path):
        lines = read_lines(path, allow_empty=True)
        if not lines or not lines[0].startswith(HEADER):
            raise InputError(f"{path}: not a subword model file")
        try:
            counts = dict(field.split("=") for field in lines[0].split()[1:])
            n_merges, n_alpha = int(counts["merges"]), int(counts["alphabet"])
            n_specials, n_vocab = int(counts["specials"]), int(counts["vocab"])
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}: malformed header {lines[0]!r}") from exc
        if len(lines) < 1 + n_merges + n_vocab:
            raise InputError(f"{path}: truncated subword model")

        merges = [tuple(line.split(" ")) for line in lines[1:1 + n_merges]]
        entries = [line.split("\t") for line in lines[1 + n_merges:1 + n_merges + n_vocab]]
        tokens = [token for token, _ in entries]
        tags = tokens[len(BASE_SPECIALS):n_specials]
        learned = [token for token in tokens[n_specials:] if not token.endswith(END_OF_WORD)]
        model = cls(merges, learned[:n_alpha], tags=tags)
        if model.id_to_token != tokens:
            raise InputError(f"{path}: vocabulary does not match merge table")
        return model


def bpe_train(corpus, num_merges, tags=()):
    """
    Learn merge operations from a corpus.

    The most frequent adjacent pair is merged at each step; ties go to the
    lexicographically smallest pair, so builds are deterministic.

    Args:
        corpus (iterable of str): Sentences
        num_merges (int): Upper bound on the number of merges
        tags (iterable of str): Tag tokens reserved as specials

    Returns:
        SubwordModel: Trained model

    Raises:
        InputError: empty corpus or negative merge count
    """
    if num_merges < 0:
        raise InputError(f"num_merges must be >= 0, got {num_merges}")
    reserved = set(BASE_SPECIALS) | set(tags)
    word_counts = Counter(
        word for sentence in corpus for word in sentence.split() if word not in reserved
    )
    if not word_counts:
        raise InputError("Cannot train a subword model on an empty corpus")

    words = {tuple(word): count for word, count in word_counts.items()}
    alphabet = sorted({ch for word in words for ch in word})
    merges = []

    for _ in range(num_merges):
        pair_counts = Counter()
        for symbols, count in words.items():
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += count
        if not pair_counts:
            break
        best, _ = min(pair_counts.items(), key=lambda item: (-item[1], item[0]))
        merges.append(best)
        joined = best[0] + best[1]
        updated = {}
        for symbols, count in words.items():
            merged, i = [], 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == best:
                    merged.append(joined)
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            key = tuple(merged)
            updated[key] = updated.get(key, 0) + count
        words = updated

    logger.info(f"Learned {len(merges)} merges over {len(alphabet)} characters from {sum(word_counts.values())} words")
    return SubwordModel(merges, alphabet, tags=tags)
