"""Sentence corpus handling: loading, tokenization, vocabulary, splits.

A corpus is a plain-text UTF-8 file with one sentence per line. Sentences
are kept only if their token count falls inside configurable bounds
(default 4..30 words, counted after punctuation stripping).
"""

from dataclasses import dataclass, field

import numpy as np

PAD_ID = 0
UNK_ID = 1
EOS_ID = 2

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
EOS_TOKEN = "<eos>"

# Punctuation stripped from token edges (not interior, so "it's" survives).
_STRIP_CHARS = '.,;:!?"()'


@dataclass(frozen=True)
class Sentence:
    """One corpus line: raw text plus its normalized token sequence."""

    raw: str
    tokens: tuple
    line_index: int = -1

    def __len__(self):
        return len(self.tokens)


def tokenize(line: str) -> list:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties."""
    out = []
    for tok in line.lower().split():
        tok = tok.strip(_STRIP_CHARS)
        if tok:
            out.append(tok)
    return out


def detokenize(tokens) -> str:
    return " ".join(tokens)


def load_corpus(path, min_words: int = 4, max_words: int = 30):
    """Read one-sentence-per-line text, keeping sentences inside the length bounds.

    Returns (sentences, n_dropped). Raises ValueError if nothing is retained.
    Each Sentence remembers its 0-based line index in the source file so
    splits can be reproduced exactly from an index manifest.
    """
    if min_words < 1 or max_words < min_words:
        raise ValueError(f"bad length bounds ({min_words}, {max_words})")
    sentences = []
    n_dropped = 0
    with open(path, encoding="utf-8") as fh:
        for idx, line in enumerate(fh):
            toks = tokenize(line)
            if min_words <= len(toks) <= max_words:
                sentences.append(Sentence(line.rstrip("\n"), tuple(toks), idx))
            else:
                n_dropped += 1
    if not sentences:
        raise ValueError(f"no sentences within bounds in {path}")
    return sentences, n_dropped


@dataclass
class CorpusSplit:
    train: list
    test: list
    seed: int


def split_corpus(sentences, n_train: int, n_test: int, seed: int) -> CorpusSplit:
    """Deterministic seeded shuffle, then first n_train / next n_test sentences."""
    if n_train + n_test > len(sentences):
        raise ValueError(
            f"requested {n_train}+{n_test} sentences but corpus has {len(sentences)}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(sentences))
    train = [sentences[i] for i in order[:n_train]]
    test = [sentences[i] for i in order[n_train : n_train + n_test]]
    return CorpusSplit(train=train, test=test, seed=seed)


@dataclass
class Vocab:
    """Token<->id bijection with reserved PAD/UNK/EOS ids and frequency counts."""

    id_to_token: list
    counts: dict
    token_to_id: dict = field(init=False)

    def __post_init__(self):
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        assert len(self.token_to_id) == len(self.id_to_token), "duplicate tokens"

    def __len__(self):
        return len(self.id_to_token)

    def ids(self, tokens) -> list:
        return [self.token_to_id.get(t, UNK_ID) for t in tokens]

    def tokens(self, ids) -> list:
        return [self.id_to_token[i] for i in ids]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.id_to_token:
                fh.write(f"{tok}\t{self.counts.get(tok, 0)}\n")

    @classmethod
    def load(cls, path):
        id_to_token, counts = [], {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                tok, cnt = line.rstrip("\n").split("\t")
                id_to_token.append(tok)
                counts[tok] = int(cnt)
        return cls(id_to_token=id_to_token, counts=counts)


def build_vocab(train, max_size: int = 20000) -> Vocab:
    """Keep the most frequent tokens up to max_size - 3 (ties lexicographic)."""
    if max_size < 4:
        raise ValueError("max_size must leave room for PAD/UNK/EOS")
    freq = {}
    for sent in train:
        for tok in sent.tokens:
            freq[tok] = freq.get(tok, 0) + 1
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, _ in ranked[: max_size - 3]]
    id_to_token = [PAD_TOKEN, UNK_TOKEN, EOS_TOKEN] + kept
    return Vocab(id_to_token=id_to_token, counts=freq)


def save_split_manifest(split: CorpusSplit, train_path, test_path):
    """Write line-index manifests sufficient to rebuild the split exactly."""
    for part, path in ((split.train, train_path), (split.test, test_path)):
        with open(path, "w", encoding="utf-8") as fh:
            for sent in part:
                fh.write(f"{sent.line_index}\n")


def load_split_from_manifest(sentences, train_path, test_path, seed: int = -1) -> CorpusSplit:
    by_line = {s.line_index: s for s in sentences}

    def read(path):
        with open(path, encoding="utf-8") as fh:
            return [by_line[int(line)] for line in fh if line.strip()]

    return CorpusSplit(train=read(train_path), test=read(test_path), seed=seed)
