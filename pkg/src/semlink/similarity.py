"""Sentence-similarity metrics in [0, 1] for acceptance decisions and reports.

Two interchangeable metrics over token sequences: word-level edit similarity
(the default acceptance metric) and cosine similarity of mean token
embeddings taken from a trained codec. Identical sentences score exactly 1
under both. Every reported similarity is labeled with its metric name,
since absolute thresholds do not transfer between metrics.
"""

import numpy as np

METRIC_EDIT = "word-edit"
METRIC_EMBED = "embedding-cosine"


def word_levenshtein(a, b) -> int:
    """Edit distance over tokens (insert/delete/substitute, unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a):
        cur = [i + 1]
        for j, tok_b in enumerate(b):
            cur.append(min(prev[j + 1] + 1, cur[j] + 1, prev[j] + (tok_a != tok_b)))
        prev = cur
    return prev[-1]


def sim_edit(a, b) -> float:
    """1 - normalized word edit distance; two empty sentences score 1."""
    if not a and not b:
        return 1.0
    return 1.0 - word_levenshtein(a, b) / max(len(a), len(b))


def sim_embed(a, b, vocab, embeddings: np.ndarray) -> float:
    """Cosine of mean token embeddings rescaled from [-1, 1] to [0, 1].

    Exactly 1 for identical token sequences. Falls back to sim_edit when a
    mean vector has zero norm (empty sentence or degenerate embeddings).
    """
    if list(a) == list(b):
        return 1.0

    def mean_vec(tokens):
        if not tokens:
            return np.zeros(embeddings.shape[1])
        ids = vocab.ids(tokens)
        return embeddings[ids].mean(axis=0)

    va, vb = mean_vec(a), mean_vec(b)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return sim_edit(a, b)
    cos = float(np.dot(va, vb) / (na * nb))
    return (np.clip(cos, -1.0, 1.0) + 1.0) / 2.0


def accept(score: float, threshold: float) -> bool:
    """Strictly greater than, per the acceptance rule 'larger than'."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    return score > threshold
