"""Shared fixtures: a deterministic corpus and trained models.

Training artifacts are cached under build/test-cache keyed by a hash of
everything that determines them, so repeated pytest runs skip the slow
training; delete the directory to force a cold rebuild.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

import textgen
from semlink import codec, corpus, fec, huffman, modulation

CACHE_DIR = Path(__file__).resolve().parent.parent / "build" / "test-cache"

# Desk-scale experiment sizing shared by unit and acceptance tests.
CORPUS_SEED = 0
CORPUS_SIZE = 7400
N_TRAIN = 5000
N_TEST = 2400
SPLIT_SEED = 7
LDPC_SEED = 5

CODEC_TRAIN = dict(epochs=90, seed=11, lr=3e-3, batch_size=128,
                   flip_prob_range=(0.0, 0.15), keep_prob=0.7)
CODEC_MOD_TRAIN = dict(epochs=90, seed=12, lr=3e-3, batch_size=128,
                       flip_prob_range=(0.0, 0.15), keep_prob=0.7)
CONSTELLATION_TRAIN = dict(snr_train_db=8.0, epochs=16, batch_size=64,
                           lr=2e-3, seed=13, joint=True)


def _cache_path(name: str, key: dict, suffix: str) -> Path:
    CACHE_DIR.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(
        json.dumps(key, sort_keys=True, default=str).encode()).hexdigest()[:16]
    return CACHE_DIR / f"{name}-{digest}{suffix}"


@pytest.fixture(scope="session")
def corpus_file():
    path = _cache_path("corpus", {"seed": CORPUS_SEED, "n": CORPUS_SIZE}, ".txt")
    if not path.exists():
        textgen.write_corpus(path, CORPUS_SIZE, CORPUS_SEED)
    return path


@pytest.fixture(scope="session")
def split(corpus_file):
    sentences, _ = corpus.load_corpus(corpus_file, 4, 30)
    return corpus.split_corpus(sentences, N_TRAIN, N_TEST, SPLIT_SEED)


@pytest.fixture(scope="session")
def vocab(split):
    return corpus.build_vocab(split.train, 20000)


@pytest.fixture(scope="session")
def huffman_table(split):
    freqs = huffman.char_frequencies(
        corpus.detokenize(s.tokens) for s in split.train)
    return huffman.build_table(freqs)


@pytest.fixture(scope="session")
def ldpc_code():
    path = _cache_path("ldpc", {"seed": LDPC_SEED, "n": 1472, "k": 460}, ".txt")
    if path.exists():
        return fec.LdpcCode.load(path)
    code = fec.construct_code(LDPC_SEED)
    code.save(path)
    return code


def _train_cached(name, key, trainer):
    path = _cache_path(name, key, ".json")
    if path.exists():
        return codec.SemanticModel.load(path)
    model = trainer()
    model.save(path)
    return model


@pytest.fixture(scope="session")
def trained_codec(split, vocab):
    """The B=960 six-block codec used by the HARQ experiments."""
    key = {"corpus": CORPUS_SEED, "train": CODEC_TRAIN, "bits": 960, "v": 1}

    def train():
        config = codec.CodecConfig(vocab_size=len(vocab))
        model, _ = codec.train_codec(split, vocab, config, **CODEC_TRAIN)
        return model

    return _train_cached("codec960", key, train)


@pytest.fixture(scope="session")
def trained_codec_mod(split, vocab):
    """The B=320 single-block codec used by the modulation experiment."""
    key = {"corpus": CORPUS_SEED, "train": CODEC_MOD_TRAIN, "bits": 320, "v": 1}

    def train():
        config = codec.CodecConfig(vocab_size=len(vocab), total_bits=320,
                                   n_blocks=1)
        model, _ = codec.train_codec(split, vocab, config, **CODEC_MOD_TRAIN)
        return model

    return _train_cached("codec320", key, train)


@pytest.fixture(scope="session")
def trained_constellation(split, trained_codec_mod):
    """(constellation, adapted model) from end-to-end mapper training."""
    key = {"corpus": CORPUS_SEED, "train": CONSTELLATION_TRAIN,
           "codec": CODEC_MOD_TRAIN, "v": 1}
    cpath = _cache_path("constellation", key, ".json")
    mpath = _cache_path("codec320-adapted", key, ".json")
    if cpath.exists() and mpath.exists():
        return modulation.Constellation.load(cpath), codec.SemanticModel.load(mpath)
    model = trained_codec_mod.clone()
    constellation, adapted, _, history = modulation.train_constellation(
        model, split.train, **CONSTELLATION_TRAIN)
    assert history[-1][1] < history[0][1], "constellation training did not learn"
    constellation.save(cpath)
    adapted.save(mpath)
    return constellation, adapted


@pytest.fixture(scope="session")
def mini_codec():
    """Small overfit codec for fast protocol-level unit tests."""
    lines = textgen.generate_sentences(40, 21)
    sents = [corpus.Sentence(l, tuple(corpus.tokenize(l)), i)
             for i, l in enumerate(lines)]
    vocab_small = corpus.build_vocab(sents, 20000)
    key = {"n": 40, "seed": 21, "v": 2}

    def train():
        config = codec.CodecConfig(vocab_size=len(vocab_small), embed_dim=16,
                                   hidden_dim=96, total_bits=240, n_blocks=6)
        split_small = corpus.CorpusSplit(train=sents, test=[], seed=0)
        model, _ = codec.train_codec(split_small, vocab_small, config,
                                     epochs=260, seed=3,
                                     flip_prob_range=(0.0, 0.05),
                                     keep_prob=0.85, lr=3e-3, batch_size=20,
                                     val_fraction=0.0)
        return model

    model = _train_cached("mini-codec", key, train)
    return model, sents
