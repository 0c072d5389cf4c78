"""Experiment configuration, artifacts, and the stage runners behind the CLI.

Configuration is a JSON file deep-merged over the defaults below (unknown
keys are rejected); command-line flags override file values. Every stage
writes a manifest with the fully resolved config echo, SHA-256 checksums of
its artifacts, the tool version and wall-clock times, which is enough to
re-run bit-identically. CSV numbers are printed with 17 significant digits
so reruns are byte-comparable.
"""

import copy
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, codec, fec, harq, huffman, modulation, ofdm, similarity
from .corpus import (build_vocab, detokenize, load_corpus, load_split_from_manifest,
                     save_split_manifest, split_corpus, Vocab)

DEFAULT_CONFIG = {
    "seed": 1234,
    "out_dir": "runs/default",
    "workers": 1,
    "corpus": {
        "path": "corpus.txt",
        "min_words": 4,
        "max_words": 30,
        "n_train": 100000,
        "n_test": 10000,
        "split_seed": 7,
        "vocab_size": 20000,
    },
    "codec": {
        "embed_dim": 32,
        "hidden_dim": 256,
        "total_bits": 960,
        "n_blocks": 6,
        "max_tokens": 30,
    },
    "codec_mod": {
        "embed_dim": 32,
        "hidden_dim": 256,
        "total_bits": 320,
        "n_blocks": 1,
        "max_tokens": 30,
    },
    "codec_train": {
        "epochs": 40,
        "batch_size": 128,
        "lr": 1e-3,
        "flip_low": 0.0,
        "flip_high": 0.15,
        "keep_prob": 0.7,
    },
    "constellation_train": {
        "snr_train_db": 8.0,
        "epochs": 20,
        "batch_size": 64,
        "lr": 2e-3,
        "joint": True,
    },
    "ofdm": {
        "n_subcarriers": 64,
        "n_symbols": 8,
        "cp_len": 16,
        "pilot_seed": 1001,
        "n_taps": 8,
    },
    "ldpc": {
        "n": 1472,
        "k": 460,
        "seed": 5,
        "schedule": [736, 1104, 1472],
    },
    "sweep": {
        "schemes": ["conventional", "scharq-exact", "scharq-sim0.98"],
        "snr_db": [0.0, 4.0, 8.0, 12.0, 16.0],
        "n_sentences": 2000,
        "max_rounds_conventional": 3,
        "max_rounds_scharq": 5,
        "initial_blocks": 2,
    },
    "modexp": {
        "snr_db": [4.0, 10.0, 16.0],
        "n_sentences": 2000,
    },
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown config key '{path}{key}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{path}{key}' must be a section")
            out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


def load_config(path=None, seed=None, out_dir=None, workers=None) -> dict:
    """Defaults, overridden by the JSON file, overridden by flags."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg = _merge(cfg, json.load(fh))
    if seed is not None:
        cfg["seed"] = seed
    if out_dir is not None:
        cfg["out_dir"] = out_dir
    if workers is not None:
        cfg["workers"] = workers
    if not cfg["sweep"]["snr_db"] or not cfg["modexp"]["snr_db"]:
        raise ConfigError("snr lists must be non-empty")
    return cfg


def fmt(x) -> str:
    """17 significant digits: enough for byte-stable float round trips."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row)
                     + "\n")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, stage: str, cfg: dict, artifacts, timings: dict):
    manifest = {
        "tool_version": __version__,
        "stage": stage,
        "config": cfg,
        "acceptance_oracle": "genie (compares against the true sentence)",
        "artifacts": {Path(p).name: sha256(p) for p in artifacts},
        "wallclock_sec": timings,
    }
    with open(out_dir / f"manifest_{stage}.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


@dataclass
class Paths:
    out: Path

    def __getattr__(self, name):
        names = {
            "train_idx": "train_indices.txt",
            "test_idx": "test_indices.txt",
            "vocab": "vocab.txt",
            "huffman_table": "huffman_table.txt",
            "ldpc": "ldpc.txt",
            "codec_ckpt": "codec.json",
            "codec_mod_ckpt": "codec_mod.json",
            "codec_adapted_ckpt": "codec_mod_adapted.json",
            "constellation": "constellation.json",
            "codec_epochs": "codec_epochs.csv",
            "codec_mod_epochs": "codec_mod_epochs.csv",
            "constellation_epochs": "constellation_epochs.csv",
            "sweep_csv": "sweep.csv",
            "modexp_csv": "modexp.csv",
            "scatter": "modexp_constellation.json",
        }
        if name not in names:
            raise AttributeError(name)
        return self.out / names[name]


def _require(path: Path, hint: str):
    if not path.exists():
        raise FileNotFoundError(f"missing artifact {path} ({hint})")


# ---------------- stages ----------------

def stage_prepare(cfg: dict):
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    paths = Paths(out)
    t0 = time.time()
    c = cfg["corpus"]
    sentences, dropped = load_corpus(c["path"], c["min_words"], c["max_words"])
    print(f"retained {len(sentences)} sentences, dropped {dropped}")
    split = split_corpus(sentences, c["n_train"], c["n_test"], c["split_seed"])
    save_split_manifest(split, paths.train_idx, paths.test_idx)
    vocab = build_vocab(split.train, c["vocab_size"])
    vocab.save(paths.vocab)
    freqs = huffman.char_frequencies(detokenize(s.tokens) for s in split.train)
    table = huffman.build_table(freqs)
    table.save(paths.huffman_table)
    code = fec.construct_code(cfg["ldpc"]["seed"], n=cfg["ldpc"]["n"],
                              k=cfg["ldpc"]["k"])
    code.save(paths.ldpc)
    artifacts = [paths.train_idx, paths.test_idx, paths.vocab,
                 paths.huffman_table, paths.ldpc]
    write_manifest(out, "prepare", cfg, artifacts, {"prepare": time.time() - t0})
    return split, vocab, table, code


def load_prepared(cfg: dict):
    paths = Paths(Path(cfg["out_dir"]))
    for p, hint in ((paths.train_idx, "run prepare"), (paths.vocab, "run prepare"),
                    (paths.huffman_table, "run prepare"), (paths.ldpc, "run prepare")):
        _require(p, hint)
    c = cfg["corpus"]
    sentences, _ = load_corpus(c["path"], c["min_words"], c["max_words"])
    split = load_split_from_manifest(sentences, paths.train_idx, paths.test_idx,
                                     seed=c["split_seed"])
    vocab = Vocab.load(paths.vocab)
    table = huffman.HuffmanTable.load(paths.huffman_table)
    code = fec.LdpcCode.load(paths.ldpc)
    return split, vocab, table, code


def _codec_config(section: dict, vocab_size: int) -> codec.CodecConfig:
    return codec.CodecConfig(vocab_size=vocab_size, **section)


def _train_one_codec(cfg, split, vocab, section_key, ckpt_path, epochs_path):
    tc = cfg["codec_train"]
    config = _codec_config(cfg[section_key], len(vocab))
    model, history = codec.train_codec(
        split, vocab, config, epochs=tc["epochs"], seed=cfg["seed"],
        flip_prob_range=(tc["flip_low"], tc["flip_high"]), lr=tc["lr"],
        batch_size=tc["batch_size"], keep_prob=tc["keep_prob"])
    tmp = ckpt_path.with_suffix(".tmp")
    model.save(tmp)
    tmp.replace(ckpt_path)  # keep any previous good checkpoint on failure
    write_csv(epochs_path, ["epoch", "train_loss", "val_loss"], history)
    return model


def stage_train(cfg: dict, target: str):
    out = Path(cfg["out_dir"])
    paths = Paths(out)
    split, vocab, _, _ = load_prepared(cfg)
    t0 = time.time()
    if target == "codec":
        _train_one_codec(cfg, split, vocab, "codec", paths.codec_ckpt,
                         paths.codec_epochs)
        t1 = time.time()
        _train_one_codec(cfg, split, vocab, "codec_mod", paths.codec_mod_ckpt,
                         paths.codec_mod_epochs)
        artifacts = [paths.codec_ckpt, paths.codec_epochs,
                     paths.codec_mod_ckpt, paths.codec_mod_epochs]
        timings = {"codec": t1 - t0, "codec_mod": time.time() - t1}
    elif target == "constellation":
        _require(paths.codec_mod_ckpt, "run train codec first")
        model = codec.SemanticModel.load(paths.codec_mod_ckpt).clone()
        ct = cfg["constellation_train"]
        constellation, adapted, _, history = modulation.train_constellation(
            model, split.train, snr_train_db=ct["snr_train_db"],
            epochs=ct["epochs"], batch_size=ct["batch_size"], lr=ct["lr"],
            seed=cfg["seed"], joint=ct["joint"])
        constellation.save(paths.constellation)
        adapted.save(paths.codec_adapted_ckpt)
        write_csv(paths.constellation_epochs, ["epoch", "loss"], history)
        artifacts = [paths.constellation, paths.codec_adapted_ckpt,
                     paths.constellation_epochs]
        timings = {"constellation": time.time() - t0}
    else:
        raise ConfigError(f"unknown train target '{target}'")
    write_manifest(out, f"train_{target}", cfg, artifacts, timings)


def build_simulator(cfg: dict, table, code, model) -> harq.HarqSimulator:
    o = cfg["ofdm"]
    ofdm_cfg = ofdm.OfdmConfig(n_subcarriers=o["n_subcarriers"],
                               n_symbols=o["n_symbols"], cp_len=o["cp_len"],
                               pilot_seed=o["pilot_seed"])
    schedule = fec.PunctureSchedule(tuple(cfg["ldpc"]["schedule"]))
    return harq.HarqSimulator(ofdm_cfg, huffman_table=table, ldpc_code=code,
                              schedule=schedule, codec_model=model,
                              n_taps=o["n_taps"])


def stage_sweep(cfg: dict):
    out = Path(cfg["out_dir"])
    paths = Paths(out)
    split, _, table, code = load_prepared(cfg)
    s = cfg["sweep"]
    model = None
    if any(name.startswith("scharq") for name in s["schemes"]):
        _require(paths.codec_ckpt, "run train codec")
        model = codec.SemanticModel.load(paths.codec_ckpt)
    sim = build_simulator(cfg, table, code, model)
    sentences = split.test[: s["n_sentences"]]
    if len(sentences) < s["n_sentences"]:
        raise ConfigError(f"test split has only {len(sentences)} sentences")
    policies = {name: harq.policy_from_name(
        name, s["max_rounds_conventional"], s["max_rounds_scharq"],
        s["initial_blocks"]) for name in s["schemes"]}
    t0 = time.time()
    table_out = harq.sweep(sim, s["schemes"], s["snr_db"], sentences,
                           cfg["seed"], workers=cfg["workers"], policies=policies)
    header = ["snr_db", "scheme", "acceptance", "metric_name", "success_rate",
              "wilson_low", "wilson_high", "mean_bits", "mean_similarity",
              "n", "seed"]
    rows = [[r.snr_db, r.scheme, r.acceptance, r.metric_name, r.success_rate,
             r.wilson_low, r.wilson_high, r.mean_bits, r.mean_similarity,
             r.n, r.seed] for r in table_out.rows]
    write_csv(paths.sweep_csv, header, rows)
    write_manifest(out, "sweep", cfg, [paths.sweep_csv],
                   {"sweep": time.time() - t0})
    return table_out


@dataclass
class ModexpResult:
    rows: list = field(default_factory=list)
    per_sentence: dict = field(default_factory=dict)  # (snr, arm) -> np.ndarray


def run_modexp(cfg: dict, split, model_base, model_adapted, constellation):
    """Paired comparison of Gray 16-QAM vs the trained constellation over the
    fading chain; both arms share taps, noise and padding per sentence."""
    m = cfg["modexp"]
    o = cfg["ofdm"]
    ofdm_cfg = ofdm.OfdmConfig(n_subcarriers=o["n_subcarriers"],
                               n_symbols=o["n_symbols"], cp_len=o["cp_len"],
                               pilot_seed=o["pilot_seed"])
    sentences = split.test[: m["n_sentences"]]
    if len(sentences) < m["n_sentences"]:
        raise ConfigError(f"test split has only {len(sentences)} sentences")
    qam = modulation.Constellation.qam16()
    arms = [("qam16", qam, model_base), ("trained", constellation, model_adapted)]
    n_bits = model_base.config.total_bits
    n_data_sym = ofdm_cfg.data_symbols_per_block
    result = ModexpResult()
    for snr in m["snr_db"]:
        sims = {arm: np.zeros(len(sentences)) for arm, _, _ in arms}
        noise_var = ofdm.noise_variance(snr)
        for i, sentence in enumerate(sentences):
            snr_key = int(round(snr * 1000)) + 10**6
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence([cfg["seed"], 2, snr_key, i])))
            taps = ofdm.draw_channel(rng, o["n_taps"])
            noise = np.sqrt(noise_var / 2.0) * (
                rng.standard_normal(ofdm_cfg.samples_per_block)
                + 1j * rng.standard_normal(ofdm_cfg.samples_per_block))
            pad_bits = rng.integers(0, 2, 4 * n_data_sym - n_bits).astype(np.uint8)
            original = list(sentence.tokens)
            for arm, constel, arm_model in arms:
                bits = arm_model.encode_bits_batch([original])[0]
                tx_bits = np.concatenate([bits, pad_bits])
                symbols, _ = modulation.modulate(tx_bits, constel)
                grid = np.vstack([ofdm_cfg.pilot[None, :],
                                  symbols.reshape(ofdm_cfg.n_symbols - 1, -1)])
                tx = ofdm.ofdm_modulate(grid, ofdm_cfg)
                rx = np.convolve(tx, taps)[: len(tx)] + noise
                rx_grid = ofdm.ofdm_demodulate(rx, ofdm_cfg)
                h_hat = ofdm.estimate_channel(rx_grid[0], ofdm_cfg.pilot)
                h_tiled = np.tile(h_hat, ofdm_cfg.n_symbols - 1)
                s_hat, gain, eff_nv = ofdm.equalize(rx_grid[1:].reshape(-1),
                                                    h_tiled, noise_var)
                llrs = modulation.demod_soft(s_hat, constel, gain, eff_nv)
                rx_bits = modulation.hard_bits(llrs)[:n_bits]
                decoded, _ = arm_model.decode_blocks([(0, rx_bits)])
                sims[arm][i] = similarity.sim_edit(decoded, original)
        for arm, _, _ in arms:
            result.rows.append([snr, arm, similarity.METRIC_EDIT,
                                float(sims[arm].mean()), len(sentences),
                                cfg["seed"]])
            result.per_sentence[(snr, arm)] = sims[arm]
    return result


def stage_modexp(cfg: dict):
    out = Path(cfg["out_dir"])
    paths = Paths(out)
    split, _, _, _ = load_prepared(cfg)
    _require(paths.codec_mod_ckpt, "run train codec")
    _require(paths.constellation, "run train constellation")
    model_base = codec.SemanticModel.load(paths.codec_mod_ckpt)
    if model_base.config.total_bits != 320:
        raise ConfigError("modulation experiment expects a 320-bit codec")
    adapted_path = paths.codec_adapted_ckpt
    model_adapted = codec.SemanticModel.load(adapted_path) \
        if adapted_path.exists() else model_base
    constellation = modulation.Constellation.load(paths.constellation)
    t0 = time.time()
    result = run_modexp(cfg, split, model_base, model_adapted, constellation)
    write_csv(paths.modexp_csv,
              ["snr_db", "modulation", "metric_name", "mean_similarity", "n",
               "seed"], result.rows)
    constellation.save(paths.scatter)
    write_manifest(out, "modexp", cfg, [paths.modexp_csv, paths.scatter],
                   {"modexp": time.time() - t0})
    return result


def stage_gradcheck(cfg: dict) -> float:
    from . import nn

    split, vocab, _, _ = load_prepared(cfg)
    config = _codec_config(cfg["codec"], len(vocab))
    model = codec.SemanticModel(config, vocab, seed=cfg["seed"])
    rng = np.random.Generator(np.random.PCG64(cfg["seed"] + 7))
    batch = split.train[:4]
    ids = np.stack([model.token_ids(s.tokens) for s in batch])
    targets = np.stack([model.target_ids(s.tokens) for s in batch])
    flips = np.where(rng.random((len(batch), config.total_bits)) < 0.05, -1.0, 1.0)
    mask = np.ones(config.n_blocks)
    mask[rng.integers(config.n_blocks)] = 0.0

    def loss_fn(compute_grads):
        return model.training_loss(ids, targets, flips, mask, soft=True,
                                   compute_grads=compute_grads)

    err = nn.gradient_check(loss_fn, model.params, rng=rng)
    print(f"gradient check max relative error: {err:.3e}")
    return err
