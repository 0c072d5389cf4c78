"""Desk-scale joint source-channel codec trained under bit corruption.

A sentence (up to 30 tokens, PAD-filled) is embedded, pushed through two
affine+tanh layers and sign-quantized into B bits split over L equal blocks.
The decoder sees the +-1 values of whatever blocks arrived (zeros for the
missing ones) together with L presence flags, and emits 30 x V logits; the
output projection is tied to the embedding table. Training flips bits with
a random probability and drops random blocks, so decoding degrades
gracefully with corruption and with missing blocks.

The quantizer trains with a straight-through estimator (backward identity
clipped to |pre-activation| <= 1); a soft mode that bypasses quantization
entirely exists for finite-difference gradient verification.
"""

from dataclasses import dataclass, asdict

import numpy as np

from . import nn
from .corpus import EOS_ID, PAD_ID, Vocab


@dataclass(frozen=True)
class CodecConfig:
    vocab_size: int
    max_tokens: int = 30
    embed_dim: int = 32
    hidden_dim: int = 256
    total_bits: int = 960
    n_blocks: int = 6

    def __post_init__(self):
        if self.total_bits > 1000:
            raise ValueError("bit budget capped at 1000")
        if self.total_bits % self.n_blocks:
            raise ValueError("total_bits must divide evenly into blocks")

    @property
    def block_bits(self):
        return self.total_bits // self.n_blocks


@dataclass(frozen=True)
class CodewordBlock:
    index: int  # 0-based block position
    bits: np.ndarray  # (block_bits,) uint8


class SemanticModel:
    """Encoder/decoder parameter bundle plus the vocabulary it was built on."""

    def __init__(self, config: CodecConfig, vocab: Vocab, seed: int = 0,
                 params: dict | None = None):
        if len(vocab) != config.vocab_size:
            raise ValueError("vocab size mismatch")
        self.config = config
        self.vocab = vocab
        if params is not None:
            self.params = params
        else:
            rng = np.random.Generator(np.random.PCG64(seed))
            c = config
            flat = c.max_tokens * c.embed_dim
            self.params = {
                "emb": nn.Parameter(nn.glorot_uniform((c.vocab_size, c.embed_dim), rng)),
                "enc_w1": nn.Parameter(nn.glorot_uniform((flat, c.hidden_dim), rng)),
                "enc_b1": nn.Parameter(np.zeros(c.hidden_dim)),
                "enc_w2": nn.Parameter(nn.glorot_uniform((c.hidden_dim, c.total_bits), rng)),
                "enc_b2": nn.Parameter(np.zeros(c.total_bits)),
                "dec_w1": nn.Parameter(nn.glorot_uniform(
                    (c.total_bits + c.n_blocks, c.hidden_dim), rng)),
                "dec_b1": nn.Parameter(np.zeros(c.hidden_dim)),
                "dec_w2": nn.Parameter(nn.glorot_uniform((c.hidden_dim, flat), rng)),
                "dec_b2": nn.Parameter(np.zeros(flat)),
                "out_b": nn.Parameter(np.zeros(c.vocab_size)),
            }

    # ---------------- token plumbing ----------------

    def token_ids(self, tokens) -> np.ndarray:
        c = self.config
        if len(tokens) > c.max_tokens:
            raise ValueError(f"sentence longer than {c.max_tokens} tokens")
        ids = self.vocab.ids(tokens)
        out = np.full(c.max_tokens, PAD_ID, dtype=np.int64)
        out[: len(ids)] = ids
        return out

    def target_ids(self, tokens) -> np.ndarray:
        """Token ids followed by EOS then PAD, fixed length."""
        out = self.token_ids(tokens)
        if len(tokens) < self.config.max_tokens:
            out[len(tokens)] = EOS_ID
        return out

    # ---------------- encoder ----------------

    def _encode_pre(self, ids_batch: np.ndarray):
        p = self.params
        x = p["emb"].value[ids_batch].reshape(len(ids_batch), -1)
        h1 = np.tanh(nn.affine_forward(x, p["enc_w1"].value, p["enc_b1"].value))
        u = nn.affine_forward(h1, p["enc_w2"].value, p["enc_b2"].value)
        return x, h1, u

    def encode_bits_batch(self, token_lists) -> np.ndarray:
        """(S, B) hard bits; deterministic function of (model, tokens)."""
        ids = np.stack([self.token_ids(t) for t in token_lists])
        _, _, u = self._encode_pre(ids)
        return (u >= 0).astype(np.uint8)

    def encode_blocks(self, tokens) -> list:
        bits = self.encode_bits_batch([tokens])[0]
        bb = self.config.block_bits
        return [CodewordBlock(index=i, bits=bits[i * bb : (i + 1) * bb])
                for i in range(self.config.n_blocks)]

    # ---------------- decoder ----------------

    def _decoder_forward(self, z: np.ndarray):
        p = self.params
        h2 = np.tanh(nn.affine_forward(z, p["dec_w1"].value, p["dec_b1"].value))
        g = nn.affine_forward(h2, p["dec_w2"].value, p["dec_b2"].value)
        c = self.config
        g3 = g.reshape(len(z), c.max_tokens, c.embed_dim)
        logits = g3 @ p["emb"].value.T + p["out_b"].value
        return h2, g3, logits

    def _decoder_backward(self, dlogits3, z, h2, g3, accumulate: bool):
        """Gradient of the decoder stack; returns dz. Parameter gradients are
        accumulated only when accumulate=True (embedding output side included)."""
        p = self.params
        c = self.config
        s = len(z)
        dg3 = dlogits3 @ p["emb"].value
        if accumulate:
            flat_dl = dlogits3.reshape(-1, c.vocab_size)
            flat_g = g3.reshape(-1, c.embed_dim)
            p["out_b"].grad += flat_dl.sum(axis=0)
            p["emb"].grad += flat_dl.T @ flat_g
        dg = dg3.reshape(s, -1)
        dh2, dw2, db2 = nn.affine_backward(dg, h2, p["dec_w2"].value)
        dpre = nn.tanh_backward(dh2, h2)
        dz, dw1, db1 = nn.affine_backward(dpre, z, p["dec_w1"].value)
        if accumulate:
            p["dec_w2"].grad += dw2
            p["dec_b2"].grad += db2
            p["dec_w1"].grad += dw1
            p["dec_b1"].grad += db1
        return dz

    def decoder_params(self) -> dict:
        """Decoder-side parameters adapted by joint constellation training."""
        return {k: self.params[k]
                for k in ("dec_w1", "dec_b1", "dec_w2", "dec_b2", "out_b")}

    def decode_blocks(self, blocks):
        """Decode from any non-empty subset of (possibly corrupted) blocks.

        blocks: iterable of CodewordBlock or (index, bits). Returns
        (tokens, confidences) truncated at the first EOS/PAD.
        """
        c = self.config
        pairs = [(b.index, b.bits) if isinstance(b, CodewordBlock) else b
                 for b in blocks]
        if not pairs:
            raise ValueError("at least one block required")
        values = np.zeros(c.total_bits)
        flags = np.zeros(c.n_blocks)
        bb = c.block_bits
        for idx, bits in pairs:
            if not 0 <= idx < c.n_blocks:
                raise ValueError(f"block index {idx} out of range")
            values[idx * bb : (idx + 1) * bb] = 2.0 * np.asarray(bits, np.float64) - 1.0
            flags[idx] = 1.0
        z = np.concatenate([values, flags])[None, :]
        _, _, logits = self._decoder_forward(z)
        logits = logits[0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        ids = logits.argmax(axis=1)
        conf = probs[np.arange(c.max_tokens), ids]
        tokens, confidences = [], []
        for t, i in enumerate(ids):
            if i in (EOS_ID, PAD_ID):
                break
            tokens.append(self.vocab.id_to_token[i])
            confidences.append(float(conf[t]))
        return tokens, confidences

    def decoder_loss(self, channel_values, token_batch, compute_grads: bool):
        """Cross-entropy of decoding given +-1-domain channel values with all
        blocks present. Returns (loss, dL/dvalues); used by the end-to-end
        constellation trainer, which owns gradients upstream of the values."""
        c = self.config
        values = np.asarray(channel_values, dtype=np.float64)
        targets = np.stack([self.target_ids(t) for t in token_batch])
        flags = np.ones((len(values), c.n_blocks))
        z = np.concatenate([values, flags], axis=1)
        h2, g3, logits = self._decoder_forward(z)
        loss, dlogits, _ = nn.softmax_cross_entropy(
            logits.reshape(-1, c.vocab_size), targets.reshape(-1))
        dlogits3 = dlogits.reshape(len(values), c.max_tokens, c.vocab_size)
        dz = self._decoder_backward(dlogits3, z, h2, g3, accumulate=compute_grads)
        return loss, dz[:, : c.total_bits]

    # ---------------- full training path ----------------

    def training_loss(self, ids_batch, targets, flip_signs, block_mask,
                      soft: bool = False, compute_grads: bool = True):
        """Forward (and optionally backward) through the whole codec.

        flip_signs: (S, B) of +-1; block_mask: (L,) of 0/1. In soft mode the
        quantizer is bypassed (identity), which makes the entire path
        differentiable for gradient checking.
        """
        p = self.params
        c = self.config
        x, h1, u = self._encode_pre(ids_batch)
        if soft:
            cvals = u
        else:
            cvals = np.where(u >= 0, 1.0, -1.0)
        mask_bits = np.repeat(block_mask, c.block_bits)
        transmitted = cvals * flip_signs * mask_bits
        flags = np.tile(block_mask, (len(ids_batch), 1))
        z = np.concatenate([transmitted, flags], axis=1)
        h2, g3, logits = self._decoder_forward(z)
        loss, dlogits, _ = nn.softmax_cross_entropy(
            logits.reshape(-1, c.vocab_size), targets.reshape(-1))
        if not compute_grads:
            return loss
        dlogits3 = dlogits.reshape(len(ids_batch), c.max_tokens, c.vocab_size)
        dz = self._decoder_backward(dlogits3, z, h2, g3, accumulate=True)
        dtrans = dz[:, : c.total_bits]
        dc = dtrans * flip_signs * mask_bits
        if soft:
            du = dc
        else:
            du = dc * (np.abs(u) <= 1.0)  # straight-through, clipped
        dh1, dw2, db2 = nn.affine_backward(du, h1, p["enc_w2"].value)
        dpre1 = nn.tanh_backward(dh1, h1)
        dx, dw1, db1 = nn.affine_backward(dpre1, x, p["enc_w1"].value)
        p["enc_w2"].grad += dw2
        p["enc_b2"].grad += db2
        p["enc_w1"].grad += dw1
        p["enc_b1"].grad += db1
        np.add.at(p["emb"].grad, ids_batch,
                  dx.reshape(len(ids_batch), c.max_tokens, c.embed_dim))
        return loss

    # ---------------- persistence ----------------

    def save(self, path):
        nn.save_checkpoint(path, self.params, asdict(self.config),
                           extra={"vocab": self.vocab.id_to_token,
                                  "kind": "semantic_codec"})

    @classmethod
    def load(cls, path) -> "SemanticModel":
        params, config, blob = nn.load_checkpoint(path)
        vocab = Vocab(id_to_token=blob["vocab"], counts={})
        return cls(CodecConfig(**config), vocab, params=params)

    def clone(self) -> "SemanticModel":
        params = {k: nn.Parameter(p.value.copy()) for k, p in self.params.items()}
        return SemanticModel(self.config, self.vocab, params=params)


# public functional aliases matching the operation names

def encode_semantic(model: SemanticModel, tokens) -> list:
    return model.encode_blocks(tokens)


def decode_semantic(model: SemanticModel, blocks):
    return model.decode_blocks(blocks)


def train_codec(split, vocab: Vocab, config: CodecConfig, epochs: int,
                seed: int, flip_prob_range=(0.0, 0.15), lr: float = 1e-3,
                batch_size: int = 128, keep_prob: float = 0.7,
                val_fraction: float = 0.05):
    """Train under random bit flips and block dropout; returns (model, history).

    Per batch one flip probability is drawn uniformly from flip_prob_range
    and one block-presence mask (each block kept with keep_prob, at least
    one). The last val_fraction of the train split is held out; the returned
    model carries the parameters with the best held-out loss. history rows
    are (epoch, train_loss, val_loss).
    """
    sentences = split.train
    if not sentences:
        raise ValueError("empty train split")
    model = SemanticModel(config, vocab, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    n_val = max(1, int(len(sentences) * val_fraction)) \
        if val_fraction > 0 and len(sentences) > 20 else 0
    train_sents = sentences[: len(sentences) - n_val]
    val_sents = sentences[len(sentences) - n_val :]

    ids = np.stack([model.token_ids(s.tokens) for s in train_sents])
    targets = np.stack([model.target_ids(s.tokens) for s in train_sents])
    val_ids = np.stack([model.token_ids(s.tokens) for s in val_sents]) if n_val else None
    val_targets = np.stack([model.target_ids(s.tokens) for s in val_sents]) if n_val else None

    opt = nn.Adam(model.params, lr=lr)
    lo, hi = flip_prob_range

    def draw_mask(gen):
        mask = (gen.random(config.n_blocks) < keep_prob).astype(np.float64)
        if not mask.any():
            mask[gen.integers(config.n_blocks)] = 1.0
        return mask

    def val_loss():
        # fixed corruption grid (spanning the training range) so epochs compare
        gen = np.random.Generator(np.random.PCG64(seed + 99))
        total = 0.0
        grid = np.linspace(lo, hi, 4)
        for p_flip in grid:
            flips = np.where(gen.random((len(val_ids), config.total_bits)) < p_flip,
                             -1.0, 1.0)
            mask = draw_mask(gen)
            total += model.training_loss(val_ids, val_targets, flips, mask,
                                         compute_grads=False)
        return total / len(grid)

    history = []
    best = (np.inf, None)
    order = np.arange(len(train_sents))
    for epoch in range(1, epochs + 1):
        rng.shuffle(order)
        losses = []
        for start in range(0, len(order), batch_size):
            sel = order[start : start + batch_size]
            p_flip = rng.uniform(lo, hi)
            flips = np.where(rng.random((len(sel), config.total_bits)) < p_flip,
                             -1.0, 1.0)
            mask = draw_mask(rng)
            for par in model.params.values():
                par.zero_grad()
            loss = model.training_loss(ids[sel], targets[sel], flips, mask)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch} (loss={loss})")
            losses.append(loss)
            opt.step()
        vl = val_loss() if n_val else float(np.mean(losses))
        history.append((epoch, float(np.mean(losses)), float(vl)))
        if vl < best[0]:
            best = (vl, {k: p.value.copy() for k, p in model.params.items()})
    if best[1] is not None:
        for k, p in model.params.items():
            p.value[...] = best[1][k]
    return model, history
