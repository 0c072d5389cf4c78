"""Gray 16-QAM plus a trainable 16-point constellation.

Labeling convention (fixed everywhere, training moves geometry only): a
nibble is 4 bits MSB-first, b0 b1 b2 b3 -> index n = 8*b0+4*b1+2*b2+b3.
For Gray 16-QAM the first bit pair selects the in-phase level and the
second pair the quadrature level, per-axis Gray map
    00 -> -3,  01 -> -1,  11 -> +1,  10 -> +3,
scaled by 1/sqrt(10) for unit average power. So nibble 0000 sits at the
(-3 -3j)/sqrt(10) corner.

LLRs follow the decoder convention: positive means bit 0 more likely. In
the +-1 channel domain used by the semantic codec, bit b maps to 2b - 1.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import nn

_GRAY2 = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}

# bit k of each nibble label, and the same in the +-1 domain
LABEL_BITS = np.array([[(n >> (3 - k)) & 1 for k in range(4)] for n in range(16)],
                      dtype=np.uint8)
LABEL_BITS_PM1 = 2.0 * LABEL_BITS - 1.0


@dataclass(frozen=True)
class Constellation:
    """16 labeled complex points with unit average power."""

    points: np.ndarray  # (16,) complex128, index = nibble value

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        if pts.shape != (16,):
            raise ValueError("constellation needs exactly 16 points")
        object.__setattr__(self, "points", pts)
        power = np.mean(np.abs(pts) ** 2)
        if abs(power - 1.0) > 1e-9:
            raise ValueError(f"average power {power} != 1")

    @classmethod
    def qam16(cls) -> "Constellation":
        pts = np.empty(16, dtype=np.complex128)
        for n in range(16):
            b = LABEL_BITS[n]
            pts[n] = (_GRAY2[(b[0], b[1])] + 1j * _GRAY2[(b[2], b[3])]) / np.sqrt(10.0)
        return cls(pts)

    def save(self, path):
        rows = [[n, float(self.points[n].real), float(self.points[n].imag)]
                for n in range(16)]
        blob = {"points": rows,
                "average_power": float(np.mean(np.abs(self.points) ** 2))}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh)

    @classmethod
    def load(cls, path) -> "Constellation":
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
        pts = np.zeros(16, dtype=np.complex128)
        for n, re, im in blob["points"]:
            pts[int(n)] = re + 1j * im
        return cls(pts)


def pad_to_nibbles(bits: np.ndarray):
    """Zero-pad to a multiple of 4 bits; returns (bits, n_padded)."""
    bits = np.asarray(bits, dtype=np.uint8)
    n_pad = (-len(bits)) % 4
    if n_pad:
        bits = np.concatenate([bits, np.zeros(n_pad, dtype=np.uint8)])
    return bits, n_pad


def bits_to_nibbles(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return bits.reshape(-1, 4) @ np.array([8, 4, 2, 1])


def nibbles_to_bits(nibbles: np.ndarray) -> np.ndarray:
    return LABEL_BITS[np.asarray(nibbles, dtype=np.int64)].reshape(-1)


def modulate(bits: np.ndarray, constellation: Constellation):
    """Map bits to constellation symbols; returns (symbols, n_pad_bits)."""
    bits, n_pad = pad_to_nibbles(bits)
    return constellation.points[bits_to_nibbles(bits)], n_pad


def qam16_modulate(bits: np.ndarray):
    return modulate(bits, Constellation.qam16())


def modulate_learned(bits: np.ndarray, constellation: Constellation):
    return modulate(bits, constellation)


def demod_soft(symbols, constellation: Constellation, channel_gain, noise_var):
    """Exact max-log LLRs, 4 per symbol, shape (n_symbols, 4).

    channel_gain scales the candidate points (use the equalizer's effective
    gain, or the raw channel estimate with unequalized symbols); noise_var
    may be a scalar or per-symbol. Zero gain yields zero LLRs (erasure).
    """
    y = np.atleast_1d(np.asarray(symbols, dtype=np.complex128))
    gain = np.broadcast_to(np.asarray(channel_gain), y.shape)
    nv = np.broadcast_to(np.asarray(noise_var, dtype=np.float64), y.shape)
    dist = np.abs(y[:, None] - gain[:, None] * constellation.points[None, :]) ** 2
    llrs = np.empty((len(y), 4))
    for k in range(4):
        zero_set = LABEL_BITS[:, k] == 0
        d0 = dist[:, zero_set].min(axis=1)
        d1 = dist[:, ~zero_set].min(axis=1)
        llrs[:, k] = d1 - d0
    erased = gain == 0
    safe_nv = np.where(erased, 1.0, nv)
    llrs = llrs / safe_nv[:, None]
    llrs[erased] = 0.0
    return llrs


def hard_bits(llrs: np.ndarray) -> np.ndarray:
    """Positive LLR means bit 0."""
    return (np.asarray(llrs).reshape(-1) < 0).astype(np.uint8)


def soft_detect(symbols, points, noise_var):
    """Differentiable posterior over the 16 nibbles: softmax(-|y - p|^2 / nv)."""
    pts = points.points if isinstance(points, Constellation) else np.asarray(points)
    y = np.atleast_1d(np.asarray(symbols, dtype=np.complex128))
    dist = np.abs(y[:, None] - pts[None, :]) ** 2
    logit = -dist / noise_var
    logit -= logit.max(axis=1, keepdims=True)
    q = np.exp(logit)
    q /= q.sum(axis=1, keepdims=True)
    return q


@dataclass
class MapperParams:
    """One-hot nibble -> tanh affine -> 2 reals -> power normalization."""

    w: nn.Parameter  # (16, 2)
    b: nn.Parameter  # (2,)

    @classmethod
    def init(cls, rng: np.random.Generator) -> "MapperParams":
        return cls(w=nn.Parameter(nn.glorot_uniform((16, 2), rng)),
                   b=nn.Parameter(np.zeros(2)))

    def raw_coords(self) -> np.ndarray:
        return np.tanh(self.w.value + self.b.value)

    def points(self) -> np.ndarray:
        r = self.raw_coords()
        scale = np.sqrt(16.0 / np.sum(r * r))
        coords = scale * r
        return coords[:, 0] + 1j * coords[:, 1]

    def constellation(self) -> Constellation:
        return Constellation(self.points())

    def params(self) -> dict:
        return {"mapper_w": self.w, "mapper_b": self.b}

    def backprop_points(self, dpoints: np.ndarray):
        """Accumulate gradients of a loss into w/b given dL/d(points).

        dpoints is (16,) complex; its real/imag parts are the gradients of
        the two coordinates of each normalized point.
        """
        g = np.stack([dpoints.real, dpoints.imag], axis=1)
        r = self.raw_coords()
        energy = np.sum(r * r)
        scale = np.sqrt(16.0 / energy)
        # d(scale*r)/dr through the normalization
        dr = scale * g - (scale / energy) * r * np.sum(g * r)
        dpre = dr * (1.0 - r * r)
        self.w.grad += dpre
        self.b.grad += dpre.sum(axis=0)


class ConstellationTrainer:
    """End-to-end loop: codec bits -> mapper -> AWGN -> soft detection ->
    expected +-1 bits -> codec decoder -> token cross-entropy.

    Gradients flow into the mapper always and into the codec's decoder
    affines when joint=True. The encoder is behind a hard nibble lookup, so
    it receives no gradient either way and stays frozen.
    """

    def __init__(self, model, snr_train_db: float, seed: int, joint: bool = True):
        if model.config.total_bits % 4:
            raise ValueError("codec bit budget must be a multiple of 4")
        self.model = model
        self.noise_var = 10.0 ** (-snr_train_db / 10.0)
        self.joint = joint
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.mapper = MapperParams.init(self.rng)
        self._cache = None

    def trainable_params(self) -> dict:
        params = dict(self.mapper.params())
        if self.joint:
            params.update(self.model.decoder_params())
        return params

    def loss_batch(self, token_batch, noise, compute_grads: bool):
        """Mean token cross-entropy for one batch under fixed noise draws."""
        model = self.model
        bits = model.encode_bits_batch(token_batch)  # (S, B) hard bits
        n_sym = model.config.total_bits // 4
        nibbles = bits_to_nibbles(bits.reshape(-1)).reshape(len(token_batch), n_sym)
        pts = self.mapper.points()
        tx = pts[nibbles]
        y = tx + noise
        diff = y[:, :, None] - pts[None, None, :]
        dist = np.abs(diff) ** 2
        logit = -dist / self.noise_var
        logit -= logit.max(axis=2, keepdims=True)
        q = np.exp(logit)
        q /= q.sum(axis=2, keepdims=True)
        soft_pm1 = q @ LABEL_BITS_PM1  # (S, n_sym, 4) expected +-1 bits
        channel_values = soft_pm1.reshape(len(token_batch), -1)
        loss, dvalues = model.decoder_loss(
            channel_values, token_batch, compute_grads=compute_grads and self.joint
        )
        if compute_grads:
            dsoft = dvalues.reshape(q.shape[0], q.shape[1], 4)
            dq = dsoft @ LABEL_BITS_PM1.T
            dlogit = q * (dq - np.sum(dq * q, axis=2, keepdims=True))
            ddist = -dlogit / self.noise_var
            # |y - p_j|^2: gradient 2*diff w.r.t. y, -2*diff w.r.t. p_j
            dp = -2.0 * np.einsum("stj,stj->j", ddist, diff.real) \
                - 2j * np.einsum("stj,stj->j", ddist, diff.imag)
            dy = 2.0 * np.sum(ddist * diff.real, axis=2) \
                + 2j * np.sum(ddist * diff.imag, axis=2)
            np.add.at(dp, nibbles.reshape(-1), dy.reshape(-1))
            self.mapper.backprop_points(dp)
        return loss

    def run(self, sentences, epochs: int, batch_size: int, lr: float):
        """Returns (constellation, history) and leaves the (possibly adapted)
        model in self.model. history[0] is the pre-training loss."""
        params = self.trainable_params()
        opt = nn.Adam(params, lr=lr)
        token_lists = [s.tokens for s in sentences]
        n_sym = self.model.config.total_bits // 4

        def eval_loss():
            rng_eval = np.random.Generator(np.random.PCG64(12345))
            total, count = 0.0, 0
            for lo in range(0, min(len(token_lists), 512), 128):
                batch = token_lists[lo : lo + 128]
                noise = self._draw_noise(rng_eval, len(batch), n_sym)
                total += self.loss_batch(batch, noise, compute_grads=False) * len(batch)
                count += len(batch)
            return total / count

        history = [(0, eval_loss())]
        order = np.arange(len(token_lists))
        for epoch in range(1, epochs + 1):
            self.rng.shuffle(order)
            losses = []
            for lo in range(0, len(order), batch_size):
                batch = [token_lists[i] for i in order[lo : lo + batch_size]]
                noise = self._draw_noise(self.rng, len(batch), n_sym)
                for p in params.values():
                    p.zero_grad()
                losses.append(self.loss_batch(batch, noise, compute_grads=True))
                opt.step()
            history.append((epoch, float(np.mean(losses))))
        return self.mapper.constellation(), history

    def _draw_noise(self, rng, n_sentences, n_sym):
        return np.sqrt(self.noise_var / 2.0) * (
            rng.standard_normal((n_sentences, n_sym))
            + 1j * rng.standard_normal((n_sentences, n_sym))
        )


def train_constellation(model, sentences, snr_train_db: float = 8.0,
                        epochs: int = 20, batch_size: int = 64, lr: float = 2e-3,
                        seed: int = 0, joint: bool = True):
    """Train the 16-point mapper end-to-end; returns (constellation, model,
    history). The returned model carries the adapted decoder when joint."""
    trainer = ConstellationTrainer(model, snr_train_db, seed, joint=joint)
    constellation, history = trainer.run(sentences, epochs, batch_size, lr)
    return constellation, trainer.model, trainer.mapper, history
