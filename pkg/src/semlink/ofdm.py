"""OFDM framing, multipath block fading, pilot-aided estimation, PAPR.

Frame geometry: 64 subcarriers x 8 OFDM symbols per block, 16-sample cyclic
prefix, the whole first symbol is a fixed unit-magnitude QPSK pilot. IFFT/FFT
use unitary scaling (1/sqrt(N)) so time- and frequency-domain energies match
and SNR bookkeeping stays exact with unit-power constellations.

Channel: 8 complex Gaussian taps with an exponential power-delay profile
(3 dB per tap), normalized to unit expected energy, drawn independently per
OFDM block and static inside it.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

N_TAPS_DEFAULT = 8
TAP_DECAY_DB = 3.0


@dataclass(frozen=True)
class OfdmConfig:
    n_subcarriers: int = 64
    n_symbols: int = 8
    cp_len: int = 16
    pilot_seed: int = 1001

    @property
    def samples_per_symbol(self):
        return self.n_subcarriers + self.cp_len

    @property
    def samples_per_block(self):
        return self.n_symbols * self.samples_per_symbol

    @property
    def data_symbols_per_block(self):
        return (self.n_symbols - 1) * self.n_subcarriers

    @cached_property
    def pilot(self) -> np.ndarray:
        """Unit-magnitude QPSK row fixed by pilot_seed."""
        rng = np.random.Generator(np.random.PCG64(self.pilot_seed))
        phases = rng.integers(0, 4, self.n_subcarriers)
        return np.exp(1j * (np.pi / 4 + np.pi / 2 * phases))


def draw_channel(rng: np.random.Generator, n_taps: int = N_TAPS_DEFAULT,
                 decay_db: float = TAP_DECAY_DB) -> np.ndarray:
    """One block-fading realization: complex Gaussian taps, exponential PDP,
    normalized so the expected total tap energy is 1."""
    profile = 10.0 ** (-decay_db * np.arange(n_taps) / 10.0)
    profile /= profile.sum()
    taps = rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)
    return np.sqrt(profile / 2.0) * taps


def ofdm_modulate(grid: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Unitary IFFT per OFDM symbol plus cyclic prefix; returns flat samples."""
    grid = np.asarray(grid)
    if grid.shape != (cfg.n_symbols, cfg.n_subcarriers):
        raise ValueError(f"grid shape {grid.shape} does not match config")
    time = np.fft.ifft(grid, axis=1) * np.sqrt(cfg.n_subcarriers)
    with_cp = np.concatenate([time[:, -cfg.cp_len :], time], axis=1)
    return with_cp.reshape(-1)


def ofdm_demodulate(samples: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Strip cyclic prefixes and run the unitary FFT back to the grid."""
    samples = np.asarray(samples)
    if len(samples) != cfg.samples_per_block:
        raise ValueError("sample count does not match config")
    per_sym = samples.reshape(cfg.n_symbols, cfg.samples_per_symbol)
    no_cp = per_sym[:, cfg.cp_len :]
    return np.fft.fft(no_cp, axis=1) / np.sqrt(cfg.n_subcarriers)


def apply_channel(samples: np.ndarray, taps: np.ndarray, snr_db: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Causal FIR convolution with the block's taps plus complex AWGN.

    Noise variance is 10^(-snr/10) per complex sample, i.e. the requested
    average received SNR assuming unit signal power.
    """
    samples = np.asarray(samples)
    rx = np.convolve(samples, taps)[: len(samples)]
    if np.isfinite(snr_db):
        noise_var = 10.0 ** (-snr_db / 10.0)
        noise = np.sqrt(noise_var / 2.0) * (
            rng.standard_normal(len(rx)) + 1j * rng.standard_normal(len(rx))
        )
        rx = rx + noise
    return rx


def noise_variance(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


def estimate_channel(rx_pilot: np.ndarray, pilot: np.ndarray) -> np.ndarray:
    """Per-subcarrier least-squares estimate from the pilot symbol."""
    return np.asarray(rx_pilot) / np.asarray(pilot)


def channel_frequency_response(taps: np.ndarray, n_subcarriers: int) -> np.ndarray:
    return np.fft.fft(taps, n_subcarriers)


def equalize(rx_symbols: np.ndarray, h_hat: np.ndarray, noise_var: float):
    """Per-subcarrier MMSE scalar equalizer.

    Returns (equalized symbols, effective gain, effective noise variance):
    the post-equalizer model is s_hat = gain * s + noise with the reported
    per-symbol noise variance, which is what soft demodulation needs.
    """
    rx = np.asarray(rx_symbols)
    h = np.asarray(h_hat)
    denom = np.abs(h) ** 2 + noise_var
    s_hat = np.conj(h) * rx / denom
    eff_gain = np.abs(h) ** 2 / denom
    eff_noise = np.abs(h) ** 2 * noise_var / denom**2
    return s_hat, np.broadcast_to(eff_gain, rx.shape).copy(), \
        np.broadcast_to(eff_noise, rx.shape).copy()


def papr_db(samples: np.ndarray) -> float:
    """Peak-to-average power ratio of a time-domain waveform, in dB."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty sample vector")
    power = np.abs(samples) ** 2
    return float(10.0 * np.log10(power.max() / power.mean()))
