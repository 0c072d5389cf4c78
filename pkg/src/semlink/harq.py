"""HARQ session state machines and sweep aggregation.

Two schemes over the same pilot-aided OFDM link with 16-QAM:

* conventional: Huffman source coding, CRC-16 per LDPC block, incremental
  redundancy via the puncture schedule, LLR combining across rounds,
  belief-propagation decoding, CRC-gated acceptance. Blocks that pass stop
  transmitting; the session succeeds when every block has passed.
* scharq: the semantic codec's L equal blocks; round 1 sends the first k0
  blocks and every NACK adds one more. The receiver decodes from all
  (channel-corrupted) blocks received so far and accepts on exact token
  match or on word-edit similarity above a threshold.

Acceptance for scharq is a genie oracle (it compares against the true
transmitted sentence), which measures the protocol ceiling; run manifests
record this. ACK/NACK feedback is ideal and free for both schemes.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import fec, huffman, modulation, ofdm, similarity
from .corpus import detokenize, tokenize

SCHEME_CONVENTIONAL = "conventional"
SCHEME_SCHARQ = "scharq"


@dataclass(frozen=True)
class HarqPolicy:
    scheme: str
    max_rounds: int
    acceptance: str  # crc | exact | similarity
    threshold: float = 0.98
    initial_blocks: int = 2

    def __post_init__(self):
        if self.scheme not in (SCHEME_CONVENTIONAL, SCHEME_SCHARQ):
            raise ValueError(f"unknown scheme {self.scheme}")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")


def policy_from_name(name: str, max_rounds_conventional: int = 3,
                     max_rounds_scharq: int = 5, initial_blocks: int = 2) -> HarqPolicy:
    """Map a sweep scheme label to its policy.

    Labels: 'conventional', 'scharq-exact', 'scharq-sim<threshold>'.
    """
    if name == "conventional":
        return HarqPolicy(SCHEME_CONVENTIONAL, max_rounds_conventional, "crc")
    if name == "scharq-exact":
        return HarqPolicy(SCHEME_SCHARQ, max_rounds_scharq, "exact",
                          initial_blocks=initial_blocks)
    if name.startswith("scharq-sim"):
        return HarqPolicy(SCHEME_SCHARQ, max_rounds_scharq, "similarity",
                          threshold=float(name[len("scharq-sim"):]),
                          initial_blocks=initial_blocks)
    raise ValueError(f"unknown scheme label {name}")


@dataclass
class SessionResult:
    success: bool
    rounds: int
    bits_transmitted: int
    similarity: float
    decoded_tokens: list
    scheme: str
    acceptance: str
    phy_bits_carried: int = 0


@dataclass
class SweepRow:
    snr_db: float
    scheme: str
    acceptance: str
    metric_name: str
    success_rate: float
    wilson_low: float
    wilson_high: float
    mean_bits: float
    mean_similarity: float
    n: int
    seed: int


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


class HarqSimulator:
    """Shared physical chain plus both HARQ schemes.

    The codec model is only needed for scharq sessions; the Huffman table
    and LDPC code only for conventional ones.
    """

    def __init__(self, ofdm_cfg: ofdm.OfdmConfig, huffman_table=None,
                 ldpc_code=None, schedule=None, codec_model=None,
                 constellation=None, n_taps: int = ofdm.N_TAPS_DEFAULT):
        self.cfg = ofdm_cfg
        self.table = huffman_table
        self.code = ldpc_code
        self.schedule = schedule or fec.PunctureSchedule()
        self.model = codec_model
        self.constellation = constellation or modulation.Constellation.qam16()
        self.n_taps = n_taps
        if ldpc_code is not None:
            cum = self.schedule.cumulative
            if cum[-1] != ldpc_code.n or cum[0] < ldpc_code.k:
                raise ValueError("schedule inconsistent with LDPC code")

    # ---------------- physical chain ----------------

    def transmit_bits(self, bits: np.ndarray, snr_db: float,
                      rng: np.random.Generator):
        """One trip through 16-QAM + OFDM + fading + estimation + soft demod.

        Returns (llrs for exactly the input bits, bits carried) where the
        second value is the PHY's own count of payload bits it mapped onto
        symbols (the independent accounting check). Partially filled frames
        are padded with zero bits; each OFDM block draws fresh taps.
        """
        cfg = self.cfg
        bits = np.asarray(bits, dtype=np.uint8)
        n_payload = len(bits)
        bits_per_frame = 4 * cfg.data_symbols_per_block
        n_frames = max(1, -(-n_payload // bits_per_frame))
        padded = np.zeros(n_frames * bits_per_frame, dtype=np.uint8)
        padded[:n_payload] = bits
        symbols, _ = modulation.modulate(padded, self.constellation)
        noise_var = ofdm.noise_variance(snr_db)
        llr_parts = []
        for f in range(n_frames):
            data = symbols[f * cfg.data_symbols_per_block:
                           (f + 1) * cfg.data_symbols_per_block]
            grid = np.vstack([self.cfg.pilot[None, :],
                              data.reshape(cfg.n_symbols - 1, cfg.n_subcarriers)])
            tx = ofdm.ofdm_modulate(grid, cfg)
            taps = ofdm.draw_channel(rng, self.n_taps)
            rx = ofdm.apply_channel(tx, taps, snr_db, rng)
            rx_grid = ofdm.ofdm_demodulate(rx, cfg)
            h_hat = ofdm.estimate_channel(rx_grid[0], cfg.pilot)
            rx_data = rx_grid[1:].reshape(-1)
            h_tiled = np.tile(h_hat, cfg.n_symbols - 1)
            s_hat, gain, eff_nv = ofdm.equalize(rx_data, h_tiled, noise_var)
            llr_parts.append(
                modulation.demod_soft(s_hat, self.constellation, gain, eff_nv))
        llrs = np.concatenate(llr_parts).reshape(-1)
        return llrs[:n_payload], n_payload

    # ---------------- conventional scheme ----------------

    def run_conventional(self, sentence, snr_db: float, policy: HarqPolicy,
                         rng: np.random.Generator) -> SessionResult:
        if policy.scheme != SCHEME_CONVENTIONAL:
            raise ValueError("policy/scheme mismatch")
        if self.table is None or self.code is None:
            raise ValueError("conventional scheme needs a Huffman table and LDPC code")
        code, schedule = self.code, self.schedule
        text = detokenize(sentence.tokens)
        payload = huffman.encode(text, self.table)
        cap = code.k - fec.CRC_WIDTH
        n_blocks = max(1, -(-len(payload) // cap))
        chunks = [payload[i * cap: (i + 1) * cap] for i in range(n_blocks)]
        msgs = [fec.crc_append(c) for c in chunks]
        shortened = [code.k - len(m) for m in msgs]
        codewords = [code.encode(m) for m in msgs]
        received = [[] for _ in range(n_blocks)]
        decoded = [np.zeros(len(m), dtype=np.uint8) for m in msgs]
        passed = [False] * n_blocks

        bits_sent = 0
        phy_bits = 0
        rounds_used = 0
        max_rounds = min(policy.max_rounds, schedule.n_rounds)
        for r in range(1, max_rounds + 1):
            active = [i for i in range(n_blocks) if not passed[i]]
            if not active:
                break
            rounds_used = r
            segments = []
            tx = []
            for i in active:
                seg_bits, _ = fec.select_bits(codewords[i], code, schedule, r,
                                              shortened[i])
                segments.append((i, len(seg_bits)))
                tx.append(seg_bits)
            tx_bits = np.concatenate(tx)
            llrs, carried = self.transmit_bits(tx_bits, snr_db, rng)
            bits_sent += len(tx_bits)
            phy_bits += carried
            offset = 0
            for i, seg_len in segments:
                received[i].append((r, llrs[offset: offset + seg_len]))
                offset += seg_len
                combined = fec.assemble_llrs(received[i], code, schedule,
                                             shortened[i])
                info, _, _ = code.decode_bp(combined)
                decoded[i] = info[: len(msgs[i])]
                passed[i] = fec.crc_check(decoded[i])
            if all(passed):
                break

        success = all(passed)
        decoded_payload = np.concatenate(
            [d[: -fec.CRC_WIDTH] if len(d) > fec.CRC_WIDTH else d for d in decoded])
        decoded_text, _ = huffman.decode(decoded_payload, self.table)
        decoded_tokens = tokenize(decoded_text)
        sim = similarity.sim_edit(decoded_tokens, list(sentence.tokens))
        return SessionResult(success=success, rounds=rounds_used,
                             bits_transmitted=bits_sent, similarity=sim,
                             decoded_tokens=decoded_tokens,
                             scheme=SCHEME_CONVENTIONAL, acceptance="crc",
                             phy_bits_carried=phy_bits)

    # ---------------- scharq scheme ----------------

    def run_scharq(self, sentence, snr_db: float, policy: HarqPolicy,
                   rng: np.random.Generator) -> SessionResult:
        if policy.scheme != SCHEME_SCHARQ:
            raise ValueError("policy/scheme mismatch")
        if self.model is None:
            raise ValueError("scharq needs a codec model")
        model = self.model
        original = list(sentence.tokens)
        blocks = model.encode_blocks(original)
        n_blocks = len(blocks)
        received = {}
        bits_sent = 0
        phy_bits = 0
        success = False
        decoded_tokens: list = []
        sim = 0.0
        rounds_used = 0
        for r in range(1, policy.max_rounds + 1):
            if r == 1:
                new_idx = list(range(min(policy.initial_blocks, n_blocks)))
            else:
                nxt = policy.initial_blocks + r - 2
                new_idx = [nxt] if nxt < n_blocks else []
            if not new_idx:
                break  # nothing new to send; a repeat decode cannot change
            rounds_used = r
            tx_bits = np.concatenate([blocks[i].bits for i in new_idx])
            llrs, carried = self.transmit_bits(tx_bits, snr_db, rng)
            bits_sent += len(tx_bits)
            phy_bits += carried
            rx_bits = modulation.hard_bits(llrs)
            offset = 0
            for i in new_idx:
                bb = len(blocks[i].bits)
                received[i] = rx_bits[offset: offset + bb]
                offset += bb
            decoded_tokens, _ = model.decode_blocks(sorted(received.items()))
            sim = similarity.sim_edit(decoded_tokens, original)
            if policy.acceptance == "exact":
                ok = decoded_tokens == original
            elif policy.acceptance == "similarity":
                ok = similarity.accept(sim, policy.threshold)
            else:
                raise ValueError(f"bad scharq acceptance {policy.acceptance}")
            if ok:
                success = True
                break
        return SessionResult(success=success, rounds=rounds_used,
                             bits_transmitted=bits_sent, similarity=sim,
                             decoded_tokens=decoded_tokens,
                             scheme=SCHEME_SCHARQ, acceptance=policy.acceptance,
                             phy_bits_carried=phy_bits)

    def run_session(self, sentence, snr_db: float, policy: HarqPolicy,
                    rng: np.random.Generator) -> SessionResult:
        if policy.scheme == SCHEME_CONVENTIONAL:
            return self.run_conventional(sentence, snr_db, policy, rng)
        return self.run_scharq(sentence, snr_db, policy, rng)


def session_rng(base_seed: int, scheme: str, snr_db: float,
                sentence_index: int) -> np.random.Generator:
    """Deterministic per-session stream.

    The key uses the physical scheme only, so scharq acceptance variants
    (exact vs similarity) share channel randomness: their success sets then
    nest deterministically.
    """
    chan = 0 if scheme == SCHEME_CONVENTIONAL else 1
    snr_key = int(round(snr_db * 1000)) + 10**6
    seq = np.random.SeedSequence([base_seed, chan, snr_key, sentence_index])
    return np.random.Generator(np.random.PCG64(seq))


def run_point(sim: HarqSimulator, scheme_name: str, policy: HarqPolicy,
              snr_db: float, sentences, base_seed: int, indices=None):
    """Run sessions for one (scheme, snr) point; returns list of results."""
    indices = range(len(sentences)) if indices is None else indices
    out = []
    for i in indices:
        rng = session_rng(base_seed, policy.scheme, snr_db, i)
        out.append(sim.run_session(sentences[i], snr_db, policy, rng))
    return out


def aggregate_row(results, scheme_name: str, policy: HarqPolicy, snr_db: float,
                  base_seed: int) -> SweepRow:
    n = len(results)
    successes = sum(r.success for r in results)
    lo, hi = wilson_interval(successes, n)
    return SweepRow(
        snr_db=snr_db, scheme=scheme_name, acceptance=policy.acceptance,
        metric_name=similarity.METRIC_EDIT,
        success_rate=successes / n if n else 0.0,
        wilson_low=lo, wilson_high=hi,
        mean_bits=float(np.mean([r.bits_transmitted for r in results])) if n else 0.0,
        mean_similarity=float(np.mean([r.similarity for r in results])) if n else 0.0,
        n=n, seed=base_seed)


def sweep(sim: HarqSimulator, scheme_names, snr_list, sentences, base_seed: int,
          workers: int = 1, policies: dict | None = None) -> SweepTable:
    """Success-rate table over (scheme, snr); deterministic and independent
    of the worker count (sessions are keyed by sentence index)."""
    table = SweepTable()
    points = [(name, snr) for name in scheme_names for snr in snr_list]
    for name, snr in points:
        policy = (policies or {}).get(name) or policy_from_name(name)
        if workers > 1:
            results = _run_point_parallel(sim, name, policy, snr, sentences,
                                          base_seed, workers)
        else:
            results = run_point(sim, name, policy, snr, sentences, base_seed)
        table.rows.append(aggregate_row(results, name, policy, snr, base_seed))
    table.rows.sort(key=lambda r: (r.scheme, r.snr_db))
    return table


_POOL_STATE: dict = {}


def _pool_init(sim, policy, snr_db, sentences, base_seed):
    _POOL_STATE.update(sim=sim, policy=policy, snr_db=snr_db,
                       sentences=sentences, base_seed=base_seed)


def _pool_task(indices):
    s = _POOL_STATE
    return run_point(s["sim"], "", s["policy"], s["snr_db"], s["sentences"],
                     s["base_seed"], indices=indices)


def _run_point_parallel(sim, name, policy, snr_db, sentences, base_seed, workers):
    import multiprocessing as mp

    idx_chunks = np.array_split(np.arange(len(sentences)), workers * 4)
    idx_chunks = [c for c in idx_chunks if len(c)]
    ctx = mp.get_context("fork")
    with ctx.Pool(workers, initializer=_pool_init,
                  initargs=(sim, policy, snr_db, sentences, base_seed)) as pool:
        parts = pool.map(_pool_task, idx_chunks)
    return [r for part in parts for r in part]
