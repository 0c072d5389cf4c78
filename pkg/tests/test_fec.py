from collections import Counter

import numpy as np
import pytest

from semlink import fec
from semlink.fec import (LdpcCode, PunctureSchedule, assemble_llrs, crc_append,
                         crc_check, crc_remainder, round_positions, select_bits)

# Hamming-style (7,4) toy code used for hand-checkable encode and ML-vs-BP.
H_TOY = np.array([
    [1, 1, 1, 0, 1, 0, 0],
    [1, 1, 0, 1, 0, 1, 0],
    [1, 0, 1, 1, 0, 0, 1],
], dtype=np.uint8)


@pytest.fixture(scope="session")
def default_code():
    return fec.construct_code(seed=5)


def bpsk_llrs(codeword, snr_db, rng):
    sigma2 = 10.0 ** (-snr_db / 10.0)
    x = 1.0 - 2.0 * codeword.astype(np.float64)
    y = x + rng.standard_normal(len(x)) * np.sqrt(sigma2)
    return 2.0 * y / sigma2


def batch_crc16(bits_matrix):
    """Independent vectorized CRC-16-CCITT register, one row per message."""
    reg = np.full(len(bits_matrix), 0xFFFF, dtype=np.int64)
    for col in range(bits_matrix.shape[1]):
        fb = ((reg >> 15) & 1) ^ bits_matrix[:, col]
        reg = ((reg << 1) & 0xFFFF) ^ (fb * 0x1021)
    return reg


class TestCrc:
    def test_known_vector(self):
        bits = np.unpackbits(np.frombuffer(b"123456789", dtype=np.uint8))
        assert crc_remainder(bits) == 0x29B1
        assert batch_crc16(bits[None, :].astype(np.int64))[0] == 0x29B1

    def test_append_check_random(self):
        rng = np.random.Generator(np.random.PCG64(0))
        for _ in range(50):
            msg = rng.integers(0, 2, rng.integers(1, 300)).astype(np.uint8)
            assert crc_check(crc_append(msg))

    def test_single_bit_flips(self):
        rng = np.random.Generator(np.random.PCG64(1))
        msg = rng.integers(0, 2, 80).astype(np.uint8)
        coded = crc_append(msg)
        for i in range(len(coded)):
            bad = coded.copy()
            bad[i] ^= 1
            assert not crc_check(bad), f"missed flip at {i}"

    def test_short_input(self):
        assert not crc_check(np.zeros(10, dtype=np.uint8))

    def test_matches_independent_register(self):
        rng = np.random.Generator(np.random.PCG64(2))
        msgs = rng.integers(0, 2, size=(100, 56))
        batch = batch_crc16(msgs)
        for row, expect in zip(msgs, batch):
            assert crc_remainder(row.astype(np.uint8)) == expect

    def test_all_bursts_up_to_16_detected(self):
        # exhaustive bursts on a short message: every error confined to a
        # window of <= 16 bits must fail the check
        rng = np.random.Generator(np.random.PCG64(3))
        msg = rng.integers(0, 2, 8).astype(np.uint8)
        coded = crc_append(msg).astype(np.int64)
        n = len(coded)
        corrupted = []
        for length in range(1, 17):
            if length == 1:
                patterns = [np.array([1])]
            else:
                inner = length - 2
                patterns = []
                for v in range(1 << inner):
                    mid = [(v >> i) & 1 for i in range(inner)]
                    patterns.append(np.array([1] + mid + [1]))
            for pat in patterns:
                for off in range(n - length + 1):
                    e = np.zeros(n, dtype=np.int64)
                    e[off : off + length] = pat
                    corrupted.append(coded ^ e)
        corrupted = np.array(corrupted)
        regs = batch_crc16(corrupted[:, :-16])
        weights = 1 << np.arange(15, -1, -1)
        appended = corrupted[:, -16:] @ weights
        assert (regs != appended).all(), "an in-window burst passed the CRC"


class TestSchedule:
    def test_round_slices(self):
        s = PunctureSchedule()
        assert s.round_slice(1) == (0, 736)
        assert s.round_slice(2) == (736, 1104)
        assert s.round_slice(3) == (1104, 1472)

    def test_round_out_of_range(self):
        s = PunctureSchedule()
        with pytest.raises(ValueError):
            s.round_slice(0)
        with pytest.raises(ValueError):
            s.round_slice(4)

    def test_not_increasing_rejected(self):
        with pytest.raises(ValueError):
            PunctureSchedule((700, 700, 1472))


class TestConstruction:
    def test_deterministic(self):
        a = fec.construct_code(seed=1, n=368, k=115)
        b = fec.construct_code(seed=1, n=368, k=115)
        assert np.array_equal(a.h, b.h)

    def test_column_weight_three(self, default_code):
        assert (default_code.h.sum(axis=0) == 3).all()

    def test_rate(self, default_code):
        assert default_code.k / default_code.n == 460 / 1472 == 5 / 16

    def test_girth_at_least_six(self, default_code):
        # independent cycle search: a 4-cycle is a column pair sharing 2 rows
        seen = Counter()
        for r in range(default_code.m):
            cols = np.nonzero(default_code.h[r])[0]
            for i in range(len(cols)):
                for j in range(i + 1, len(cols)):
                    seen[(cols[i], cols[j])] += 1
        assert all(v == 1 for v in seen.values()), "found a 4-cycle"

    def test_save_load(self, default_code, tmp_path):
        default_code.save(tmp_path / "h.txt")
        again = LdpcCode.load(tmp_path / "h.txt")
        assert np.array_equal(again.h, default_code.h)
        assert again.k == default_code.k and again.seed == default_code.seed


class TestEncode:
    def test_all_zero(self, default_code):
        cw = default_code.encode(np.zeros(460, dtype=np.uint8))
        assert not cw.any()

    def test_zero_syndrome_random(self, default_code):
        rng = np.random.Generator(np.random.PCG64(4))
        for _ in range(50):
            info = rng.integers(0, 2, 460).astype(np.uint8)
            assert not default_code.syndrome(default_code.encode(info)).any()

    def test_shortening_pad(self, default_code):
        info = np.ones(100, dtype=np.uint8)
        cw = default_code.encode(info)
        assert (cw[:100] == 1).all() and not cw[100:460].any()

    def test_too_long(self, default_code):
        with pytest.raises(ValueError):
            default_code.encode(np.zeros(461, dtype=np.uint8))

    def test_toy_code_hand_parity(self):
        # H_TOY's right 3x3 block is the identity, so the systematic
        # arrangement keeps column order and parity = A @ d over GF(2):
        #   p0 = d0+d1+d2, p1 = d0+d1+d3, p2 = d0+d2+d3
        # For d = 1011: p = (1+0+1, 1+0+1, 1+1+1) = (0, 0, 1).
        code = LdpcCode.from_parity_check(H_TOY)
        cw = code.encode(np.array([1, 0, 1, 1], dtype=np.uint8))
        assert np.array_equal(cw, [1, 0, 1, 1, 0, 0, 1])


class TestSelectAndAssemble:
    def test_round1_full_736(self, default_code):
        cw = default_code.encode(np.zeros(460, dtype=np.uint8))
        bits, pos = select_bits(cw, default_code, PunctureSchedule(), 1)
        assert len(bits) == 736  # 460/736 = 5/8
        assert pos[0] == 0 and pos[-1] == 735

    def test_round3_increment(self, default_code):
        cw = default_code.encode(np.zeros(460, dtype=np.uint8))
        bits, _ = select_bits(cw, default_code, PunctureSchedule(), 3)
        assert len(bits) == 368

    def test_partition(self, default_code):
        s = PunctureSchedule()
        all_pos = np.concatenate(
            [round_positions(default_code, s, r) for r in (1, 2, 3)])
        assert len(all_pos) == default_code.n
        assert np.array_equal(np.sort(all_pos), np.arange(default_code.n))

    def test_shortened_excluded(self, default_code):
        n_short = 400
        pos = round_positions(default_code, PunctureSchedule(), 1, n_short)
        assert len(pos) == 736 - n_short
        lo = default_code.k - n_short
        assert not ((pos >= lo) & (pos < default_code.k)).any()

    def test_assemble_round1_only(self, default_code):
        llrs = assemble_llrs([(1, np.ones(736))], default_code, PunctureSchedule())
        assert (llrs[:736] == 1.0).all()
        assert not llrs[736:].any()

    def test_assemble_all_rounds_no_gaps(self, default_code):
        s = PunctureSchedule()
        segs = [(r, np.ones(len(round_positions(default_code, s, r))))
                for r in (1, 2, 3)]
        llrs = assemble_llrs(segs, default_code, s)
        assert (llrs != 0).all()

    def test_shortened_pinned(self, default_code):
        n_short = 200
        s = PunctureSchedule()
        segs = [(1, np.full(len(round_positions(default_code, s, 1, n_short)),
                            -9.0))]
        llrs = assemble_llrs(segs, default_code, s, n_short)
        lo = default_code.k - n_short
        assert (llrs[lo:default_code.k] == fec.SHORTENED_LLR).all()

    def test_duplicate_round_rejected(self, default_code):
        with pytest.raises(ValueError):
            assemble_llrs([(1, np.ones(736)), (1, np.ones(736))],
                          default_code, PunctureSchedule())

    def test_shortened_decode_to_zero(self, default_code):
        # +40 LLR dominates: shortened bits decode to 0 regardless of channel
        rng = np.random.Generator(np.random.PCG64(5))
        n_short = 300
        info = np.concatenate([rng.integers(0, 2, 160), np.zeros(300)]).astype(np.uint8)
        cw = default_code.encode(info)
        s = PunctureSchedule()
        segs = []
        for r in (1, 2, 3):
            pos = round_positions(default_code, s, r, n_short)
            segs.append((r, bpsk_llrs(cw[pos], 2.0, rng)))
        llrs = assemble_llrs(segs, default_code, s, n_short)
        decoded, conv, _ = default_code.decode_bp(llrs)
        assert conv and not decoded[160:460].any()


class TestDecodeBp:
    def test_noiseless_immediate(self, default_code):
        rng = np.random.Generator(np.random.PCG64(6))
        info = rng.integers(0, 2, 460).astype(np.uint8)
        cw = default_code.encode(info)
        llrs = np.where(cw == 0, 8.0, -8.0)
        decoded, conv, iters = default_code.decode_bp(llrs)
        assert conv and iters <= 1 and np.array_equal(decoded, info)

    def test_single_flip_corrected(self, default_code):
        rng = np.random.Generator(np.random.PCG64(7))
        info = rng.integers(0, 2, 460).astype(np.uint8)
        cw = default_code.encode(info)
        llrs = np.where(cw == 0, 8.0, -8.0)
        llrs[777] = -llrs[777]
        decoded, conv, _ = default_code.decode_bp(llrs)
        assert conv and np.array_equal(decoded, info)

    def test_llr_length_checked(self, default_code):
        with pytest.raises(ValueError):
            default_code.decode_bp(np.zeros(10))

    def test_determinism(self, default_code):
        rng = np.random.Generator(np.random.PCG64(8))
        info = rng.integers(0, 2, 460).astype(np.uint8)
        llrs = bpsk_llrs(default_code.encode(info), 1.0, rng)
        out1 = default_code.decode_bp(llrs.copy())
        out2 = default_code.decode_bp(llrs.copy())
        assert np.array_equal(out1[0], out2[0])
        assert out1[1:] == out2[1:]

    def test_toy_bp_matches_ml(self):
        # brute-force maximum likelihood over all 16 codewords as the oracle
        code = LdpcCode.from_parity_check(H_TOY)
        books = np.array([code.encode(np.array([(m >> i) & 1 for i in range(4)],
                                               dtype=np.uint8))
                          for m in range(16)])
        rng = np.random.Generator(np.random.PCG64(9))
        snr_db = 7.0
        sigma2 = 10.0 ** (-snr_db / 10.0)
        agree = 0
        trials = 3000
        for _ in range(trials):
            info = rng.integers(0, 2, 4).astype(np.uint8)
            x = 1.0 - 2.0 * code.encode(info)
            y = x + rng.standard_normal(7) * np.sqrt(sigma2)
            ml = books[np.argmin(((1.0 - 2.0 * books) - y) ** 2 @ np.ones(7))]
            bp, _, _ = code.decode_bp(2.0 * y / sigma2, max_iters=50)
            agree += np.array_equal(bp, ml[:4])
        assert agree / trials >= 0.99

    def test_rate_compatibility_monotone(self, default_code):
        # success never drops as more IR rounds are combined (300 blocks)
        rng = np.random.Generator(np.random.PCG64(10))
        s = PunctureSchedule()
        n_blocks = 300
        wins = np.zeros(3)
        for _ in range(n_blocks):
            info = rng.integers(0, 2, 460).astype(np.uint8)
            cw = default_code.encode(info)
            segs = []
            for r in (1, 2, 3):
                pos = round_positions(default_code, s, r)
                segs.append((r, bpsk_llrs(cw[pos], 0.0, rng)))
                llrs = assemble_llrs(segs, default_code, s)
                decoded, conv, _ = default_code.decode_bp(llrs)
                wins[r - 1] += conv and np.array_equal(decoded, info)
        rates = wins / n_blocks
        sigma = np.sqrt(0.25 / n_blocks)
        assert rates[0] <= rates[1] + 3 * sigma
        assert rates[1] <= rates[2] + 3 * sigma
