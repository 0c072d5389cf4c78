"""Rate-compatible LDPC coding with CRC for the conventional IR-HARQ baseline.

The mother code is a (1472, 460) rate-5/16 regular column-weight-3 LDPC
built by progressive edge growth (PEG). Columns are permuted once after
construction so the codeword reads [systematic | parity]; higher rates come
from transmitting prefixes of the codeword per a cumulative schedule
(736 / 1104 / 1472 bits for rates 5/8, 5/12, 5/16).

LLR convention: positive means bit 0 is more likely. Shortened (known-zero)
systematic positions are never transmitted; the receiver pins them to +40.
"""

from dataclasses import dataclass, field

import numpy as np

N_DEFAULT = 1472
K_DEFAULT = 460
SHORTENED_LLR = 40.0

# CRC-16-CCITT (CCITT-FALSE): x^16 + x^12 + x^5 + 1, init 0xFFFF.
CRC_POLY = 0x1021
CRC_WIDTH = 16
CRC_INIT = 0xFFFF


def crc_remainder(bits: np.ndarray) -> int:
    """Bit-serial register over an arbitrary-length bit vector, MSB first."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    # Remainder of (init * x^len + m(x) * x^16) mod g(x) over GF(2).
    value = (CRC_INIT << len(bits)) ^ (value << CRC_WIDTH)
    poly = (1 << CRC_WIDTH) | CRC_POLY
    while value.bit_length() > CRC_WIDTH:
        value ^= poly << (value.bit_length() - CRC_WIDTH - 1)
    return value


def crc_append(msg: np.ndarray) -> np.ndarray:
    rem = crc_remainder(msg)
    crc_bits = [(rem >> (CRC_WIDTH - 1 - i)) & 1 for i in range(CRC_WIDTH)]
    return np.concatenate([np.asarray(msg, dtype=np.uint8),
                           np.array(crc_bits, dtype=np.uint8)])


def crc_check(msg_with_crc: np.ndarray) -> bool:
    if len(msg_with_crc) < CRC_WIDTH:
        return False
    msg = msg_with_crc[:-CRC_WIDTH]
    appended = 0
    for b in msg_with_crc[-CRC_WIDTH:]:
        appended = (appended << 1) | int(b)
    return crc_remainder(msg) == appended


@dataclass(frozen=True)
class PunctureSchedule:
    """Cumulative transmitted-bit counts per round over the codeword prefix."""

    cumulative: tuple = (736, 1104, 1472)

    def __post_init__(self):
        cum = self.cumulative
        if len(cum) == 0 or any(x >= y for x, y in zip(cum, cum[1:])):
            raise ValueError("schedule must be strictly increasing")

    @property
    def n_rounds(self):
        return len(self.cumulative)

    def round_slice(self, round_idx: int):
        """Half-open codeword index range sent in 1-based round round_idx."""
        if not 1 <= round_idx <= self.n_rounds:
            raise ValueError(f"round {round_idx} out of range")
        lo = 0 if round_idx == 1 else self.cumulative[round_idx - 2]
        return lo, self.cumulative[round_idx - 1]


def _gf2_pivot_columns(h: np.ndarray):
    """Pivot columns of h scanning right to left; returns None if rank < rows."""
    work = h.copy()
    m = work.shape[0]
    r = 0
    pivots = []
    for c in range(work.shape[1] - 1, -1, -1):
        rows = np.nonzero(work[r:, c])[0]
        if rows.size == 0:
            continue
        pr = r + rows[0]
        if pr != r:
            work[[r, pr]] = work[[pr, r]]
        below = r + 1 + np.nonzero(work[r + 1 :, c])[0]
        work[below] ^= work[r]
        pivots.append(c)
        r += 1
        if r == m:
            return pivots
    return None


def _gf2_inverse(b: np.ndarray) -> np.ndarray:
    m = b.shape[0]
    aug = np.concatenate([b.copy(), np.eye(m, dtype=np.uint8)], axis=1)
    for c in range(m):
        rows = c + np.nonzero(aug[c:, c])[0]
        if rows.size == 0:
            raise ValueError("matrix not invertible")
        if rows[0] != c:
            aug[[c, rows[0]]] = aug[[rows[0], c]]
        others = np.nonzero(aug[:, c])[0]
        others = others[others != c]
        aug[others] ^= aug[c]
    return aug[:, m:]


def _peg_construct(n: int, m: int, col_weight: int, rng: np.random.Generator):
    """Progressive edge growth: per variable, attach edges to checks that are
    unreachable (or maximally distant) in the current Tanner graph, preferring
    low check degree; ties broken by the seeded rng."""
    check_deg = np.zeros(m, dtype=np.int64)
    var_adj = [[] for _ in range(n)]
    check_adj = [[] for _ in range(m)]

    def pick(candidates):
        degs = check_deg[candidates]
        best = candidates[degs == degs.min()]
        return int(best[rng.integers(len(best))]) if len(best) > 1 else int(best[0])

    for v in range(n):
        for _ in range(col_weight):
            if not var_adj[v]:
                cand = np.arange(m)
            else:
                reached = np.zeros(m, dtype=bool)
                reached[var_adj[v]] = True
                seen_v = np.zeros(n, dtype=bool)
                seen_v[v] = True
                frontier_c = list(var_adj[v])
                last_new = None
                while True:
                    new_v = []
                    for c in frontier_c:
                        for u in check_adj[c]:
                            if not seen_v[u]:
                                seen_v[u] = True
                                new_v.append(u)
                    new_c = []
                    for u in new_v:
                        for c in var_adj[u]:
                            if not reached[c]:
                                reached[c] = True
                                new_c.append(c)
                    if not new_c:
                        break
                    last_new = np.array(new_c)
                    frontier_c = new_c
                    if reached.all():
                        break
                unreached = np.nonzero(~reached)[0]
                if unreached.size:
                    cand = unreached
                elif last_new is not None:
                    cand = last_new
                else:
                    # degenerate tiny graph: anything but a repeated edge
                    cand = np.setdiff1d(np.arange(m), np.array(var_adj[v]))
            c = pick(np.asarray(cand))
            var_adj[v].append(c)
            check_adj[c].append(v)
            check_deg[c] += 1

    h = np.zeros((m, n), dtype=np.uint8)
    for v, checks in enumerate(var_adj):
        h[checks, v] = 1
    return h


class LdpcCode:
    """Parity-check matrix in systematic column order plus decoder scaffolding."""

    def __init__(self, h: np.ndarray, k: int, seed: int = -1):
        h = np.asarray(h, dtype=np.uint8)
        self.h = h
        self.m, self.n = h.shape
        self.k = k
        self.seed = seed
        if self.n - self.m != k:
            raise ValueError("H shape inconsistent with K")
        b = h[:, k:]
        binv = _gf2_inverse(b)
        # parity = P @ info over GF(2); float matmul is exact at these sizes
        self._p = ((binv.astype(np.float64) @ h[:, :k].astype(np.float64)) % 2
                   ).astype(np.uint8)
        self._build_decoder_views()

    @classmethod
    def construct(cls, seed: int, n: int = N_DEFAULT, k: int = K_DEFAULT,
                  col_weight: int = 3) -> "LdpcCode":
        """PEG construction; retries with perturbed seed if the parity part
        of the resulting H is singular."""
        m = n - k
        for attempt in range(10):
            rng = np.random.Generator(np.random.PCG64(seed + attempt))
            h = _peg_construct(n, m, col_weight, rng)
            pivots = _gf2_pivot_columns(h)
            if pivots is None:
                continue
            par_cols = sorted(pivots)
            sys_cols = sorted(set(range(n)) - set(par_cols))
            return cls(h[:, sys_cols + par_cols], k, seed=seed)
        raise RuntimeError(f"PEG construction failed for seed {seed}")

    @classmethod
    def from_parity_check(cls, h: np.ndarray) -> "LdpcCode":
        """Arrange an explicit H into systematic column order (toy codes, tests)."""
        h = np.asarray(h, dtype=np.uint8)
        pivots = _gf2_pivot_columns(h)
        if pivots is None:
            raise ValueError("H is rank deficient")
        par_cols = sorted(pivots)
        sys_cols = sorted(set(range(h.shape[1])) - set(par_cols))
        return cls(h[:, sys_cols + par_cols], h.shape[1] - h.shape[0])

    def _build_decoder_views(self):
        rows, cols = np.nonzero(self.h)
        self.edge_rows = rows
        self.edge_cols = cols
        self.n_edges = len(rows)
        row_deg = np.bincount(rows, minlength=self.m)
        self.dc_max = int(row_deg.max())
        # position of each edge within its row (edges are row-major sorted)
        pos = np.concatenate([np.arange(d) for d in row_deg]) if self.m else np.array([])
        self._row_idx = rows
        self._row_pos = pos.astype(np.int64)

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Systematic codeword for up to K info bits (zero-padded if shorter)."""
        info = np.asarray(info, dtype=np.uint8)
        if len(info) > self.k:
            raise ValueError(f"info length {len(info)} exceeds K={self.k}")
        padded = np.zeros(self.k, dtype=np.uint8)
        padded[: len(info)] = info
        parity = (self._p.astype(np.float64) @ padded.astype(np.float64)) % 2
        return np.concatenate([padded, parity.astype(np.uint8)])

    def syndrome(self, codeword: np.ndarray) -> np.ndarray:
        return (self.h.astype(np.float64) @ np.asarray(codeword, np.float64)
                ).astype(np.int64) % 2

    def decode_bp(self, llrs: np.ndarray, max_iters: int = 50):
        """Sum-product decoding; returns (info_bits, converged, iterations)."""
        llrs = np.asarray(llrs, dtype=np.float64)
        if len(llrs) != self.n:
            raise ValueError("LLR length mismatch")
        rows, cols = self.edge_rows, self.edge_cols
        hard = (llrs < 0).astype(np.uint8)
        if not (np.bincount(rows, weights=hard[cols], minlength=self.m) % 2).any():
            return hard[: self.k], True, 0

        c2v = np.zeros(self.n_edges)
        dense = np.empty((self.m, self.dc_max))
        clip = 1.0 - 1e-15
        for it in range(1, max_iters + 1):
            colsum = np.bincount(cols, weights=c2v, minlength=self.n)
            v2c = llrs[cols] + colsum[cols] - c2v
            # leave-one-out products of tanh(v2c/2) within each check row
            dense.fill(1.0)
            dense[self._row_idx, self._row_pos] = np.tanh(0.5 * v2c)
            pref = np.cumprod(dense, axis=1)
            suff = np.cumprod(dense[:, ::-1], axis=1)[:, ::-1]
            left = np.ones_like(dense)
            left[:, 1:] = pref[:, :-1]
            right = np.ones_like(dense)
            right[:, :-1] = suff[:, 1:]
            extr = (left * right)[self._row_idx, self._row_pos]
            c2v = 2.0 * np.arctanh(np.clip(extr, -clip, clip))

            posterior = llrs + np.bincount(cols, weights=c2v, minlength=self.n)
            hard = (posterior < 0).astype(np.uint8)
            syn = np.bincount(rows, weights=hard[cols], minlength=self.m) % 2
            if not syn.any():
                return hard[: self.k], True, it
        return hard[: self.k], False, max_iters

    def save(self, path):
        """Text serialization: header (N, K, seed) then (row, col) coordinates."""
        rows, cols = np.nonzero(self.h)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.n} {self.k} {self.seed}\n")
            for r, c in zip(rows, cols):
                fh.write(f"{r} {c}\n")

    @classmethod
    def load(cls, path) -> "LdpcCode":
        with open(path, encoding="utf-8") as fh:
            n, k, seed = (int(x) for x in fh.readline().split())
            h = np.zeros((n - k, n), dtype=np.uint8)
            for line in fh:
                r, c = (int(x) for x in line.split())
                h[r, c] = 1
        return cls(h, k, seed=seed)


def construct_code(seed: int, n: int = N_DEFAULT, k: int = K_DEFAULT) -> LdpcCode:
    return LdpcCode.construct(seed, n=n, k=k)


def round_positions(code: LdpcCode, schedule: PunctureSchedule, round_idx: int,
                    n_shortened: int = 0) -> np.ndarray:
    """Codeword indices transmitted in a round, excluding shortened positions.

    Shortened positions are the zero-padded tail of the systematic part:
    [K - n_shortened, K).
    """
    lo, hi = schedule.round_slice(round_idx)
    positions = np.arange(lo, hi)
    if n_shortened:
        short_lo = code.k - n_shortened
        keep = (positions < short_lo) | (positions >= code.k)
        positions = positions[keep]
    return positions


def select_bits(codeword: np.ndarray, code: LdpcCode, schedule: PunctureSchedule,
                round_idx: int, n_shortened: int = 0):
    """Bits for one IR round plus the codeword positions they occupy."""
    positions = round_positions(code, schedule, round_idx, n_shortened)
    return np.asarray(codeword)[positions], positions


def assemble_llrs(received, code: LdpcCode, schedule: PunctureSchedule,
                  n_shortened: int = 0) -> np.ndarray:
    """Combine per-round LLRs into a length-N vector.

    received: list of (round_idx, llr array in that round's transmission
    order). Untransmitted positions stay 0; shortened positions get +40.
    Duplicate positions (none under pure IR) would accumulate.
    """
    llrs = np.zeros(code.n)
    seen = set()
    for round_idx, values in received:
        if round_idx in seen:
            raise ValueError(f"duplicate round {round_idx}")
        seen.add(round_idx)
        positions = round_positions(code, schedule, round_idx, n_shortened)
        if len(values) != len(positions):
            raise ValueError("LLR count does not match round size")
        np.add.at(llrs, positions, values)
    if n_shortened:
        llrs[code.k - n_shortened : code.k] = SHORTENED_LLR
    return llrs
