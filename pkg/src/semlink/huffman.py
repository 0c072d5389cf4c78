"""Character-level canonical Huffman coding for the conventional baseline.

The alphabet is lowercase letters, digits, space, apostrophe, an
end-of-sentence marker and a fallback character substituted for anything
else. Codes are canonical (assigned by (length, symbol) order), so a table
is fully determined by its (symbol, length) pairs.

Bit vectors are numpy uint8 arrays of 0/1 values throughout.
"""

import heapq
from dataclasses import dataclass

import numpy as np

EOS_CHAR = "\n"
FALLBACK_CHAR = "\x1a"

ALPHABET = sorted("abcdefghijklmnopqrstuvwxyz0123456789 '" + EOS_CHAR + FALLBACK_CHAR)


def normalize_text(text: str) -> str:
    """Lowercase and replace out-of-alphabet characters with the fallback."""
    allowed = set(ALPHABET) - {EOS_CHAR}
    return "".join(c if c in allowed else FALLBACK_CHAR for c in text.lower())


def char_frequencies(texts) -> dict:
    """Count alphabet characters over normalized texts; EOS counts once per text.

    Every alphabet symbol starts at count 1 so the table always covers the
    full alphabet (rare symbols like the fallback still get codewords).
    """
    freq = dict.fromkeys(ALPHABET, 1)
    for text in texts:
        for c in normalize_text(text):
            freq[c] += 1
        freq[EOS_CHAR] += 1
    return freq


def _code_lengths(frequencies: dict) -> dict:
    """Huffman code lengths with deterministic tie-breaking.

    Heap entries are ordered by (weight, creation_order) so equal-weight
    merges always happen in the same order; leaves are seeded in symbol
    order. A single-symbol alphabet gets a 1-bit code.
    """
    symbols = sorted(frequencies)
    if not symbols:
        raise ValueError("empty frequency map")
    if len(symbols) == 1:
        return {symbols[0]: 1}
    heap = []
    order = 0
    for sym in symbols:
        heapq.heappush(heap, (frequencies[sym], order, [sym]))
        order += 1
    lengths = dict.fromkeys(symbols, 0)
    while len(heap) > 1:
        w1, _, syms1 = heapq.heappop(heap)
        w2, _, syms2 = heapq.heappop(heap)
        for s in syms1 + syms2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, order, syms1 + syms2))
        order += 1
    return lengths


@dataclass
class HuffmanTable:
    """Canonical prefix code: symbol -> bit codeword."""

    lengths: dict
    codes: dict

    @classmethod
    def from_frequencies(cls, frequencies: dict) -> "HuffmanTable":
        lengths = _code_lengths(frequencies)
        return cls.from_lengths(lengths)

    @classmethod
    def from_lengths(cls, lengths: dict) -> "HuffmanTable":
        codes = {}
        code = 0
        prev_len = 0
        for sym in sorted(lengths, key=lambda s: (lengths[s], s)):
            length = lengths[sym]
            code <<= length - prev_len
            bits = np.array([(code >> (length - 1 - i)) & 1 for i in range(length)],
                            dtype=np.uint8)
            codes[sym] = bits
            code += 1
            prev_len = length
        return cls(lengths=dict(lengths), codes=codes)

    def kraft_sum(self) -> float:
        return sum(2.0 ** -l for l in self.lengths.values())

    def expected_length(self, frequencies: dict) -> float:
        total = sum(frequencies.values())
        return sum(frequencies[s] * self.lengths[s] for s in frequencies) / total

    def save(self, path):
        """Text format: one 'codepoint length' pair per line, canonical order."""
        with open(path, "w", encoding="utf-8") as fh:
            for sym in sorted(self.lengths, key=lambda s: (self.lengths[s], s)):
                fh.write(f"{ord(sym)} {self.lengths[sym]}\n")

    @classmethod
    def load(cls, path) -> "HuffmanTable":
        lengths = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                cp, length = line.split()
                lengths[chr(int(cp))] = int(length)
        return cls.from_lengths(lengths)


def build_table(frequencies: dict) -> HuffmanTable:
    return HuffmanTable.from_frequencies(frequencies)


def encode(text: str, table: HuffmanTable) -> np.ndarray:
    """Per-character codewords for the normalized text, terminated by EOS."""
    pieces = [table.codes[c] for c in normalize_text(text)]
    pieces.append(table.codes[EOS_CHAR])
    return np.concatenate(pieces)


def decode(bits: np.ndarray, table: HuffmanTable):
    """Prefix-tree walk; never raises on malformed input.

    Returns (text, clean) where clean is False if the stream was truncated
    mid-symbol, had no EOS, or carried bits after EOS.
    """
    # Match the running bit prefix against (length, value) keys.
    by_code = {}
    for sym, code in table.codes.items():
        value = 0
        for b in code:
            value = (value << 1) | int(b)
        by_code[(len(code), value)] = sym
    max_len = max(table.lengths.values())
    out = []
    acc = 0
    acc_len = 0
    i = 0
    n = len(bits)
    while i < n:
        acc = (acc << 1) | int(bits[i])
        acc_len += 1
        i += 1
        sym = by_code.get((acc_len, acc))
        if sym is not None:
            if sym == EOS_CHAR:
                return "".join(out), i == n
            out.append(sym)
            acc = 0
            acc_len = 0
        elif acc_len > max_len:
            return "".join(out), False
    return "".join(out), False
