"""semlink: link-level simulator for semantic-coding HARQ and learned
constellations against a Huffman+LDPC OFDM baseline."""

__version__ = "0.1.0"
