"""
Synthetic Dataset Generation
Mersenne Twister driven patterns and corpora over a restricted alphabet,
with SHA-256 digests to check that generated files are distinct.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional

import numpy as np

import config
from errors import HepfacError, PatternError, ValidationError
from trie_core import Alphabet, default_alphabet

logger = logging.getLogger("hepfac.corpus_gen")

# MT19937 period parameters
N = 624
M = 397
MATRIX_A = np.uint32(0x9908B0DF)
UPPER_MASK = np.uint32(0x80000000)
LOWER_MASK = np.uint32(0x7FFFFFFF)


def _mix(cur: np.ndarray, nxt: np.ndarray, far: np.ndarray) -> np.ndarray:
    y = (cur & UPPER_MASK) | (nxt & LOWER_MASK)
    return far ^ (y >> np.uint32(1)) ^ ((y & np.uint32(1)) * MATRIX_A)


def _temper(y: np.ndarray) -> np.ndarray:
    y = y ^ (y >> np.uint32(11))
    y = y ^ ((y << np.uint32(7)) & np.uint32(0x9D2C5680))
    y = y ^ ((y << np.uint32(15)) & np.uint32(0xEFC60000))
    return y ^ (y >> np.uint32(18))


class Mt19937:
    """32-bit Mersenne Twister with the standard init_genrand seeding."""

    def __init__(self, seed: int = config.DEFAULT_SEED):
        mt = [0] * N
        mt[0] = seed & 0xFFFFFFFF
        for i in range(1, N):
            mt[i] = (1812433253 * (mt[i - 1] ^ (mt[i - 1] >> 30)) + i) & 0xFFFFFFFF
        self.mt = np.array(mt, dtype=np.uint32)
        self.index = N

    def _twist(self):
        mt = self.mt
        # each segment only reads words the scalar loop would already have updated
        mt[0:227] = _mix(mt[0:227], mt[1:228], mt[397:624])
        mt[227:454] = _mix(mt[227:454], mt[228:455], mt[0:227])
        mt[454:623] = _mix(mt[454:623], mt[455:624], mt[227:396])
        mt[623:624] = _mix(mt[623:624], mt[0:1], mt[396:397])
        self.index = 0

    def next(self) -> int:
        if self.index >= N:
            self._twist()
        y = int(self.mt[self.index])
        self.index += 1
        y ^= y >> 11
        y ^= (y << 7) & 0x9D2C5680
        y ^= (y << 15) & 0xEFC60000
        y ^= y >> 18
        return y

    def next_block(self, count: int) -> np.ndarray:
        """The next `count` outputs as a uint32 array (same stream as repeated next())."""
        out = np.empty(count, dtype=np.uint32)
        filled = 0
        while filled < count:
            if self.index >= N:
                self._twist()
            take = min(N - self.index, count - filled)
            out[filled:filled + take] = self.mt[self.index:self.index + take]
            self.index += take
            filled += take
        return _temper(out)

    def symbols(self, count: int, sigma: int) -> np.ndarray:
        """`count` symbol indices in [0, sigma), taken as output mod sigma."""
        return (self.next_block(count) % np.uint32(sigma)).astype(np.int64)


def mt_next(state: Mt19937) -> int:
    return state.next()


# ======================
# PATTERNS AND CORPORA
# ======================

@dataclass
class PatternSet:
    patterns: List[bytes]
    alphabet: Alphabet

    def __post_init__(self):
        seen = set()
        for p in self.patterns:
            if p in seen:
                raise PatternError(f"duplicate pattern {p!r}")
            seen.add(p)
            self.alphabet.encode(p)

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self) -> Iterator[bytes]:
        return iter(self.patterns)

    @property
    def max_length(self) -> int:
        return max((len(p) for p in self.patterns), default=0)

    @property
    def min_length(self) -> int:
        return min((len(p) for p in self.patterns), default=0)


def _symbol_bytes(alphabet: Alphabet) -> np.ndarray:
    return np.frombuffer(alphabet.from_symbol, dtype=np.uint8)


def gen_patterns(seed: int, sigma: int, count: int, length: int,
                 alphabet: Optional[Alphabet] = None) -> PatternSet:
    """
    Draw `count` distinct uniform patterns of `length` symbols.

    Args:
        seed: MT19937 seed
        sigma: Alphabet size
        count: Number of patterns
        length: Symbols per pattern
        alphabet: Byte mapping; defaults to default_alphabet(sigma)

    Returns:
        PatternSet in draw order (duplicates are rejected and redrawn)
    """
    alphabet = alphabet or default_alphabet(sigma)
    if alphabet.size != sigma:
        raise ValidationError(f"alphabet has {alphabet.size} symbols, expected {sigma}")
    if count < 1 or length < 1:
        raise PatternError(f"need count >= 1 and length >= 1, got count={count} length={length}")
    if sigma ** length < count:
        raise PatternError(f"cannot draw {count} distinct patterns of length {length} over {sigma} symbols")

    mt = Mt19937(seed)
    lut = _symbol_bytes(alphabet)
    seen = set()
    patterns: List[bytes] = []
    while len(patterns) < count:
        missing = count - len(patterns)
        rows = lut[mt.symbols(missing * length, sigma)].reshape(missing, length)
        for row in rows:
            p = row.tobytes()
            if p not in seen:
                seen.add(p)
                patterns.append(p)
    return PatternSet(patterns, alphabet)


def gen_corpus(seed: int, sigma: int, size: int, alphabet: Optional[Alphabet] = None) -> bytes:
    """Exactly `size` uniform alphabet bytes drawn from MT19937(seed)."""
    if size < 1:
        raise ValidationError(f"corpus size must be at least 1 byte, got {size}")
    alphabet = alphabet or default_alphabet(sigma)
    return _symbol_bytes(alphabet)[Mt19937(seed).symbols(size, sigma)].tobytes()


def dataset_digest(text: bytes) -> str:
    return hashlib.sha256(text).hexdigest()


def plant_patterns(corpus: bytes, patterns: PatternSet, k: int, seed: int) -> bytes:
    """Overwrite `k` random corpus windows with randomly chosen patterns."""
    if k < 0:
        raise ValidationError(f"plant count must be >= 0, got {k}")
    out = bytearray(corpus)
    mt = Mt19937(seed)
    for _ in range(k):
        p = patterns.patterns[mt.next() % len(patterns)]
        if len(p) > len(out):
            raise ValidationError(f"pattern of length {len(p)} does not fit in a {len(out)}-byte corpus")
        pos = mt.next() % (len(out) - len(p) + 1)
        out[pos:pos + len(p)] = p
    return bytes(out)


def symbol_histogram(corpus: bytes, alphabet: Alphabet) -> np.ndarray:
    """Per-symbol occurrence counts (length sigma)."""
    symbols = alphabet.symbol_table()[np.frombuffer(corpus, dtype=np.uint8)]
    if symbols.size and symbols.min() < 0:
        bad = np.frombuffer(corpus, dtype=np.uint8)[symbols < 0][0]
        raise ValidationError(f"byte 0x{int(bad):02x} in corpus is outside the alphabet")
    return np.bincount(symbols, minlength=alphabet.size)


# ======================
# FILES
# ======================

def write_pattern_file(path: str, patterns: PatternSet) -> None:
    """One pattern per line; hex-encoded when a pattern contains a line break byte."""
    use_hex = any(b"\n" in p or b"\r" in p for p in patterns)
    with open(path, "wb") as f:
        f.write(b"#format=hex\n" if use_hex else b"#format=raw\n")
        for p in patterns:
            f.write((p.hex().encode("ascii") if use_hex else p) + b"\n")


def read_pattern_file(path: str, alphabet: Alphabet) -> PatternSet:
    with open(path, "rb") as f:
        lines = f.read().split(b"\n")

    use_hex = False
    if lines and lines[0].startswith(b"#format="):
        fmt = lines.pop(0).rstrip(b"\r")[len(b"#format="):]
        if fmt not in (b"raw", b"hex"):
            raise PatternError(f"unknown pattern file format {fmt.decode('latin-1')!r} in {path}")
        use_hex = fmt == b"hex"

    patterns = []
    for line in lines:
        line = line.rstrip(b"\r")
        if not line:
            continue
        if use_hex:
            try:
                line = bytes.fromhex(line.decode("ascii"))
            except ValueError:
                raise PatternError(f"bad hex pattern line {line!r} in {path}")
        patterns.append(line)
    if not patterns:
        raise PatternError(f"no patterns in {path}")
    return PatternSet(patterns, alphabet)


def generate_datasets(out_dir: str, seed: int, sigma: int, pattern_count: int,
                      pattern_length: int = config.DEFAULT_PATTERN_LENGTH,
                      corpus_bytes: int = config.DESK_CORPUS_BYTES,
                      files: int = config.DEFAULT_FILES, plant: int = 0) -> Dict:
    """
    Write patterns.txt, corpus_part{i}.bin (i = 1..files) and manifest.json.

    Patterns use `seed`; corpus file i uses seed + i.

    Returns:
        The manifest dict
    """
    os.makedirs(out_dir, exist_ok=True)
    alphabet = default_alphabet(sigma)
    patterns = gen_patterns(seed, sigma, pattern_count, pattern_length, alphabet)
    pattern_path = os.path.join(out_dir, "patterns.txt")
    write_pattern_file(pattern_path, patterns)

    entries = []
    for i in range(1, files + 1):
        corpus = gen_corpus(seed + i, sigma, corpus_bytes, alphabet)
        if plant:
            corpus = plant_patterns(corpus, patterns, plant, seed + i)
        name = f"corpus_part{i}.bin"
        with open(os.path.join(out_dir, name), "wb") as f:
            f.write(corpus)
        entries.append({"path": name, "seed": seed + i, "sigma": sigma,
                        "bytes": len(corpus), "sha256": dataset_digest(corpus)})
        logger.info("wrote %s (%d bytes)", name, len(corpus))

    digests = [e["sha256"] for e in entries]
    if len(set(digests)) != len(digests):
        raise HepfacError("generated corpus files are not pairwise distinct")

    manifest = {
        "seed": seed,
        "sigma": sigma,
        "alphabet": alphabet.from_symbol.hex(),
        "pattern_count": pattern_count,
        "pattern_length": pattern_length,
        "patterns": "patterns.txt",
        "plant": plant,
        "files": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
