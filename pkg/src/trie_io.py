"""
Binary trie format (.htri)

Layout, little-endian throughout:
  header     magic "HTRI", version u16, sigma u16, node_count u32, words_per_bitmap u16
  extension  stage u16, depth_limit u16 (0 = none), final_node u32
  alphabet   sigma bytes, symbol order
  nodes      node_count x (words_per_bitmap bitmap words, then offset word; terminal flag in the MSB)
  dictionary count u32, then per entry: length u16, pattern bytes, pattern id u32
"""

import logging
import struct
from typing import Dict, Tuple

import numpy as np

import config
from errors import AlphabetError, PatternError, TrieFormatError
from trie_core import WORD_DTYPE, Trie, make_alphabet

logger = logging.getLogger("hepfac.trie_io")

_HEADER = struct.Struct("<4sHHIH")
_EXTENSION = struct.Struct("<HHI")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")


def serialize_trie(trie: Trie) -> bytes:
    words = trie.alphabet.words_per_bitmap
    node_count = trie.node_count

    rows = np.empty((node_count, words + 1), dtype=WORD_DTYPE)
    rows[:, :words] = trie.bitmaps
    rows[:, words] = trie.offsets.astype(np.uint32) | (trie.terminal.astype(np.uint32) << np.uint32(31))

    parts = [
        _HEADER.pack(config.TRIE_MAGIC, config.TRIE_FORMAT_VERSION, trie.alphabet.size, node_count, words),
        _EXTENSION.pack(trie.stage, trie.depth_limit or 0, trie.final_node),
        trie.alphabet.from_symbol,
        rows.tobytes(),
        _U32.pack(len(trie.dictionary)),
    ]
    for pid, pattern in enumerate(trie.patterns_by_id):
        if len(pattern) > config.MAX_PATTERN_LENGTH:
            raise PatternError(f"pattern {pid} is {len(pattern):,} bytes; the format stores at most "
                               f"{config.MAX_PATTERN_LENGTH:,}")
        parts.append(_U16.pack(len(pattern)))
        parts.append(pattern)
        parts.append(_U32.pack(pid))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, size: int, what: str) -> memoryview:
        end = self.pos + size
        if end > len(self.data):
            raise TrieFormatError(f"truncated trie file: {what} needs {size} bytes at offset {self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: struct.Struct, what: str) -> Tuple:
        return fmt.unpack(self.take(fmt.size, what))


def deserialize_trie(data: bytes) -> Trie:
    reader = _Reader(data)
    magic, version, sigma, node_count, words = reader.unpack(_HEADER, "header")
    if magic != config.TRIE_MAGIC:
        raise TrieFormatError(f"bad magic {bytes(magic)!r}, expected {config.TRIE_MAGIC!r}")
    if version != config.TRIE_FORMAT_VERSION:
        raise TrieFormatError(f"unsupported format version {version}")
    stage, depth_limit, final_node = reader.unpack(_EXTENSION, "extension")
    if stage > config.MAX_STAGE:
        raise TrieFormatError(f"unknown compression stage {stage}")

    try:
        alphabet = make_alphabet(bytes(reader.take(sigma, "alphabet")))
    except AlphabetError as e:
        raise TrieFormatError(f"corrupt alphabet: {e}")
    if words != alphabet.words_per_bitmap:
        raise TrieFormatError(f"words_per_bitmap {words} does not match sigma {sigma}")
    if node_count < 1:
        raise TrieFormatError("trie has no root node")

    raw = reader.take(node_count * (words + 1) * 4, "node array")
    rows = np.frombuffer(raw, dtype=WORD_DTYPE).reshape(node_count, words + 1)
    bitmaps = rows[:, :words].copy()
    tail = rows[:, words]
    offsets = (tail & np.uint32(0x7FFFFFFF)).astype(np.uint32)
    terminal = (tail >> np.uint32(31)).astype(bool)
    if node_count and int(offsets.max()) >= node_count:
        raise TrieFormatError("node offset points past the end of the node array")
    if final_node >= node_count:
        raise TrieFormatError(f"final node {final_node} is outside the {node_count}-node array")

    (count,) = reader.unpack(_U32, "dictionary count")
    dictionary: Dict[bytes, int] = {}
    for _ in range(count):
        (length,) = reader.unpack(_U16, "dictionary entry")
        pattern = bytes(reader.take(length, "dictionary pattern"))
        (pid,) = reader.unpack(_U32, "dictionary id")
        if not pattern:
            raise TrieFormatError("empty pattern in dictionary")
        if pattern in dictionary:
            raise TrieFormatError(f"duplicate dictionary pattern {pattern!r}")
        try:
            alphabet.encode(pattern)
        except PatternError as e:
            raise TrieFormatError(f"corrupt dictionary: {e}")
        dictionary[pattern] = pid
    if count == 0:
        raise TrieFormatError("empty dictionary")
    # ids must be exactly 0..count-1
    if sorted(dictionary.values()) != list(range(count)):
        raise TrieFormatError(f"dictionary ids are not a permutation of 0..{count - 1}")
    if reader.pos != len(reader.data):
        raise TrieFormatError(f"{len(reader.data) - reader.pos} trailing bytes after dictionary")

    return Trie(
        alphabet=alphabet,
        bitmaps=bitmaps,
        offsets=offsets,
        terminal=terminal,
        dictionary=dictionary,
        depth_limit=depth_limit or None,
        stage=stage,
        final_node=final_node,
    )


def save_trie(trie: Trie, path: str) -> int:
    """Write `trie` to `path`; returns the file size in bytes."""
    data = serialize_trie(trie)
    with open(path, "wb") as f:
        f.write(data)
    logger.info("wrote %s (%d nodes, %d bytes)", path, trie.node_count, len(data))
    return len(data)


def load_trie(path: str) -> Trie:
    with open(path, "rb") as f:
        data = f.read()
    trie = deserialize_trie(data)
    logger.info("loaded %s (%d nodes, sigma=%d)", path, trie.node_count, trie.alphabet.size)
    return trie
