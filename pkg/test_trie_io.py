"""
Tests for the .htri binary trie format.
"""

import dataclasses
import os
import struct
import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

import numpy as np
import pytest

from compression import compress
from corpus_gen import gen_patterns
from errors import PatternError, TrieFormatError
from prefix_matching import truncate
from trie_core import build_trie, default_alphabet
from trie_io import deserialize_trie, load_trie, save_trie, serialize_trie


def assert_same_trie(a, b):
    assert a.alphabet.from_symbol == b.alphabet.from_symbol
    assert np.array_equal(a.bitmaps, b.bitmaps)
    assert np.array_equal(a.offsets, b.offsets)
    assert np.array_equal(a.terminal, b.terminal)
    assert a.dictionary == b.dictionary
    assert a.stage == b.stage
    assert a.final_node == b.final_node
    assert a.depth_limit == b.depth_limit


@pytest.fixture
def trie():
    patterns = gen_patterns(21, 52, 60, 12)
    return build_trie(patterns, patterns.alphabet)


def test_header_fields(trie):
    data = serialize_trie(trie)
    magic, version, sigma, node_count, words = struct.unpack("<4sHHIH", data[:14])
    assert magic == b"HTRI"
    assert version == 1
    assert sigma == 52
    assert node_count == trie.node_count
    assert words == 2


def test_round_trip_is_byte_exact(trie):
    data = serialize_trie(trie)
    again = deserialize_trie(data)
    assert_same_trie(trie, again)
    assert serialize_trie(again) == data


def test_round_trip_keeps_compression_and_truncation(trie):
    compressed, _ = compress(trie)
    assert_same_trie(compressed, deserialize_trie(serialize_trie(compressed)))

    prefix = truncate(trie, 4)
    again = deserialize_trie(serialize_trie(prefix))
    assert_same_trie(prefix, again)
    assert again.depth_limit == 4


def test_save_and_load(tmp_path, trie):
    path = str(tmp_path / "set.htri")
    size = save_trie(trie, path)
    assert size == os.path.getsize(path)
    assert_same_trie(trie, load_trie(path))


def test_bad_magic(trie):
    data = bytearray(serialize_trie(trie))
    data[:4] = b"NOPE"
    with pytest.raises(TrieFormatError, match="magic"):
        deserialize_trie(bytes(data))


def test_unsupported_version(trie):
    data = bytearray(serialize_trie(trie))
    data[4:6] = struct.pack("<H", 99)
    with pytest.raises(TrieFormatError, match="version"):
        deserialize_trie(bytes(data))


def test_truncated_file(trie):
    data = serialize_trie(trie)
    for cut in (3, 20, len(data) // 2, len(data) - 1):
        with pytest.raises(TrieFormatError):
            deserialize_trie(data[:cut])


def test_trailing_bytes(trie):
    with pytest.raises(TrieFormatError, match="trailing"):
        deserialize_trie(serialize_trie(trie) + b"\x00")


def test_offset_past_end():
    trie = build_trie([b"AC", b"G"], default_alphabet(4))
    data = bytearray(serialize_trie(trie))
    # root row starts after header, extension and the 4 alphabet bytes; offset word follows one bitmap word
    root_offset_at = 14 + 8 + 4 + 4
    data[root_offset_at:root_offset_at + 4] = struct.pack("<I", 50)
    with pytest.raises(TrieFormatError, match="offset"):
        deserialize_trie(bytes(data))


# ======================
# EXTENSION AND DICTIONARY CHECKS
# ======================

@pytest.fixture
def small_file():
    # dictionary ends with: len u16 = 2, b"GT", id u32 = 1
    return bytearray(serialize_trie(build_trie([b"AC", b"GT"], default_alphabet(4))))


def test_unknown_stage(small_file):
    small_file[14:16] = struct.pack("<H", 3)
    with pytest.raises(TrieFormatError, match="stage"):
        deserialize_trie(bytes(small_file))


def test_final_node_outside_array(small_file):
    small_file[18:22] = struct.pack("<I", 999)
    with pytest.raises(TrieFormatError, match="final node"):
        deserialize_trie(bytes(small_file))


def test_dictionary_id_out_of_range(small_file):
    small_file[-4:] = struct.pack("<I", 99)
    with pytest.raises(TrieFormatError, match="permutation"):
        deserialize_trie(bytes(small_file))


def test_dictionary_duplicate_id(small_file):
    small_file[-4:] = struct.pack("<I", 0)
    with pytest.raises(TrieFormatError, match="permutation"):
        deserialize_trie(bytes(small_file))


def test_dictionary_duplicate_pattern(small_file):
    small_file[-6:-4] = b"AC"
    with pytest.raises(TrieFormatError, match="duplicate"):
        deserialize_trie(bytes(small_file))


def test_dictionary_pattern_outside_alphabet(small_file):
    small_file[-6:-4] = b"GX"
    with pytest.raises(TrieFormatError, match="outside the alphabet"):
        deserialize_trie(bytes(small_file))


def test_corrupt_dictionary_fails_load(tmp_path, small_file):
    small_file[-4:] = struct.pack("<I", 99)
    path = tmp_path / "bad.htri"
    path.write_bytes(bytes(small_file))
    with pytest.raises(TrieFormatError):
        load_trie(str(path))


def test_pattern_longer_than_format_limit():
    dna = default_alphabet(4)
    with pytest.raises(PatternError, match="limit"):
        build_trie([b"A" * 70_000], dna)

    # a trie assembled by hand still cannot be written
    trie = build_trie([b"A"], dna)
    oversized = dataclasses.replace(trie, dictionary={b"A" * 70_000: 0})
    with pytest.raises(PatternError):
        serialize_trie(oversized)
