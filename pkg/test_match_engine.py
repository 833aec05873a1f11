"""
Tests for the failure-less scan: single-start walks, chunked parallel scans
and agreement with a brute-force matcher.
"""

import os
import random
import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

import pytest

from compression import compress, merge_final_nodes
from corpus_gen import gen_corpus, gen_patterns, plant_patterns
from errors import ValidationError
from match_engine import MatchResult, ScanConfig, ScanEngine, format_matches, scan, scan_from, scan_two_stage
from prefix_matching import truncate
from trie_core import build_trie, default_alphabet

SERIAL = ScanConfig(workers=1)
LETTERS = default_alphabet(52)


def brute_force(patterns, text):
    return sorted((i, len(p), pid) for pid, p in enumerate(patterns)
                  for i in range(len(text)) if text.startswith(p, i))


def random_instance(rng, sigma, text_size):
    alphabet = default_alphabet(sigma)
    patterns = set()
    for _ in range(rng.randint(1, 25)):
        length = rng.randint(1, 8)
        patterns.add(bytes(alphabet.from_symbol[rng.randrange(sigma)] for _ in range(length)))
    patterns = sorted(patterns)
    rng.shuffle(patterns)
    text = bytearray(alphabet.from_symbol[rng.randrange(sigma)] for _ in range(text_size))
    for _ in range(rng.randint(0, 15)):
        p = rng.choice(patterns)
        if len(p) <= len(text):
            pos = rng.randrange(len(text) - len(p) + 1)
            text[pos:pos + len(p)] = p
    return alphabet, patterns, bytes(text)


# ======================
# SINGLE START
# ======================

def test_scan_from_single_match():
    trie = build_trie([b"AB"], LETTERS)
    assert scan_from(trie, b"XABY", 1) == [MatchResult(1, 2, 0)]
    assert scan_from(trie, b"XABY", 0) == []


def test_scan_from_nested_patterns():
    trie = build_trie([b"AB", b"ABC"], LETTERS)
    assert scan_from(trie, b"ABC", 0) == [MatchResult(0, 2, 0), MatchResult(0, 3, 1)]


def test_scan_from_stops_at_text_end():
    trie = build_trie([b"ABCD"], LETTERS)
    assert scan_from(trie, b"xxABC", 2) == []


def test_scan_from_rejects_bad_start():
    trie = build_trie([b"AB"], LETTERS)
    with pytest.raises(ValidationError):
        scan_from(trie, b"AB", 2)
    with pytest.raises(ValidationError):
        scan_from(trie, b"AB", -1)


def test_bytes_outside_alphabet_end_walks():
    trie = build_trie([b"AC"], default_alphabet(4))
    assert scan(trie, b"A\x00AC\xffA", SERIAL) == [MatchResult(2, 2, 0)]


# ======================
# WHOLE-TEXT SCANS
# ======================

def test_empty_text():
    trie = build_trie([b"AB"], LETTERS)
    assert scan(trie, b"", SERIAL) == []
    assert scan(trie, b"", ScanConfig(workers=2, backend="thread")) == []


def test_back_to_back_repeats_overlap():
    trie = build_trie([b"ACGT"], default_alphabet(4))
    results = scan(trie, b"ACGT" * 50, SERIAL)
    assert [r.start for r in results] == list(range(0, 200, 4))

    trie = build_trie([b"AA"], default_alphabet(4))
    assert [r.start for r in scan(trie, b"AAAAA", SERIAL)] == [0, 1, 2, 3]


@pytest.mark.parametrize("sigma", [4, 52, 256])
def test_scan_matches_brute_force(sigma):
    rng = random.Random(sigma)
    for _ in range(60):
        alphabet, patterns, text = random_instance(rng, sigma, rng.randint(0, 600))
        trie = build_trie(patterns, alphabet)
        expected = brute_force(patterns, text)
        assert [tuple(m) for m in scan(trie, text, SERIAL)] == expected
        compressed, _ = compress(trie)
        assert [tuple(m) for m in scan(compressed, text, SERIAL)] == expected


@pytest.mark.slow
@pytest.mark.parametrize("sigma", [4, 52, 256])
def test_scan_matches_brute_force_many_instances(sigma):
    rng = random.Random(1000 + sigma)
    for _ in range(1000):
        alphabet, patterns, text = random_instance(rng, sigma, rng.randint(0, 2000))
        trie = build_trie(patterns, alphabet)
        assert [tuple(m) for m in scan(trie, text, SERIAL)] == brute_force(patterns, text)


@pytest.mark.parametrize("workers,chunk", [(2, 7), (3, 64), (8, 1)])
def test_threaded_scan_matches_serial(workers, chunk):
    patterns = gen_patterns(77, 4, 40, 6)
    text = plant_patterns(gen_corpus(78, 4, 3000), patterns, 60, 79)
    trie = build_trie(patterns, patterns.alphabet)
    expected = scan(trie, text, SERIAL)
    assert expected
    assert scan(trie, text, ScanConfig(workers=workers, chunk=chunk, backend="thread")) == expected


def test_patterns_straddling_chunk_boundaries():
    pattern = b"ABCDEFGH"
    text = bytearray(b"x" * 200)
    starts = [0, 13, 28, 60, 95, 120, 192]
    for s in starts:
        text[s:s + len(pattern)] = pattern
    trie = build_trie([pattern], LETTERS)
    config = ScanConfig(workers=4, chunk=16, backend="thread")
    assert [r.start for r in scan(trie, bytes(text), config)] == starts


def test_process_backend_matches_serial():
    patterns = gen_patterns(90, 52, 50, 8)
    text = plant_patterns(gen_corpus(91, 52, 20_000), patterns, 100, 92)
    trie, _ = compress(build_trie(patterns, patterns.alphabet))
    expected = scan(trie, text, SERIAL)
    assert len(expected) >= 50
    assert scan(trie, text, ScanConfig(workers=2, chunk=1000, backend="process")) == expected



def test_process_backend_two_stage_matches_serial():
    patterns = gen_patterns(93, 52, 50, 8)
    text = plant_patterns(gen_corpus(94, 52, 20_000), patterns, 100, 95)
    expected = scan(build_trie(patterns, patterns.alphabet), text, SERIAL)
    assert len(expected) >= 50
    prefix_trie = truncate(merge_final_nodes(build_trie(patterns, patterns.alphabet))[0], 3)
    assert prefix_trie.depth_limit == 3
    pooled = scan_two_stage(prefix_trie, text, ScanConfig(workers=2, chunk=1000, backend="process"))
    assert pooled == expected
    assert scan_two_stage(prefix_trie, text, SERIAL) == expected

def test_engine_reuses_pool():
    patterns = gen_patterns(5, 26, 20, 5)
    trie = build_trie(patterns, patterns.alphabet)
    texts = [plant_patterns(gen_corpus(s, 26, 2000), patterns, 10, s) for s in (1, 2, 3)]
    with ScanEngine(trie, ScanConfig(workers=2, chunk=300, backend="thread")) as engine:
        timings = [engine.scan_timed(t) for t in texts]
    for timing, text in zip(timings, texts):
        assert timing.results == scan(trie, text, SERIAL)
        assert timing.scan_seconds >= 0 and timing.merge_seconds >= 0


# ======================
# CONFIG AND OUTPUT
# ======================

def test_scan_config_validation():
    with pytest.raises(ValidationError):
        ScanConfig(workers=0)
    with pytest.raises(ValidationError):
        ScanConfig(workers=1, chunk=0)
    with pytest.raises(ValidationError):
        ScanConfig(workers=1, backend="gpu")


def test_format_matches():
    results = [MatchResult(0, 2, 1), MatchResult(5, 3, 0)]
    assert format_matches(results) == "0\t2\t1\n5\t3\t0\n"
    assert format_matches([]) == ""
