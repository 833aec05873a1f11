"""
Tests for the two compression stages and the tail-length estimators.
"""

import os
import random
import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

import pytest

from compression import (READINGS, compress, expected_reduced_length_closed_form, expected_reduced_length_formula,
                         expected_reduced_length_oracle, expected_suffix_space, merge_final_nodes,
                         merge_tail_chains, reduction_estimate_report)
from corpus_gen import gen_corpus, gen_patterns, plant_patterns
from errors import CompressionError, ValidationError
from match_engine import ScanConfig, scan
from trie_core import build_trie, default_alphabet

SERIAL = ScanConfig(workers=1)
LETTERS = default_alphabet(52)


def brute_force(patterns, text):
    return sorted((i, len(p), pid) for pid, p in enumerate(patterns)
                  for i in range(len(text)) if text.startswith(p, i))


# ======================
# STAGE 1
# ======================

def test_stage1_two_disjoint_patterns():
    trie = build_trie([b"AB", b"CD"], LETTERS)
    assert trie.node_count == 5
    merged, stats = merge_final_nodes(trie)
    assert merged.node_count == 4
    assert merged.stage == 1
    assert stats.merged_terminals == 2
    assert stats.nodes_before == 5 and stats.nodes_after_stage1 == 4


def test_stage1_single_pattern_unchanged():
    trie = build_trie([b"HELLO"], LETTERS)
    merged, stats = merge_final_nodes(trie)
    assert merged.node_count == trie.node_count
    assert stats.merged_terminals == 1


@pytest.mark.parametrize("sigma,count,length", [(4, 50, 10), (52, 1000, 8), (256, 300, 6)])
def test_stage1_fixed_length_saves_all_but_one_leaf(sigma, count, length):
    patterns = gen_patterns(sigma + count, sigma, count, length)
    trie = build_trie(patterns, patterns.alphabet)
    merged, _ = merge_final_nodes(trie)
    assert merged.node_count == trie.node_count - (count - 1)


def test_stage1_keeps_leaves_with_internal_siblings():
    trie = build_trie([b"AB", b"ABC", b"AD"], LETTERS)
    # ABC is the only child of AB and is merged; B and D are siblings where B has a child
    merged, stats = merge_final_nodes(trie)
    assert stats.merged_terminals == 1
    assert merged.node_count == trie.node_count
    text = b"xABCADABx"
    assert scan(merged, text, SERIAL) == scan(trie, text, SERIAL)



def test_stage1_prefix_free_leaf_beside_internal_node():
    # A is a leaf next to C, which still has a child, so A cannot move to the shared terminal
    trie = build_trie([b"A", b"CG"], default_alphabet(4))
    merged, stats = merge_final_nodes(trie)
    assert trie.node_count == 4
    assert stats.merged_terminals == 1
    assert merged.node_count == 4
    assert merged.node_count == trie.node_count - (2 - 1) + 1
    text = b"TACGAC"
    assert scan(merged, text, SERIAL) == scan(trie, text, SERIAL)

def test_stages_refuse_wrong_input():
    trie = build_trie([b"AB", b"CD"], LETTERS)
    merged, _ = merge_final_nodes(trie)
    with pytest.raises(CompressionError):
        merge_final_nodes(merged)
    with pytest.raises(CompressionError):
        merge_tail_chains(trie)


# ======================
# STAGE 2
# ======================

def test_stage2_shared_three_symbol_tail():
    trie = build_trie([b"ABCXYZ", b"DEFXYZ"], LETTERS)
    assert trie.node_count == 13
    compressed, stats = compress(trie)
    assert stats.nodes_after_stage1 == 12
    assert stats.nodes_after_stage2 == 9
    assert stats.merged_tail_nodes == 3


def test_stage2_two_symbol_tail():
    trie = build_trie([b"GOOGLE", b"PEOPLE"], LETTERS)
    compressed, stats = compress(trie)
    assert stats.nodes_after_stage1 - stats.nodes_after_stage2 == 2


def test_stage2_distinct_tails_no_op():
    trie = build_trie([b"AAAAB", b"CCCCD"], LETTERS)
    compressed, stats = compress(trie)
    assert stats.merged_tail_nodes == 0
    assert compressed.node_count == stats.nodes_after_stage1


def test_stage2_anchored_heads_stay_apart():
    trie = build_trie([b"XABCD", b"XEBCD"], LETTERS)
    assert trie.node_count == 10
    compressed, stats = compress(trie)
    assert stats.nodes_after_stage1 == 9
    assert stats.nodes_after_stage2 == 7
    text = b"qXABCDXEBCDXABCE"
    assert scan(compressed, text, SERIAL) == brute_force([b"XABCD", b"XEBCD"], text)


def test_stage2_short_patterns_ignored():
    trie = build_trie([b"ABC", b"DBC"], LETTERS)
    _, stats = compress(trie)
    assert stats.merged_tail_nodes == 0


def test_compress_stats_serialise():
    _, stats = compress(build_trie([b"ABCXYZ", b"DEFXYZ"], LETTERS))
    data = stats.to_dict()
    assert data["nodes_before"] == 13
    assert data["nodes_after_stage2"] == 9
    assert data["reduction_percent"] == pytest.approx(100 * 4 / 13, abs=1e-3)
    assert '"pattern_count": 2' in stats.to_json()


# ======================
# MATCHED LANGUAGE
# ======================

@pytest.mark.parametrize("sigma", [4, 52, 256])
def test_compression_preserves_matches(sigma):
    rng = random.Random(sigma)
    alphabet = default_alphabet(sigma)
    for trial in range(15):
        fixed = gen_patterns(1000 * sigma + trial, sigma, rng.randint(1, 40), rng.randint(4, 9), alphabet)
        extra = {bytes(alphabet.from_symbol[rng.randrange(sigma)] for _ in range(rng.randint(1, 12)))
                 for _ in range(rng.randint(0, 10))}
        patterns = fixed.patterns + sorted(extra - set(fixed.patterns))
        trie = build_trie(patterns, alphabet)
        compressed, _ = compress(trie)

        text = gen_corpus(trial, sigma, 1500, alphabet)
        text = plant_patterns(text, fixed, 30, trial)
        expected = brute_force(patterns, text)
        assert [tuple(m) for m in scan(compressed, text, SERIAL)] == expected
        assert scan(trie, text, SERIAL) == scan(compressed, text, SERIAL)


def test_compressed_dictionary_identical():
    patterns = gen_patterns(4, 26, 40, 7)
    trie = build_trie(patterns, patterns.alphabet)
    compressed, stats = compress(trie)
    assert compressed.dictionary == trie.dictionary
    assert stats.pattern_count == 40


# ======================
# ESTIMATORS
# ======================

def test_expected_suffix_space():
    assert expected_suffix_space(4) == 16
    assert expected_suffix_space(52) == 2704
    assert expected_suffix_space(256) == 65536
    with pytest.raises(ValidationError):
        expected_suffix_space(1)


def test_formula_readings_for_single_pattern():
    assert expected_reduced_length_formula(4, 1, "literal") == 0.0
    assert expected_reduced_length_formula(4, 1, "bose_einstein") == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        expected_reduced_length_formula(4, 1, "other")
    assert READINGS == ("literal", "bose_einstein")


def test_closed_form_limits():
    assert expected_reduced_length_closed_form(4, 1) == pytest.approx(2.0)
    assert expected_reduced_length_closed_form(2, 10_000) == pytest.approx(8.0)
    assert expected_reduced_length_closed_form(4, 8) == pytest.approx(12.905, abs=1e-3)


def test_oracle_single_pattern_is_exact():
    estimate = expected_reduced_length_oracle(4, 1, 500)
    assert estimate.expected_length == 2.0
    assert estimate.stderr == 0.0
    assert estimate.method == "monte_carlo"


def test_oracle_saturates_small_alphabet():
    estimate = expected_reduced_length_oracle(2, 64, 2000)
    assert estimate.expected_length == pytest.approx(8.0, abs=1e-3)


def test_oracle_agrees_with_closed_form():
    for sigma, n in ((4, 8), (52, 100)):
        estimate = expected_reduced_length_oracle(sigma, n, 100_000)
        closed = expected_reduced_length_closed_form(sigma, n)
        assert abs(estimate.expected_length - closed) <= 3 * estimate.stderr
    assert expected_reduced_length_closed_form(52, 100) > 190


def test_oracle_is_deterministic():
    a = expected_reduced_length_oracle(8, 20, 300, seed=17)
    b = expected_reduced_length_oracle(8, 20, 300, seed=17)
    assert a == b


def test_reduction_estimate_report_fields():
    report = reduction_estimate_report(4, 1, 200)
    assert report["r"] == 16
    assert report["oracle"] == 2.0
    assert report["bose_einstein_conforms"]
    assert not report["literal_conforms"]
    assert set(report) == {"sigma", "n", "r", "trials", "oracle", "oracle_stderr", "closed_form",
                           "literal", "literal_conforms", "bose_einstein", "bose_einstein_conforms"}
