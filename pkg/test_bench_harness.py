"""
Tests for the benchmark harness: footprint ratios, trie-size curves,
throughput measurement and CSV output.
"""

import json
import os
import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

import pandas as pd
import pytest

from bench_harness import (EXPERIMENT_ALIASES, EXPERIMENTS, REFERENCE_RATIOS, BenchSettings, ThroughputReport,
                           binary_trie_nodes, compare_footprint, distinct_prefix_count, run_experiment, run_scaling,
                           run_throughput, run_trie_size_curve, run_worker_comparison, table_to_csv, write_table)
from corpus_gen import PatternSet, gen_corpus, gen_patterns
from errors import ValidationError
from match_engine import ScanConfig
from trie_core import build_trie, default_alphabet, memory_report_for

SERIAL = ScanConfig(workers=1)


# ======================
# FOOTPRINT
# ======================

def test_reference_ratios_within_one_percent():
    small = compare_footprint(1_703_023, 32)
    large = compare_footprint(352_921, 256)
    ratios = {**small.reference_ratios, **large.reference_ratios}
    assert set(ratios) == set(REFERENCE_RATIOS)
    for rival, target in REFERENCE_RATIOS.items():
        assert ratios[rival] == pytest.approx(target, rel=0.01)


def test_model_ratios():
    small = compare_footprint(1_703_023, 32).model_ratios
    assert small["pfac"] == pytest.approx(1.875)
    assert small["accw"] == pytest.approx(1.25)
    assert compare_footprint(352_921, 256).model_ratios["gravity"] == pytest.approx(1024 / 36)


def test_footprint_without_reference_figures():
    report = compare_footprint(1, 4)
    assert report.ours_bytes == 8
    assert report.reference_ratios == {}
    assert report.to_dict()["ours_mib"] == "0.0"
    with pytest.raises(ValidationError):
        compare_footprint(0, 4)


# ======================
# TRIE SIZE
# ======================

def test_distinct_prefix_count():
    assert distinct_prefix_count([]) == 0
    assert distinct_prefix_count(["00", "01"]) == 3
    assert distinct_prefix_count([b"AB", b"AD", b"C"]) == 4
    assert distinct_prefix_count([b"AB", b"AB", b"ABC"]) == 3


def test_binary_trie_nodes():
    patterns = PatternSet([b"A", b"C"], default_alphabet(4))
    assert binary_trie_nodes(patterns, 4) == 4


def test_trie_size_curve():
    counts = (1, 10, 100, 1000)
    table = pd.concat([run_trie_size_curve(sigma, counts, 20) for sigma in (4, 52)], ignore_index=True)
    assert list(table["patterns"]) == list(counts) * 2
    assert (table["reduced_bytes"] <= table["bitmapped_bytes"]).all()
    assert (table["bitmapped_bytes"] < table["array_bytes"]).all()

    single = table[table["patterns"] == 1]
    assert (single["reduced_bytes"] == single["bitmapped_bytes"]).all()

    mean = table.groupby("sigma")["reduction_percent"].mean()
    assert mean[4] > 10
    assert mean[4] > mean[52]


def test_trie_size_nodes_match_built_trie():
    table = run_trie_size_curve(52, (10,), 20, seed=3)
    patterns = gen_patterns(3, 52, 10, 20)
    trie = build_trie(patterns, patterns.alphabet)
    assert table.loc[0, "nodes"] == trie.node_count
    assert table.loc[0, "bitmapped_bytes"] == memory_report_for(trie.node_count, 52).total_bytes


# ======================
# THROUGHPUT
# ======================

def test_throughput_report_gbps():
    report = ThroughputReport(bytes=1_000_000, seconds=0.5, workers=1, runs=1)
    assert report.gbps == pytest.approx(0.016)
    assert report.to_dict()["gbps"] == pytest.approx(0.016)


def test_run_throughput_single_run():
    patterns = gen_patterns(1, 52, 10, 20)
    trie = build_trie(patterns, patterns.alphabet)
    report = run_throughput(trie, gen_corpus(2, 52, 20_000), SERIAL, runs=1)
    assert report.runs == 1
    assert report.bytes == 20_000
    assert report.seconds == report.run_seconds[0]
    assert report.gbps > 0


def test_run_throughput_rejects_bad_input():
    trie = build_trie([b"AB"], default_alphabet(52))
    with pytest.raises(ValidationError):
        run_throughput(trie, b"", SERIAL)
    with pytest.raises(ValidationError):
        run_throughput(trie, b"AB", SERIAL, runs=0)


def test_run_scaling_small_grid():
    table = run_scaling([4, 52], [1, 10], 20, 4096, scan_config=SERIAL, runs=1)
    assert len(table) == 4
    for row in table.itertuples():
        assert row.trie_bytes == memory_report_for(row.nodes, row.sigma).total_bytes
        assert row.prefix_nodes <= row.nodes
        assert row.gbps > 0


def test_run_worker_comparison_threads():
    table = run_worker_comparison(52, 10, [8192], [1, 2], runs=1, backend="thread")
    assert list(table["workers"]) == [1, 2]
    assert table.loc[0, "speedup"] == pytest.approx(1.0)


# ======================
# OUTPUT AND EXPERIMENTS
# ======================

def test_table_to_csv_embeds_config(tmp_path):
    table = pd.DataFrame([{"sigma": 4, "nodes": 10}])
    text = table_to_csv(table, {"experiment": "demo", "seed": 1})
    header, columns, row = text.splitlines()
    assert header.startswith("# ")
    assert json.loads(header[2:]) == {"experiment": "demo", "seed": 1}
    assert columns == "sigma,nodes"
    assert row == "4,10"

    path = str(tmp_path / "demo.csv")
    write_table(table, path, {"experiment": "demo"})
    assert pd.read_csv(path, comment="#").equals(table)


def test_footprint_experiment_passes():
    result = run_experiment("footprint", BenchSettings(workers=1))
    assert result.passed
    assert list(result.table["ours_mib"]) == ["12.9", "12.1"]


def test_suffix_estimate_experiment_small():
    result = run_experiment("suffix-estimate", BenchSettings(workers=1, trials=2000))
    assert len(result.table) == 5
    assert {"oracle", "closed_form", "literal", "bose_einstein"} <= set(result.table.columns)


def test_numbered_aliases_resolve():
    assert set(EXPERIMENT_ALIASES.values()) <= set(EXPERIMENTS)
    result = run_experiment("figure3", BenchSettings(workers=1, trials=3))
    assert result.name == "prefix-depth"
    assert result.run_config["trials"] == 3


def test_unknown_experiment():
    with pytest.raises(ValidationError):
        run_experiment("nope", BenchSettings(workers=1))
    assert "footprint" in EXPERIMENTS


@pytest.mark.slow
def test_trie_size_experiment_passes():
    result = run_experiment("trie-size", BenchSettings(workers=1))
    assert result.passed


@pytest.mark.slow
def test_prefix_depth_experiment_passes():
    result = run_experiment("prefix-depth", BenchSettings(workers=1, trials=200))
    assert result.passed


@pytest.mark.slow
@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs at least 4 CPUs")
def test_multi_worker_speedup():
    table = run_worker_comparison(52, 100, [8 << 20], [1, 4], runs=2, backend="process")
    assert float(table["speedup"].iloc[-1]) >= 2.0
