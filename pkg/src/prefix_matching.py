"""
Prefix Matching
Truncates the trie to a fixed depth, verifies candidate hits against the
full patterns, and measures how deep a prefix has to be for a pattern set
to be matched without false positives over different alphabet sizes.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from compression import compress
from corpus_gen import PatternSet, gen_corpus, gen_patterns
from errors import ValidationError
from match_engine import MatchResult, ScanConfig, candidate_starts, scan_two_stage, verified_matches
from trie_core import Trie, build_trie, graph_from_trie, layout_graph, memory_report

logger = logging.getLogger("hepfac.prefix_matching")


@dataclass(frozen=True)
class PrefixConfig:
    depth: int
    verify: bool = True

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError(f"prefix depth must be >= 1, got {self.depth}")


@dataclass(frozen=True)
class PrefixAnalysis:
    sigma: int
    pattern_count: int
    min_unique_depth: int
    mean_depth_over_trials: float
    trials: int
    mean_unique_depth: float = 0.0
    mean_fp_free_depth: float = 0.0
    stderr: float = 0.0
    window: int = 0


# ======================
# TRUNCATION
# ======================

def truncate(trie: Trie, depth: int) -> Trie:
    """
    Cut the trie at `depth`; nodes at that depth become candidate terminals.

    Args:
        trie: Uncompressed or stage-1 trie
        depth: Truncation depth (>= 1)

    Returns:
        New trie with depth_limit set, or the same structure flagged
        truncation_noop when no pattern is longer than `depth`
    """
    if depth < 1:
        raise ValidationError(f"truncation depth must be >= 1, got {depth}")
    if trie.stage > 1:
        raise ValidationError(f"cannot truncate a stage-{trie.stage} trie; truncate before tail merging")
    if trie.depth_limit is not None:
        raise ValidationError(f"trie is already truncated at depth {trie.depth_limit}")
    if depth >= trie.max_pattern_length:
        logger.info("truncation depth %d >= longest pattern (%d); trie unchanged", depth, trie.max_pattern_length)
        return dataclasses.replace(trie, truncation_noop=True)

    graph = graph_from_trie(trie)
    for node, d in graph.depths().items():
        if d == depth:
            graph.children[node] = []
            graph.terminal[node] = True
    return layout_graph(graph, trie.alphabet, trie.dictionary, stage=trie.stage, depth_limit=depth)


def build_prefix_index(dictionary: Dict[bytes, int], depth: int) -> Dict[bytes, List[Tuple[bytes, int]]]:
    """Patterns bucketed by their first `depth` bytes (whole pattern when shorter)."""
    index: Dict[bytes, List[Tuple[bytes, int]]] = {}
    for pattern, pid in sorted(dictionary.items(), key=lambda item: (len(item[0]), item[1])):
        index.setdefault(pattern[:depth], []).append((pattern, pid))
    return index


def verify_candidate(text: bytes, start: int, trie: Trie) -> List[MatchResult]:
    """Full-pattern check of a candidate start; exact matches only, shortest first."""
    depth = trie.depth_limit if trie.depth_limit is not None else trie.max_pattern_length
    index = trie.prefix_index if trie.depth_limit is not None else build_prefix_index(trie.dictionary, depth)
    return [MatchResult(*m) for m in verified_matches(text, start, index, depth)]


def prefix_scan(trie: Trie, text: bytes, prefix: PrefixConfig,
                scan_config: Optional[ScanConfig] = None) -> List[MatchResult]:
    """
    Truncate `trie` at prefix.depth and scan `text` with it.

    With verify off, each candidate start is reported unverified as
    MatchResult(start, 0, -1).
    """
    prefix_trie = truncate(trie, prefix.depth)
    if prefix.verify:
        return scan_two_stage(prefix_trie, text, scan_config)
    return [MatchResult(start, 0, -1) for start in candidate_starts(prefix_trie, text)]


# ======================
# DEPTH SELECTION
# ======================

def minimal_unique_prefix(patterns) -> int:
    """Smallest d at which all d-prefixes (whole pattern when shorter) are pairwise distinct."""
    ordered = sorted(getattr(patterns, "patterns", patterns))
    depth = 1
    for a, b in zip(ordered, ordered[1:]):
        lcp = 0
        limit = min(len(a), len(b))
        while lcp < limit and a[lcp] == b[lcp]:
            lcp += 1
        depth = max(depth, lcp + 1)
    return depth


def choose_depth(sigma: int, patterns) -> int:
    """Fixed depth for large alphabets; otherwise the set's unique-prefix depth, capped at its shortest pattern."""
    if sigma > config.LARGE_ALPHABET_THRESHOLD:
        return config.LARGE_ALPHABET_DEPTH
    items = getattr(patterns, "patterns", patterns)
    return max(1, min(minimal_unique_prefix(items), min(len(p) for p in items)))


def _symbols(data: bytes, table: np.ndarray) -> np.ndarray:
    symbols = table[np.frombuffer(data, dtype=np.uint8)].astype(np.int64)
    if symbols.size and symbols.min() < 0:
        raise ValidationError("input contains bytes outside the alphabet")
    return symbols


def _pack(symbols: np.ndarray, width: int, bits: int) -> np.ndarray:
    """Pack every `width`-symbol window (one per row start) into a uint64 key, first symbol highest."""
    count = symbols.shape[-1] - width + 1
    keys = np.zeros(symbols.shape[:-1] + (count,), dtype=np.uint64)
    for j in range(width):
        keys = (keys << np.uint64(bits)) | symbols[..., j:j + count].astype(np.uint64)
    return keys


def fp_free_depth(patterns: PatternSet, text: bytes) -> int:
    """
    Smallest prefix depth that yields no false-positive candidate on `text`.

    A position whose text shares l leading symbols with some pattern (without
    matching it fully) is a false candidate for every depth <= l, so the
    answer is 1 + the largest such l.
    """
    alphabet = patterns.alphabet
    bits = max(1, math.ceil(math.log2(alphabet.size)))
    width = min(patterns.min_length, 64 // bits, len(text))
    if width < 1:
        return 1
    table = alphabet.symbol_table()

    pattern_syms = [_symbols(p[:width], table) for p in patterns]
    pattern_keys = np.unique(_pack(np.stack(pattern_syms), width, bits)[:, 0])
    text_keys = _pack(_symbols(text, table), width, bits)

    idx = np.searchsorted(pattern_keys, text_keys)
    lcp = np.zeros(text_keys.shape, dtype=np.int64)
    mask = np.uint64((1 << bits) - 1)
    for neighbour in (np.clip(idx - 1, 0, len(pattern_keys) - 1), np.clip(idx, 0, len(pattern_keys) - 1)):
        other = pattern_keys[neighbour]
        run = np.zeros(text_keys.shape, dtype=np.int64)
        alive = np.ones(text_keys.shape, dtype=bool)
        for j in range(width):
            shift = np.uint64(bits * (width - 1 - j))
            alive &= ((text_keys >> shift) & mask) == ((other >> shift) & mask)
            run += alive
        np.maximum(lcp, run, out=lcp)

    below = lcp[lcp < width]
    longest = int(below.max()) if below.size else 0

    # positions that agree on the whole key, plus the last few starts with no
    # full key, are finished byte by byte
    by_key: Dict[bytes, List[bytes]] = {}
    for p in patterns:
        by_key.setdefault(p[:width], []).append(p)
    exact_check = [(pos, by_key.get(text[pos:pos + width], [])) for pos in np.flatnonzero(lcp == width).tolist()]
    exact_check += [(pos, patterns.patterns) for pos in range(len(text_keys), len(text))]
    for pos, bucket in exact_check:
        if any(text.startswith(p, pos) for p in bucket):
            continue
        for p in bucket:
            run = 0
            limit = min(len(p), len(text) - pos)
            while run < limit and text[pos + run] == p[run]:
                run += 1
            longest = max(longest, run)
    return longest + 1


# ======================
# ANALYSIS
# ======================

def analyze_prefix_vs_alphabet(sigma_list: Sequence[int], pattern_count: int, pattern_length: int,
                               trials: int, seed: int = config.DEFAULT_SEED,
                               window: int = config.PREFIX_WINDOW) -> List[PrefixAnalysis]:
    """
    Required prefix depth per alphabet size, averaged over random pattern sets.

    Per trial the required depth is the larger of the set's unique-prefix
    depth and its false-positive-free depth on a `window`-symbol random
    text (window=0 keeps only the unique-prefix depth).

    Args:
        sigma_list: Alphabet sizes to sweep
        pattern_count: Patterns per set
        pattern_length: Symbols per pattern
        trials: Random pattern sets per alphabet size
        seed: Trial t uses seed + 2t for patterns and seed + 2t + 1 for the text
        window: Random text length per trial

    Returns:
        One PrefixAnalysis per alphabet size, in input order
    """
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    results = []
    for sigma in sigma_list:
        unique = np.empty(trials)
        fp_free = np.zeros(trials)
        for t in range(trials):
            patterns = gen_patterns(seed + 2 * t, sigma, pattern_count, pattern_length)
            unique[t] = minimal_unique_prefix(patterns)
            if window:
                fp_free[t] = fp_free_depth(patterns, gen_corpus(seed + 2 * t + 1, sigma, window, patterns.alphabet))
        required = np.maximum(unique, fp_free)
        stderr = float(required.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        results.append(PrefixAnalysis(
            sigma=sigma,
            pattern_count=pattern_count,
            min_unique_depth=int(unique.max()),
            mean_depth_over_trials=float(required.mean()),
            trials=trials,
            mean_unique_depth=float(unique.mean()),
            mean_fp_free_depth=float(fp_free.mean()),
            stderr=stderr,
            window=window,
        ))
        logger.info("sigma=%d: mean required depth %.2f over %d trials", sigma, required.mean(), trials)
    return results


def analysis_frame(results: Sequence[PrefixAnalysis]) -> pd.DataFrame:
    return pd.DataFrame([{
        "sigma": r.sigma,
        "mean_depth": r.mean_depth_over_trials,
        "trials": r.trials,
        "stderr": r.stderr,
        "mean_unique_depth": r.mean_unique_depth,
        "mean_fp_free_depth": r.mean_fp_free_depth,
        "max_unique_depth": r.min_unique_depth,
        "pattern_count": r.pattern_count,
        "window": r.window,
    } for r in results])


def false_positive_rate(patterns, depth: int, corpus: bytes) -> float:
    """Candidates at `depth` that fail full verification, per byte scanned."""
    if not corpus:
        return 0.0
    items = getattr(patterns, "patterns", patterns)
    alphabet = patterns.alphabet
    prefix_trie = truncate(build_trie(items, alphabet), depth)
    if prefix_trie.truncation_noop:
        return 0.0
    misses = sum(1 for start in candidate_starts(prefix_trie, corpus)
                 if not verify_candidate(corpus, start, prefix_trie))
    return misses / len(corpus)


def prefix_trie_size_table(sigma: int, pattern_counts: Sequence[int], pattern_length: int,
                           seed: int = config.DEFAULT_SEED, depth: Optional[int] = None) -> pd.DataFrame:
    """Reduced trie size with and without prefix truncation, one row per pattern count."""
    rows = []
    for n in pattern_counts:
        patterns = gen_patterns(seed, sigma, n, pattern_length)
        d = depth or choose_depth(sigma, patterns)
        trie = build_trie(patterns, patterns.alphabet)
        full, _ = compress(trie)
        prefix, _ = compress(truncate(trie, d)) if d < pattern_length else (full, None)
        full_bytes = memory_report(full).total_bytes
        prefix_bytes = memory_report(prefix).total_bytes
        rows.append({
            "sigma": sigma,
            "patterns": n,
            "depth": d,
            "full_nodes": full.node_count,
            "full_bytes": full_bytes,
            "prefix_nodes": prefix.node_count,
            "prefix_bytes": prefix_bytes,
            "reduction_percent": 100.0 * (full_bytes - prefix_bytes) / full_bytes,
        })
    return pd.DataFrame(rows)
