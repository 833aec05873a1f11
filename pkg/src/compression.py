"""
Trie Compression
Two-step node reduction for the bitmapped trie:
  1. merge every childless terminal into one shared terminal node
  2. merge identical unary tail chains (the last three levels of each pattern)
plus estimators for the expected number of merged tail nodes.
"""

import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

import config
from corpus_gen import Mt19937
from errors import CompressionError, ValidationError
from trie_core import Trie, TrieGraph, graph_from_trie, layout_graph, transition

logger = logging.getLogger("hepfac.compression")

TAIL_LEVELS = 3


@dataclass
class CompressionStats:
    nodes_before: int
    nodes_after_stage1: int
    nodes_after_stage2: int
    pattern_count: int
    merged_terminals: int = 0
    merged_tail_nodes: int = 0

    @property
    def reduction_percent(self) -> float:
        if not self.nodes_before:
            return 0.0
        return 100.0 * (self.nodes_before - self.nodes_after_stage2) / self.nodes_before

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["reduction_percent"] = round(self.reduction_percent, 4)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _relayout(trie: Trie, graph: TrieGraph, stage: int) -> Trie:
    return layout_graph(graph, trie.alphabet, trie.dictionary, stage=stage,
                        depth_limit=trie.depth_limit, truncation_noop=trie.truncation_noop)


def merge_final_nodes(trie: Trie) -> Tuple[Trie, CompressionStats]:
    """
    Stage 1: replace childless terminals by a single shared terminal.

    A parent is rewired only when all of its children are childless
    terminals; it then points straight at the shared terminal.

    Args:
        trie: Uncompressed trie (stage 0)

    Returns:
        (stage-1 trie, stats); the input trie is not modified
    """
    if trie.stage != 0:
        raise CompressionError(f"trie is already compressed (stage {trie.stage})")

    graph = graph_from_trie(trie)
    final = len(graph.children)
    graph.children.append([])
    graph.terminal.append(True)
    graph.final = final

    def is_leaf(c):
        return not graph.children[c] and graph.terminal[c]

    merged = 0
    for u in graph.depths():
        kids = graph.children[u]
        if u != final and kids and all(is_leaf(c) for _, c in kids):
            graph.children[u] = [(s, final) for s, _ in kids]
            merged += len(kids)

    out = _relayout(trie, graph, stage=1)
    stats = CompressionStats(
        nodes_before=trie.node_count,
        nodes_after_stage1=out.node_count,
        nodes_after_stage2=out.node_count,
        pattern_count=len(trie.dictionary),
        merged_terminals=merged,
    )
    logger.debug("stage 1: %d -> %d nodes (%d terminals merged)", trie.node_count, out.node_count, merged)
    return out, stats


def _tail_chains(trie: Trie, graph: TrieGraph) -> List[Tuple[List[int], int]]:
    """Eligible tail chains as ([node one above final, two above, three above], parent of the head)."""
    chains = []
    for pattern in trie.patterns_by_id:
        length = len(pattern)
        if length <= TAIL_LEVELS:
            continue
        path = [0]
        for byte in pattern:
            path.append(transition(trie, path[-1], byte))
        if path[-1] != graph.final:
            continue
        members = [path[length - k] for k in range(1, TAIL_LEVELS + 1)]
        if all(len(graph.children[m]) == 1 and not graph.terminal[m] for m in members):
            chains.append((members, path[length - TAIL_LEVELS - 1]))
    return chains


def merge_tail_chains(trie: Trie) -> Tuple[Trie, CompressionStats]:
    """
    Stage 2: share identical unary chains spelling the last three symbols of patterns.

    Nodes are merged bottom-up when they sit at the same depth, carry the
    same edge symbol and lead to the same (already merged) child. A chain
    head whose parent has several children must stay in that parent's
    sibling run, so two such heads are never merged with each other.
    """
    if trie.stage != 1:
        raise CompressionError(f"tail merging needs a stage-1 trie, got stage {trie.stage}")

    graph = graph_from_trie(trie)
    canon: Dict[int, int] = {}
    # truncated tries keep no tails to share
    eligible = graph.final is not None and trie.depth_limit is None
    chains = _tail_chains(trie, graph) if eligible else []
    depth = graph.depths()

    for level in range(TAIL_LEVELS):
        groups: Dict[Tuple[int, int, int], List[Tuple[int, bool]]] = defaultdict(list)
        for members, head_parent in chains:
            node = members[level]
            sym, child = graph.children[node][0]
            anchored = level == TAIL_LEVELS - 1 and len(graph.children[head_parent]) > 1
            groups[(depth[node], sym, canon.get(child, child))].append((node, anchored))

        for group in groups.values():
            if len(group) < 2:
                continue
            group.sort()
            anchors = [node for node, anchored in group if anchored]
            rep = anchors[0] if anchors else group[0][0]
            for node, anchored in group:
                if node != rep and not anchored:
                    canon[node] = rep

    for u in graph.depths():
        graph.children[u] = [(s, canon.get(c, c)) for s, c in graph.children[u]]

    out = _relayout(trie, graph, stage=2)
    stats = CompressionStats(
        nodes_before=trie.node_count,
        nodes_after_stage1=trie.node_count,
        nodes_after_stage2=out.node_count,
        pattern_count=len(trie.dictionary),
        merged_tail_nodes=trie.node_count - out.node_count,
    )
    logger.debug("stage 2: %d -> %d nodes (%d chains eligible)", trie.node_count, out.node_count, len(chains))
    return out, stats


def compress(trie: Trie) -> Tuple[Trie, CompressionStats]:
    """Run stage 1 then stage 2, with before/after node counts for both."""
    stage1, first = merge_final_nodes(trie)
    stage2, second = merge_tail_chains(stage1)
    stats = CompressionStats(
        nodes_before=first.nodes_before,
        nodes_after_stage1=first.nodes_after_stage1,
        nodes_after_stage2=second.nodes_after_stage2,
        pattern_count=first.pattern_count,
        merged_terminals=first.merged_terminals,
        merged_tail_nodes=second.merged_tail_nodes,
    )
    logger.info("compressed %d -> %d nodes (%.1f%%)", stats.nodes_before, stats.nodes_after_stage2,
                stats.reduction_percent)
    return stage2, stats


# ======================
# REDUCTION ESTIMATES
# ======================

@dataclass(frozen=True)
class ReductionEstimate:
    r: int
    n: int
    expected_length: float
    method: str  # "formula" or "monte_carlo"
    trials: int = 0
    stderr: float = 0.0
    reading: Optional[str] = None


READINGS = ("literal", "bose_einstein")


def expected_suffix_space(sigma: int) -> int:
    if sigma < 2:
        raise ValidationError(f"alphabet size must be >= 2, got {sigma}")
    return sigma * sigma


def _log_binom(a: int, b: int) -> Optional[float]:
    if a < 0 or b < 0 or b > a:
        return None
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def _log_multiset(a: int, b: int) -> Optional[float]:
    # ((a b)) = C(a + b - 1, b)
    if b == 0:
        return 0.0
    return _log_binom(a + b - 1, b)


def expected_reduced_length_formula(sigma: int, n: int, reading: str = "literal") -> float:
    """
    Expected tail length from the occupancy sum over i = 1..min(r, n).

    Args:
        sigma: Alphabet size
        n: Pattern count
        reading: "literal" takes the bracketed terms literally as multiset
            coefficients ((n-i, i)) / ((n, r)); "bose_einstein" reorders them
            to the indistinguishable-ball occupancy law ((i, n-i)) / ((r, n))

    Returns:
        Sum of P(i unique suffixes) * 2i; terms with invalid binomials contribute 0
    """
    if reading not in READINGS:
        raise ValidationError(f"unknown reading {reading!r}, expected one of {READINGS}")
    if n < 1:
        raise ValidationError(f"pattern count must be >= 1, got {n}")
    r = expected_suffix_space(sigma)

    if reading == "literal":
        log_den = _log_multiset(n, r)
    else:
        log_den = _log_multiset(r, n)

    total = 0.0
    for i in range(1, min(r, n) + 1):
        log_choose = _log_binom(r, i)
        log_num = _log_multiset(n - i, i) if reading == "literal" else _log_multiset(i, n - i)
        if log_choose is None or log_num is None or log_den is None:
            continue
        total += math.exp(log_choose + log_num - log_den) * 2 * i
    return total


def expected_reduced_length_closed_form(sigma: int, n: int) -> float:
    """2 * E[distinct suffixes] for n uniform draws from r = sigma^2 values."""
    r = expected_suffix_space(sigma)
    return 2.0 * r * (1.0 - (1.0 - 1.0 / r) ** n)


def expected_reduced_length_oracle(sigma: int, n: int, trials: int,
                                   seed: int = config.DEFAULT_SEED) -> ReductionEstimate:
    """Monte-Carlo estimate: mean of 2 * (distinct 2-symbol suffixes among n draws)."""
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    if n < 1:
        raise ValidationError(f"pattern count must be >= 1, got {n}")
    r = expected_suffix_space(sigma)

    mt = Mt19937(seed)
    lengths = np.empty(trials, dtype=np.float64)
    # batches keep memory bounded for large trial counts
    batch = max(1, 1_000_000 // (2 * n))
    done = 0
    while done < trials:
        rows = min(batch, trials - done)
        pairs = mt.symbols(rows * n * 2, sigma).reshape(rows, n, 2)
        suffixes = np.sort(pairs[:, :, 0] * sigma + pairs[:, :, 1], axis=1)
        distinct = 1 + np.count_nonzero(np.diff(suffixes, axis=1), axis=1)
        lengths[done:done + rows] = 2 * distinct
        done += rows

    stderr = float(lengths.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return ReductionEstimate(r=r, n=n, expected_length=float(lengths.mean()),
                             method="monte_carlo", trials=trials, stderr=stderr)


def reduction_estimate_report(sigma: int, n: int, trials: int, seed: int = config.DEFAULT_SEED) -> Dict:
    """Both formula readings beside the Monte-Carlo oracle, with a 3-stderr conformance flag each."""
    oracle = expected_reduced_length_oracle(sigma, n, trials, seed)
    tolerance = max(3 * oracle.stderr, 1e-6)
    report = {
        "sigma": sigma,
        "n": n,
        "r": oracle.r,
        "trials": trials,
        "oracle": oracle.expected_length,
        "oracle_stderr": oracle.stderr,
        "closed_form": expected_reduced_length_closed_form(sigma, n),
    }
    for reading in READINGS:
        value = expected_reduced_length_formula(sigma, n, reading)
        report[reading] = value
        report[f"{reading}_conforms"] = abs(value - oracle.expected_length) <= tolerance
    return report
