"""
Parallel Failure-less Scan
Every text position gets its own root walk, so no failure links are needed
and patterns straddling work-unit boundaries are never lost. Contiguous
ranges of starting positions are spread over a worker pool and the
per-unit results are merged into one sorted list.
"""

import logging
import multiprocessing
import time
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import config
from errors import ValidationError
from trie_core import Trie

logger = logging.getLogger("hepfac.match_engine")


class MatchResult(NamedTuple):
    start: int
    length: int
    pattern_id: int


class ScanTiming(NamedTuple):
    results: List[MatchResult]
    scan_seconds: float
    merge_seconds: float


@dataclass
class ScanConfig:
    workers: int = field(default_factory=config.default_workers)
    chunk: int = config.DEFAULT_CHUNK
    backend: str = config.DEFAULT_BACKEND

    def __post_init__(self):
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if self.chunk < 1:
            raise ValidationError(f"chunk must be >= 1, got {self.chunk}")
        if self.backend not in config.SCAN_BACKENDS:
            raise ValidationError(f"unknown backend {self.backend!r}, expected one of {config.SCAN_BACKENDS}")


# ======================
# HOT LOOP
# ======================

def verified_matches(text: bytes, start: int, prefix_index: Dict[bytes, List[Tuple[bytes, int]]],
                     depth: int) -> List[Tuple[int, int, int]]:
    """Exact (start, length, id) matches at `start` among the patterns bucketed by prefix."""
    out = []
    for k in range(1, min(depth, len(text) - start) + 1):
        bucket = prefix_index.get(text[start:start + k])
        if bucket:
            for pattern, pid in bucket:
                if text.startswith(pattern, start):
                    out.append((start, len(pattern), pid))
    return out


def _scan_range(trie: Trie, text: bytes, lo: int, hi: int, base: int = 0) -> List[Tuple[int, int, int]]:
    """Raw matches for starts lo..hi-1 of `text`, reported at base + start."""
    masks, offsets, terminal, root_next, to_symbol, final = trie.scan_tables
    dictionary = trie.dictionary
    depth = trie.depth_limit
    prefix_index = trie.prefix_index if depth is not None else None
    n = len(text)
    out = []

    for start in range(lo, hi):
        node = root_next[text[start]]
        if node < 0:
            continue
        pos = start + 1
        while True:
            if terminal[node]:
                if prefix_index is not None:
                    # candidate: verification covers every length at this start
                    for s, length, pid in verified_matches(text, start, prefix_index, depth):
                        out.append((base + s, length, pid))
                    break
                out.append((base + start, pos - start, dictionary[text[start:pos]]))
            if pos >= n:
                break
            sym = to_symbol[text[pos]]
            if sym < 0:
                break
            bm = masks[node]
            bit = 1 << sym
            if not bm & bit:
                break
            off = offsets[node]
            node = off if off == final else off + (bm & (bit - 1)).bit_count()
            pos += 1
    return out


def candidate_starts(trie: Trie, text: bytes) -> List[int]:
    """Starts whose root walk reaches a terminal node (the first stage of a two-stage scan)."""
    masks, offsets, terminal, root_next, to_symbol, final = trie.scan_tables
    n = len(text)
    starts = []
    for start in range(n):
        node = root_next[text[start]]
        pos = start + 1
        while node >= 0:
            if terminal[node]:
                starts.append(start)
                break
            if pos >= n:
                break
            sym = to_symbol[text[pos]]
            bm = masks[node]
            if sym < 0 or not bm >> sym & 1:
                break
            off = offsets[node]
            node = off if off == final else off + (bm & ((1 << sym) - 1)).bit_count()
            pos += 1
    return starts


# ======================
# WORKERS
# ======================

_WORKER_TRIE: Optional[Trie] = None


def _init_worker(trie: Trie):
    global _WORKER_TRIE
    _WORKER_TRIE = trie


def _process_unit(unit: Tuple[bytes, int, int]) -> List[Tuple[int, int, int]]:
    window, count, base = unit
    return _scan_range(_WORKER_TRIE, window, 0, count, base)


class ScanEngine:
    """
    Owns one worker pool for repeated scans of the same trie.

    Usage:
        with ScanEngine(trie, ScanConfig(workers=4)) as engine:
            results = engine.scan(text)
    """

    def __init__(self, trie: Trie, scan_config: Optional[ScanConfig] = None):
        self.trie = trie
        self.config = scan_config or ScanConfig()
        self._executor: Optional[Executor] = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()

    def start(self):
        if self.config.workers == 1 or self._executor is not None:
            return
        # build the lookup tables once, before workers copy or share the trie
        self.trie.scan_tables
        self.trie.prefix_index
        if self.config.backend == "process":
            methods = multiprocessing.get_all_start_methods()
            context = multiprocessing.get_context("fork") if "fork" in methods else None
            self._executor = ProcessPoolExecutor(max_workers=self.config.workers, mp_context=context,
                                                 initializer=_init_worker, initargs=(self.trie,))
        else:
            self._executor = ThreadPoolExecutor(max_workers=self.config.workers)
        logger.debug("started %s pool with %d workers", self.config.backend, self.config.workers)

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def _units(self, text: bytes) -> List[Tuple[bytes, int, int]]:
        # each window overlaps the next by the longest pattern minus one
        overlap = max(self.trie.max_pattern_length - 1, 0)
        chunk = self.config.chunk
        return [(text[lo:min(lo + chunk, len(text)) + overlap], min(chunk, len(text) - lo), lo)
                for lo in range(0, len(text), chunk)]

    def _run(self, text: bytes) -> List[List[Tuple[int, int, int]]]:
        if self._executor is None:
            self.start()
        if self._executor is None:
            return [_scan_range(self.trie, text, 0, len(text))]

        units = self._units(text)
        if self.config.backend == "process":
            batch = max(1, len(units) // (self.config.workers * 4))
            return list(self._executor.map(_process_unit, units, chunksize=batch))
        trie = self.trie
        return list(self._executor.map(lambda u: _scan_range(trie, u[0], 0, u[1], u[2]), units))

    def scan_timed(self, text: bytes) -> ScanTiming:
        t0 = time.perf_counter()
        parts = self._run(text)
        t1 = time.perf_counter()
        results = [MatchResult(*r) for part in parts for r in part]
        results.sort()
        t2 = time.perf_counter()
        return ScanTiming(results, t1 - t0, t2 - t1)

    def scan(self, text: bytes) -> List[MatchResult]:
        return self.scan_timed(text).results


# ======================
# ENTRY POINTS
# ======================

def scan_from(trie: Trie, text: bytes, start: int) -> List[MatchResult]:
    """All matches beginning exactly at `start`."""
    if not 0 <= start < len(text):
        raise ValidationError(f"start {start} outside text of length {len(text)}")
    return [MatchResult(*r) for r in _scan_range(trie, text, start, start + 1)]


def scan(trie: Trie, text: bytes, scan_config: Optional[ScanConfig] = None) -> List[MatchResult]:
    """Every match in `text`, sorted by (start, length, pattern_id)."""
    with ScanEngine(trie, scan_config) as engine:
        return engine.scan(text)


def scan_two_stage(prefix_trie: Trie, text: bytes, scan_config: Optional[ScanConfig] = None) -> List[MatchResult]:
    """Scan with a depth-truncated trie, verifying each candidate against the full patterns."""
    if not prefix_trie.dictionary:
        raise ValidationError("prefix trie has no pattern dictionary to verify against")
    if prefix_trie.depth_limit is None and not prefix_trie.truncation_noop:
        raise ValidationError("scan_two_stage needs a truncated trie (depth_limit is not set)")
    return scan(prefix_trie, text, scan_config)


def format_matches(results: Sequence[MatchResult]) -> str:
    return "".join(f"{r.start}\t{r.length}\t{r.pattern_id}\n" for r in results)
