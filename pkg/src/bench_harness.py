"""
Benchmark Harness
Throughput, scaling, memory-footprint and trie-size experiments.
Every experiment returns a pandas table, the configuration it ran with and
a list of consistency checks; tables are written as CSV with the
configuration embedded as a JSON comment line.
"""

import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import pandas as pd

import config
from compression import compress, reduction_estimate_report
from corpus_gen import gen_corpus, gen_patterns
from errors import ValidationError
from match_engine import ScanConfig, ScanEngine
from prefix_matching import (analysis_frame, analyze_prefix_vs_alphabet, choose_depth,
                             prefix_trie_size_table, truncate)
from trie_core import Trie, build_trie, memory_report, memory_report_for

logger = logging.getLogger("hepfac.bench_harness")

MIB = 1 << 20

PREFIX_SIGMAS = (4, 8, 12, 16, 20, 24, 28, 32, 36, 40, 44, 48, 52)
SMALL_SIGMAS = (4, 8, 16, 24, 32, 40, 52)
LARGE_SIGMAS = (52, 64, 128, 256)
SCALING_COUNTS = (1, 10, 100, 1000)
PREFIX_SIZE_COUNTS = (10, 100)
REFERENCE_WORKLOADS = ((1_703_023, 32), (352_921, 256))
REFERENCE_RATIOS = {"pfac": 1.87, "accw": 1.16, "gravity": 28.5}
REFERENCE_REDUCTION_PERCENT = 38.0


# ======================
# REPORT TYPES
# ======================

@dataclass
class ThroughputReport:
    bytes: int
    seconds: float
    workers: int
    runs: int
    run_seconds: List[float] = field(default_factory=list)
    merge_seconds: float = 0.0

    @property
    def gbps(self) -> float:
        return self.bytes * 8 / self.seconds / 1e9 if self.seconds > 0 else math.inf

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["gbps"] = self.gbps
        return data


@dataclass(frozen=True)
class ComparisonReport:
    node_count: int
    sigma: int
    ours_bytes: int
    pfac_bytes: int
    accw_bytes: int
    gravity_bytes: int
    reference_mib: Dict[str, float] = field(default_factory=dict)

    @property
    def model_ratios(self) -> Dict[str, float]:
        return {
            "pfac": self.pfac_bytes / self.ours_bytes,
            "accw": self.accw_bytes / self.ours_bytes,
            "gravity": self.gravity_bytes / self.ours_bytes,
        }

    @property
    def reference_ratios(self) -> Dict[str, float]:
        return {name: mib * MIB / self.ours_bytes for name, mib in self.reference_mib.items()}

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["ours_mib"] = memory_report_for(self.node_count, self.sigma).total_mib
        data["model_ratios"] = self.model_ratios
        data["reference_ratios"] = self.reference_ratios
        return data


class ConsistencyCheck(NamedTuple):
    name: str
    passed: bool
    detail: str
    required: bool = True  # timing-trend checks are reported but do not fail a run


@dataclass
class ExperimentResult:
    name: str
    table: pd.DataFrame
    run_config: Dict
    checks: List[ConsistencyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)


@dataclass
class BenchSettings:
    seed: int = config.DEFAULT_SEED
    full_scale: bool = False
    workers: int = field(default_factory=config.default_workers)
    runs: int = config.DEFAULT_RUNS
    backend: str = config.DEFAULT_BACKEND
    trials: Optional[int] = None

    @property
    def corpus_bytes(self) -> int:
        return config.FULL_CORPUS_BYTES if self.full_scale else config.DESK_CORPUS_BYTES

    def scan_config(self, workers: Optional[int] = None) -> ScanConfig:
        return ScanConfig(workers=workers or self.workers, backend=self.backend)


# ======================
# MEASUREMENTS
# ======================

def run_throughput(trie: Trie, corpus: bytes, scan_config: Optional[ScanConfig] = None,
                   runs: int = config.DEFAULT_RUNS, warmup: bool = True) -> ThroughputReport:
    """
    Time `runs` scans of `corpus` (after one discarded warm-up run).

    Returns:
        ThroughputReport with the mean scan time; merge time is kept apart
    """
    if not corpus:
        raise ValidationError("cannot measure throughput on an empty corpus")
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    scan_config = scan_config or ScanConfig()

    scan_times, merge_times = [], []
    with ScanEngine(trie, scan_config) as engine:
        if warmup:
            engine.scan_timed(corpus)
        for _ in range(runs):
            timing = engine.scan_timed(corpus)
            scan_times.append(timing.scan_seconds)
            merge_times.append(timing.merge_seconds)

    return ThroughputReport(
        bytes=len(corpus),
        seconds=sum(scan_times) / runs,
        workers=scan_config.workers,
        runs=runs,
        run_seconds=scan_times,
        merge_seconds=sum(merge_times) / runs,
    )


def compare_footprint(node_count: int, sigma: int) -> ComparisonReport:
    """Our node-array size against the rival per-node storage models."""
    if node_count < 1:
        raise ValidationError(f"node_count must be >= 1, got {node_count}")
    ours = memory_report_for(node_count, sigma)
    return ComparisonReport(
        node_count=node_count,
        sigma=sigma,
        ours_bytes=ours.total_bytes,
        pfac_bytes=config.PFAC_BYTES_PER_NODE * node_count,
        accw_bytes=config.ACCW_BYTES_PER_NODE * node_count,
        gravity_bytes=config.GRAVITY_BYTES_PER_NODE * node_count,
        reference_mib=dict(config.REFERENCE_RIVAL_MIB.get((node_count, sigma), {})),
    )


def distinct_prefix_count(strings: Sequence) -> int:
    """Number of distinct nonempty prefixes over `strings`."""
    ordered = sorted(set(strings))
    total = 0
    prev = ordered[0][:0] if ordered else b""
    for s in ordered:
        lcp = 0
        limit = min(len(s), len(prev))
        while lcp < limit and s[lcp] == prev[lcp]:
            lcp += 1
        total += len(s) - lcp
        prev = s
    return total


def binary_trie_nodes(patterns, sigma: int) -> int:
    """Nodes of a binary trie over the patterns re-encoded at ceil(log2 sigma) bits per symbol."""
    bits = max(1, math.ceil(math.log2(sigma)))
    encoded = ["".join(format(s, f"0{bits}b") for s in patterns.alphabet.encode(p)) for p in patterns]
    return 1 + distinct_prefix_count(encoded)


def run_trie_size_curve(sigma: int, pattern_counts: Sequence[int], pattern_length: int,
                        seed: int = config.DEFAULT_SEED) -> pd.DataFrame:
    """
    Sizes of four trie layouts per pattern count.

    array: node_count x 4*sigma bytes; binary: 8 bytes per binary-trie node;
    bitmapped: the node array; reduced: the node array after both compression stages.
    """
    rows = []
    for n in pattern_counts:
        patterns = gen_patterns(seed, sigma, n, pattern_length)
        trie = build_trie(patterns, patterns.alphabet)
        reduced, stats = compress(trie)
        bitmapped_bytes = memory_report(trie).total_bytes
        reduced_bytes = memory_report(reduced).total_bytes
        binary_nodes = binary_trie_nodes(patterns, sigma)
        rows.append({
            "sigma": sigma,
            "patterns": n,
            "nodes": trie.node_count,
            "reduced_nodes": reduced.node_count,
            "array_bytes": trie.node_count * 4 * sigma,
            "binary_nodes": binary_nodes,
            "binary_bytes": binary_nodes * 8,
            "bitmapped_bytes": bitmapped_bytes,
            "reduced_bytes": reduced_bytes,
            "reduction_percent": 100.0 * (bitmapped_bytes - reduced_bytes) / bitmapped_bytes,
        })
        logger.info("sigma=%d n=%d: %d -> %d nodes", sigma, n, trie.node_count, reduced.node_count)
    return pd.DataFrame(rows)


def run_scaling(sigma_list: Sequence[int], pattern_counts: Sequence[int], pattern_length: int,
                corpus_bytes: int, seed: int = config.DEFAULT_SEED,
                scan_config: Optional[ScanConfig] = None, runs: int = config.DEFAULT_RUNS) -> pd.DataFrame:
    """Throughput grid over alphabet sizes and pattern counts (compressed, prefix-truncated tries)."""
    rows = []
    for sigma in sigma_list:
        corpus = gen_corpus(seed + 1, sigma, corpus_bytes)
        for n in pattern_counts:
            patterns = gen_patterns(seed, sigma, n, pattern_length)
            trie = build_trie(patterns, patterns.alphabet)
            reduced, _ = compress(trie)
            depth = choose_depth(sigma, patterns)
            scanned = compress(truncate(trie, depth))[0] if depth < pattern_length else reduced
            report = run_throughput(scanned, corpus, scan_config, runs)
            rows.append({
                "sigma": sigma,
                "patterns": n,
                "depth": depth,
                "nodes": reduced.node_count,
                "trie_bytes": memory_report(reduced).total_bytes,
                "prefix_nodes": scanned.node_count,
                "bytes": report.bytes,
                "seconds": report.seconds,
                "merge_seconds": report.merge_seconds,
                "gbps": report.gbps,
                "workers": report.workers,
                "runs": report.runs,
            })
            logger.info("sigma=%d n=%d: %.4f Gbps", sigma, n, report.gbps)
    return pd.DataFrame(rows)


def run_worker_comparison(sigma: int, pattern_count: int, corpus_sizes: Sequence[int],
                          workers_list: Sequence[int], seed: int = config.DEFAULT_SEED,
                          runs: int = config.DEFAULT_RUNS,
                          backend: str = config.DEFAULT_BACKEND) -> pd.DataFrame:
    """Single- against multi-worker throughput, at several corpus sizes."""
    patterns = gen_patterns(seed, sigma, pattern_count, config.DEFAULT_PATTERN_LENGTH)
    trie, _ = compress(build_trie(patterns, patterns.alphabet))
    rows = []
    for size in corpus_sizes:
        corpus = gen_corpus(seed + 1, sigma, size)
        baseline = None
        for workers in workers_list:
            report = run_throughput(trie, corpus, ScanConfig(workers=workers, backend=backend), runs)
            baseline = baseline or report.gbps
            rows.append({
                "sigma": sigma,
                "patterns": pattern_count,
                "bytes": size,
                "workers": workers,
                "seconds": report.seconds,
                "gbps": report.gbps,
                "speedup": report.gbps / baseline,
            })
    return pd.DataFrame(rows)


# ======================
# OUTPUT
# ======================

def table_to_csv(table: pd.DataFrame, run_config: Dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {json.dumps(run_config, sort_keys=True)}\n")
    table.to_csv(buf, index=False)
    return buf.getvalue()


def write_table(table: pd.DataFrame, path: str, run_config: Dict) -> None:
    with open(path, "w", newline="") as f:
        f.write(table_to_csv(table, run_config))


def _within(value: float, target: float, tolerance: float) -> bool:
    return abs(value - target) <= tolerance * abs(target)


# ======================
# EXPERIMENTS
# ======================

def experiment_footprint(settings: BenchSettings) -> ExperimentResult:
    rows, checks = [], []
    for node_count, sigma in REFERENCE_WORKLOADS:
        report = compare_footprint(node_count, sigma)
        rows.append({
            "nodes": node_count,
            "sigma": sigma,
            "bytes_per_node": memory_report_for(node_count, sigma).bytes_per_node,
            "ours_bytes": report.ours_bytes,
            "ours_mib": memory_report_for(node_count, sigma).total_mib,
            **{f"{k}_model_ratio": round(v, 4) for k, v in report.model_ratios.items()},
            **{f"{k}_reference_ratio": round(v, 4) for k, v in report.reference_ratios.items()},
        })
        for rival, ratio in report.reference_ratios.items():
            target = REFERENCE_RATIOS[rival]
            checks.append(ConsistencyCheck(f"{rival} ratio", _within(ratio, target, 0.01),
                                           f"{ratio:.3f} vs {target}"))
    expected_mib = {32: "12.9", 256: "12.1"}
    for row in rows:
        checks.append(ConsistencyCheck(f"footprint sigma={row['sigma']}", row["ours_mib"] == expected_mib[row["sigma"]],
                                       f"{row['ours_mib']} MiB"))
    return ExperimentResult("footprint", pd.DataFrame(rows), {"experiment": "footprint"}, checks)


def experiment_trie_size(settings: BenchSettings) -> ExperimentResult:
    counts = config.TRIE_SIZE_COUNTS
    table = pd.concat([run_trie_size_curve(sigma, counts, config.DEFAULT_PATTERN_LENGTH, settings.seed)
                       for sigma in (4, 52)], ignore_index=True)
    mean = table.groupby("sigma")["reduction_percent"].mean()
    checks = [
        ConsistencyCheck("reduced <= bitmapped", bool((table["reduced_bytes"] <= table["bitmapped_bytes"]).all()),
                         "every row"),
        ConsistencyCheck("smaller alphabet reduces more", bool(mean[4] > mean[52]),
                         f"sigma=4 {mean[4]:.1f}% vs sigma=52 {mean[52]:.1f}%"),
        ConsistencyCheck("reference mean reduction", _within(mean[4], REFERENCE_REDUCTION_PERCENT, 10 / 38),
                         f"sigma=4 mean {mean[4]:.1f}% vs {REFERENCE_REDUCTION_PERCENT}%", required=False),
    ]
    run_config = {"experiment": "trie-size", "seed": settings.seed, "counts": list(counts),
                  "length": config.DEFAULT_PATTERN_LENGTH}
    return ExperimentResult("trie-size", table, run_config, checks)


def experiment_prefix_depth(settings: BenchSettings) -> ExperimentResult:
    trials = settings.trials or (1000 if settings.full_scale else 100)
    results = analyze_prefix_vs_alphabet(PREFIX_SIGMAS, 100, config.DEFAULT_PATTERN_LENGTH, trials, settings.seed)
    table = analysis_frame(results)
    by_sigma = {r.sigma: r for r in results}

    large = [by_sigma[s] for s in (44, 48, 52)]
    monotone = all(b.mean_depth_over_trials <= a.mean_depth_over_trials + 2 * math.hypot(a.stderr, b.stderr)
                   for a, b in zip(results, results[1:]))
    checks = [
        ConsistencyCheck("sigma=4 depth > 12", by_sigma[4].mean_depth_over_trials > 12,
                         f"{by_sigma[4].mean_depth_over_trials:.2f}"),
        ConsistencyCheck("sigma 44..52 depth 5 +/- 1", all(abs(r.mean_depth_over_trials - 5) <= 1 for r in large),
                         ", ".join(f"{r.sigma}: {r.mean_depth_over_trials:.2f}" for r in large)),
        ConsistencyCheck("non-increasing in sigma", monotone, "within 2 standard errors"),
    ]
    run_config = {"experiment": "prefix-depth", "seed": settings.seed, "trials": trials, "patterns": 100,
                  "length": config.DEFAULT_PATTERN_LENGTH, "window": config.PREFIX_WINDOW}
    return ExperimentResult("prefix-depth", table, run_config, checks)


def experiment_prefix_size(settings: BenchSettings) -> ExperimentResult:
    table = prefix_trie_size_table(52, PREFIX_SIZE_COUNTS, config.DEFAULT_PATTERN_LENGTH, settings.seed)
    checks = [ConsistencyCheck("prefix trie not larger", bool((table["prefix_bytes"] <= table["full_bytes"]).all()),
                               "every row")]
    run_config = {"experiment": "prefix-size", "seed": settings.seed, "sigma": 52, "counts": list(PREFIX_SIZE_COUNTS)}
    return ExperimentResult("prefix-size", table, run_config, checks)


def _scaling(name: str, sigmas: Sequence[int], settings: BenchSettings) -> ExperimentResult:
    table = run_scaling(sigmas, SCALING_COUNTS, config.DEFAULT_PATTERN_LENGTH, settings.corpus_bytes,
                        settings.seed, settings.scan_config(), settings.runs)
    sizes_match = all(row.trie_bytes == memory_report_for(row.nodes, row.sigma).total_bytes
                      for row in table.itertuples())
    checks = [ConsistencyCheck("trie size column", sizes_match, "matches memory_report")]
    for sigma, group in table.groupby("sigma"):
        few, many = group.iloc[0], group.iloc[-1]
        checks.append(ConsistencyCheck(
            f"sigma={sigma} fewer patterns scan faster", bool(few.gbps > many.gbps),
            f"n={few.patterns}: {few.gbps:.4f} Gbps, n={many.patterns}: {many.gbps:.4f} Gbps", required=False))
    run_config = {"experiment": name, "seed": settings.seed, "sigmas": list(sigmas), "counts": list(SCALING_COUNTS),
                  "bytes": settings.corpus_bytes, "workers": settings.workers, "runs": settings.runs,
                  "backend": settings.backend}
    return ExperimentResult(name, table, run_config, checks)


def experiment_scaling_small(settings: BenchSettings) -> ExperimentResult:
    return _scaling("scaling-small", SMALL_SIGMAS, settings)


def experiment_scaling_large(settings: BenchSettings) -> ExperimentResult:
    return _scaling("scaling-large", LARGE_SIGMAS, settings)


def experiment_workers(settings: BenchSettings) -> ExperimentResult:
    sizes = [settings.corpus_bytes, 2 * settings.corpus_bytes]
    workers = sorted({1, settings.workers})
    table = run_worker_comparison(52, 100, sizes, workers, settings.seed, settings.runs, settings.backend)

    checks = []
    top = table[table["workers"] == workers[-1]]
    if len(top) == 2:
        a, b = top["gbps"].tolist()
        checks.append(ConsistencyCheck("corpus size does not change throughput", _within(b, a, 0.10),
                                       f"{a:.4f} vs {b:.4f} Gbps", required=False))
    if workers[-1] >= 4:
        speedup = float(top["speedup"].min())
        checks.append(ConsistencyCheck("multi-worker speedup >= 2", speedup >= 2.0, f"{speedup:.2f}x",
                                       required=False))
    run_config = {"experiment": "workers", "seed": settings.seed, "sigma": 52, "patterns": 100,
                  "sizes": sizes, "workers": workers, "runs": settings.runs, "backend": settings.backend}
    return ExperimentResult("workers", table, run_config, checks)


def experiment_suffix_estimate(settings: BenchSettings) -> ExperimentResult:
    trials = settings.trials or 100_000
    rows = [reduction_estimate_report(sigma, n, trials, settings.seed)
            for sigma, n in ((2, 64), (4, 1), (4, 8), (4, 100), (52, 100))]
    table = pd.DataFrame(rows)
    checks = []
    for row in rows:
        tolerance = max(3 * row["oracle_stderr"], 1e-6)
        checks.append(ConsistencyCheck(
            f"oracle vs closed form sigma={row['sigma']} n={row['n']}",
            abs(row["oracle"] - row["closed_form"]) <= tolerance,
            f"{row['oracle']:.4f} vs {row['closed_form']:.4f}"))
    run_config = {"experiment": "suffix-estimate", "seed": settings.seed, "trials": trials}
    return ExperimentResult("suffix-estimate", table, run_config, checks)


EXPERIMENTS: Dict[str, Callable[[BenchSettings], ExperimentResult]] = {
    "prefix-depth": experiment_prefix_depth,
    "trie-size": experiment_trie_size,
    "prefix-size": experiment_prefix_size,
    "scaling-small": experiment_scaling_small,
    "scaling-large": experiment_scaling_large,
    "workers": experiment_workers,
    "footprint": experiment_footprint,
    "suffix-estimate": experiment_suffix_estimate,
}

# Numbered names used by reproduction scripts
EXPERIMENT_ALIASES = {
    "figure3": "prefix-depth",
    "figure4": "trie-size",
    "figure5": "trie-size",
    "figure6": "scaling-small",
    "figure7": "scaling-large",
    "figure8": "workers",
}


def experiment_names() -> List[str]:
    return sorted(EXPERIMENTS) + sorted(EXPERIMENT_ALIASES)


def run_experiment(name: str, settings: Optional[BenchSettings] = None) -> ExperimentResult:
    name = EXPERIMENT_ALIASES.get(name, name)
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}, expected one of {experiment_names()}")
    settings = settings or BenchSettings()
    started = time.perf_counter()
    result = EXPERIMENTS[name](settings)
    logger.info("%s finished in %.1fs (%s)", name, time.perf_counter() - started,
                "all checks passed" if result.passed else "CHECKS FAILED")
    return result
