"""
Command-line interface for the HEPFAC matching engine.

Subcommands: gen, build, compress, stats, match, prefix, bench.
Exit codes: 0 success, 1 validation error, 2 I/O or trie-format error.
"""

import argparse
import json
import logging
import sys
import time
from typing import List, Optional

import config
from bench_harness import BenchSettings, compare_footprint, experiment_names, run_experiment, table_to_csv
from compression import compress
from corpus_gen import generate_datasets, read_pattern_file
from errors import TrieFormatError, ValidationError
from match_engine import ScanConfig, ScanEngine, format_matches
from prefix_matching import PrefixConfig, analysis_frame, analyze_prefix_vs_alphabet, prefix_scan, truncate
from trie_core import Trie, build_trie, default_alphabet, memory_report
from trie_io import load_trie, save_trie

logger = logging.getLogger("hepfac.cli")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class _ArgumentParser(argparse.ArgumentParser):
    """Bad flags are validation errors (exit 1), not argparse's usual 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--out", help="output path (default: stdout)")

    scanning = _ArgumentParser(add_help=False)
    scanning.add_argument("--workers", type=_positive, help=f"worker count (default: ${config.WORKERS_ENV} or CPU count)")
    scanning.add_argument("--backend", choices=config.SCAN_BACKENDS, default=config.DEFAULT_BACKEND)

    parser = _ArgumentParser(prog="hepfac", description="Bitmapped failure-less multi-pattern matching")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    gen = sub.add_parser("gen", parents=[common], help="generate patterns, corpus files and a manifest")
    gen.add_argument("--sigma", type=int, required=True)
    gen.add_argument("--patterns", type=_positive, required=True, help="pattern count")
    gen.add_argument("--len", type=_positive, default=config.DEFAULT_PATTERN_LENGTH, dest="length")
    gen.add_argument("--bytes", type=_positive, help=f"corpus bytes per file (default {config.DESK_CORPUS_BYTES})")
    gen.add_argument("--full-scale", action="store_true", help=f"{config.FULL_CORPUS_BYTES} bytes per file")
    gen.add_argument("--files", type=_positive, default=config.DEFAULT_FILES)
    gen.add_argument("--plant", type=int, default=0, help="pattern occurrences spliced into each file")
    gen.add_argument("--seed", type=int, default=config.DEFAULT_SEED)

    build = sub.add_parser("build", parents=[common], help="build a trie from a pattern file")
    build.add_argument("--patterns", required=True, help="pattern file")
    build.add_argument("--sigma", type=int, required=True)
    build.add_argument("--compress", action="store_true", help="apply both compression stages")

    comp = sub.add_parser("compress", parents=[common], help="compress a trie (stage 1 then stage 2)")
    comp.add_argument("--trie", help="uncompressed trie file")
    comp.add_argument("--patterns", help="pattern file (instead of --trie)")
    comp.add_argument("--sigma", type=int)

    stats = sub.add_parser("stats", parents=[common], help="memory footprint against rival storage models")
    stats.add_argument("--trie", help="trie file")
    stats.add_argument("--nodes", type=_positive, help="node count (instead of --trie)")
    stats.add_argument("--sigma", type=int)

    match = sub.add_parser("match", parents=[common, scanning], help="scan a file for all patterns")
    match.add_argument("--trie", help="trie file")
    match.add_argument("--patterns", help="pattern file (instead of --trie)")
    match.add_argument("--sigma", type=int)
    match.add_argument("--input", required=True, help="file to scan")
    match.add_argument("--chunk", type=_positive, default=config.DEFAULT_CHUNK)
    match.add_argument("--prefix-depth", type=_positive, help="two-stage scan with a trie truncated at this depth")
    match.add_argument("--no-verify", action="store_true", help="with --prefix-depth, report unverified candidate starts")

    prefix = sub.add_parser("prefix", parents=[common], help="required prefix depth across alphabet sizes")
    prefix.add_argument("--sigmas", type=int, nargs="+", default=[4, 8, 16, 24, 32, 44, 48, 52])
    prefix.add_argument("--patterns", type=_positive, default=100, help="patterns per set")
    prefix.add_argument("--len", type=_positive, default=config.DEFAULT_PATTERN_LENGTH, dest="length")
    prefix.add_argument("--trials", type=_positive, default=100)
    prefix.add_argument("--window", type=int, default=config.PREFIX_WINDOW, help="random text per trial (0: uniqueness only)")
    prefix.add_argument("--seed", type=int, default=config.DEFAULT_SEED)

    bench = sub.add_parser("bench", parents=[common, scanning], help="run a benchmark experiment")
    bench.add_argument("experiment", choices=experiment_names())
    bench.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    bench.add_argument("--full-scale", action="store_true")
    bench.add_argument("--runs", type=_positive, default=config.DEFAULT_RUNS)
    bench.add_argument("--trials", type=_positive)

    return parser


# ======================
# HELPERS
# ======================

def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _require_sigma(args) -> int:
    if args.sigma is None:
        raise ValidationError("--sigma is required with --patterns")
    return args.sigma


def _trie_from_args(args) -> Trie:
    if args.trie:
        return load_trie(args.trie)
    if args.patterns:
        alphabet = default_alphabet(_require_sigma(args))
        patterns = read_pattern_file(args.patterns, alphabet)
        return build_trie(patterns, alphabet)
    raise ValidationError("one of --trie or --patterns is required")


# ======================
# SUBCOMMANDS
# ======================

def cmd_gen(args) -> int:
    size = args.bytes or (config.FULL_CORPUS_BYTES if args.full_scale else config.DESK_CORPUS_BYTES)
    out_dir = args.out or "data"
    manifest = generate_datasets(out_dir, args.seed, args.sigma, args.patterns, args.length, size,
                                 args.files, args.plant)
    print("=" * 60)
    print(f"Generated {len(manifest['files'])} corpus files in {out_dir}")
    print("=" * 60)
    for entry in manifest["files"]:
        print(f"  {entry['path']}: {entry['bytes']:,} bytes  sha256={entry['sha256']}")
    print(f"  patterns.txt: {args.patterns} patterns of length {args.length}")
    return EXIT_OK


def cmd_build(args) -> int:
    alphabet = default_alphabet(args.sigma)
    trie = build_trie(read_pattern_file(args.patterns, alphabet), alphabet)
    if args.compress:
        trie, stats = compress(trie)
        print(stats.to_json())
    if args.out:
        save_trie(trie, args.out)
    print(memory_report(trie).render())
    print(json.dumps(memory_report(trie).to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_compress(args) -> int:
    trie = _trie_from_args(args)
    compressed, stats = compress(trie)
    if args.out:
        save_trie(compressed, args.out)
    print(stats.to_json())
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.trie:
        trie = load_trie(args.trie)
        node_count, sigma = trie.node_count, trie.alphabet.size
    elif args.nodes:
        if args.sigma is None:
            raise ValidationError("--sigma is required with --nodes")
        default_alphabet(args.sigma)
        node_count, sigma = args.nodes, args.sigma
    else:
        raise ValidationError("one of --trie or --nodes is required")
    report = compare_footprint(node_count, sigma)
    _emit(json.dumps(report.to_dict(), sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_match(args) -> int:
    trie = _trie_from_args(args)
    with open(args.input, "rb") as f:
        text = f.read()
    scan_config = ScanConfig(workers=args.workers or config.default_workers(), chunk=args.chunk,
                             backend=args.backend)

    if args.prefix_depth and args.no_verify:
        started = time.perf_counter()
        results = prefix_scan(trie, text, PrefixConfig(args.prefix_depth, verify=False), scan_config)
        seconds = time.perf_counter() - started
    else:
        if args.prefix_depth:
            trie = truncate(trie, args.prefix_depth)
        with ScanEngine(trie, scan_config) as engine:
            timing = engine.scan_timed(text)
        results = timing.results
        seconds = timing.scan_seconds + timing.merge_seconds

    _emit(format_matches(results), args.out)
    summary = {
        "matches": len(results),
        "bytes": len(text),
        "seconds": seconds,
        "gbps": len(text) * 8 / seconds / 1e9 if seconds > 0 else None,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_prefix(args) -> int:
    results = analyze_prefix_vs_alphabet(args.sigmas, args.patterns, args.length, args.trials, args.seed,
                                         args.window)
    run_config = {"command": "prefix", "sigmas": args.sigmas, "patterns": args.patterns, "length": args.length,
                  "trials": args.trials, "window": args.window, "seed": args.seed}
    _emit(table_to_csv(analysis_frame(results), run_config), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    settings = BenchSettings(seed=args.seed, full_scale=args.full_scale,
                             workers=args.workers or config.default_workers(), runs=args.runs,
                             backend=args.backend, trials=args.trials)
    result = run_experiment(args.experiment, settings)
    _emit(table_to_csv(result.table, result.run_config), args.out)

    report = sys.stdout if args.out else sys.stderr
    for check in result.checks:
        status = "PASS" if check.passed else ("FAIL" if check.required else "WARN")
        print(f"[{status}] {check.name}: {check.detail}", file=report)
    return EXIT_OK if result.passed else EXIT_VALIDATION


COMMANDS = {
    "gen": cmd_gen,
    "build": cmd_build,
    "compress": cmd_compress,
    "stats": cmd_stats,
    "match": cmd_match,
    "prefix": cmd_prefix,
    "bench": cmd_bench,
}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_VALIDATION

    logging.basicConfig(level=logging.DEBUG if args.verbose else getattr(logging, config.LOG_LEVEL),
                        format=config.LOG_FORMAT, stream=sys.stderr)
    print(json.dumps({"config": vars(args)}, sort_keys=True, default=str), file=sys.stderr)

    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"hepfac: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, TrieFormatError) as e:
        print(f"hepfac: error: {e}", file=sys.stderr)
        return EXIT_IO
