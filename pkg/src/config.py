"""
Configuration settings for the HEPFAC multi-pattern matching engine.
Override the worker count with the HEPFAC_WORKERS environment variable
(or a line in the repo-root .env file).
"""

import os

from errors import ConfigError

# ======================
# TRIE FORMAT
# ======================

# Magic bytes at the start of every serialized trie
TRIE_MAGIC = b"HTRI"

# Bump when the on-disk layout changes
TRIE_FORMAT_VERSION = 1

# Bitmaps are stored as arrays of 32-bit words
WORD_BITS = 32

# The terminal flag lives in the offset word's most significant bit
TERMINAL_BIT = 1 << 31

# Largest node array the format can address
MAX_NODE_COUNT = (1 << 31) - 1

# Dictionary entries store the pattern length as a u16
MAX_PATTERN_LENGTH = 0xFFFF

# Highest compression stage a trie can carry
MAX_STAGE = 2

# ======================
# SCAN SETTINGS
# ======================

# Starting positions per work unit
DEFAULT_CHUNK = 4096

# "process" scales across cores; "thread" is cheap to start (tests, tiny inputs)
DEFAULT_BACKEND = "process"
SCAN_BACKENDS = ("process", "thread")

# Environment variable holding the default worker count
WORKERS_ENV = "HEPFAC_WORKERS"

# ======================
# PREFIX MATCHING
# ======================

# Alphabets larger than this use the fixed truncation depth below
LARGE_ALPHABET_THRESHOLD = 52
LARGE_ALPHABET_DEPTH = 5

# Random text scanned per trial when measuring false-positive-free depth
PREFIX_WINDOW = 200_000

# ======================
# DATA GENERATION
# ======================

# Reference MT19937 seed
DEFAULT_SEED = 5489

# Desk-scale corpus size; --full-scale switches to 100 MiB
DESK_CORPUS_BYTES = 1 << 20
FULL_CORPUS_BYTES = 100 << 20

# Number of corpus files per generated dataset
DEFAULT_FILES = 5

DEFAULT_PATTERN_LENGTH = 20

# ======================
# BENCHMARK SETTINGS
# ======================

# Timed runs per measurement (one extra warm-up run is discarded)
DEFAULT_RUNS = 10

# Rival per-node storage models, in bytes
PFAC_BYTES_PER_NODE = 15
ACCW_BYTES_PER_NODE = 10
GRAVITY_BYTES_PER_NODE = 1024

# Reported rival totals (MiB) for the two reference workloads,
# keyed by (node_count, sigma)
REFERENCE_RIVAL_MIB = {
    (1_703_023, 32): {"pfac": 24.18, "accw": 15.02},
    (352_921, 256): {"gravity": 345.0},
}

# Pattern counts swept by the trie-size experiment at desk scale
TRIE_SIZE_COUNTS = (10, 100, 1000, 10_000)

# ======================
# LOGGING
# ======================

LOG_FORMAT = "%(asctime)s [hepfac] %(levelname)s: %(message)s"
LOG_LEVEL = "INFO"


def default_workers() -> int:
    """Worker count from HEPFAC_WORKERS, falling back to the CPU count."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return workers


def load_env_file(path: str) -> None:
    """Load KEY=VALUE lines from a .env file without overriding the environment."""
    if not os.path.exists(path):
        return
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith('#') and '=' in line:
                key, val = line.split('=', 1)
                os.environ.setdefault(key.strip(), val.strip())
