"""
Bitmapped Failure-less Trie
Builds and queries a trie stored as one contiguous node array.
Each node is a bitmap of child symbols plus the index of its first child;
a child is found at offset + (number of set bits below its symbol).
"""

import logging
import string
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

import config
from errors import AlphabetError, PatternError, ValidationError

logger = logging.getLogger("hepfac.trie_core")

WORD_DTYPE = np.dtype("<u4")

_LETTERS = (string.ascii_lowercase + string.ascii_uppercase).encode("ascii")


# ======================
# ALPHABET
# ======================

@dataclass(frozen=True)
class Alphabet:
    """Byte <-> symbol-index mapping for an alphabet of `size` symbols."""

    size: int
    to_symbol: Tuple[int, ...]  # 256 entries, -1 for bytes outside the alphabet
    from_symbol: bytes

    @property
    def words_per_bitmap(self) -> int:
        return -(-self.size // config.WORD_BITS)

    def __contains__(self, byte: int) -> bool:
        return self.to_symbol[byte] >= 0

    def encode(self, pattern: bytes) -> Tuple[int, ...]:
        """Map every byte of `pattern` to its symbol index."""
        to_symbol = self.to_symbol
        symbols = []
        for b in pattern:
            s = to_symbol[b]
            if s < 0:
                raise PatternError(f"byte 0x{b:02x} in pattern {pattern!r} is outside the alphabet")
            symbols.append(s)
        return tuple(symbols)

    def symbol_table(self) -> np.ndarray:
        """256-entry lookup array (int16, -1 for bytes outside the alphabet)."""
        return np.array(self.to_symbol, dtype=np.int16)


def make_alphabet(symbols: Union[bytes, str, Sequence[int]]) -> Alphabet:
    """
    Build an alphabet whose i-th symbol is the i-th byte of `symbols`.

    Args:
        symbols: Ordered, distinct byte values (2 to 256 of them)

    Returns:
        Alphabet with size = len(symbols)
    """
    if isinstance(symbols, str):
        symbols = symbols.encode("latin-1")
    symbols = bytes(symbols)
    if not 2 <= len(symbols) <= 256:
        raise AlphabetError(f"alphabet size must be between 2 and 256, got {len(symbols)}")

    to_symbol = [-1] * 256
    for i, b in enumerate(symbols):
        if to_symbol[b] >= 0:
            raise AlphabetError(f"duplicate byte 0x{b:02x} in alphabet")
        to_symbol[b] = i
    return Alphabet(size=len(symbols), to_symbol=tuple(to_symbol), from_symbol=symbols)


def default_alphabet(sigma: int) -> Alphabet:
    """Conventional alphabet for a given size: DNA, letters, printable ASCII, then raw bytes."""
    if not 2 <= sigma <= 256:
        raise AlphabetError(f"alphabet size must be between 2 and 256, got {sigma}")
    if sigma == 4:
        return make_alphabet(b"ACGT")
    if sigma <= len(_LETTERS):
        return make_alphabet(_LETTERS[:sigma])
    if sigma <= 94:
        return make_alphabet(bytes(range(0x21, 0x21 + sigma)))
    return make_alphabet(bytes(range(sigma)))


# ======================
# BITMAPS
# ======================

def bitmap_rank(bitmap, symbol: int, sigma: Optional[int] = None) -> int:
    """
    Count the set bits strictly below `symbol`.

    Args:
        bitmap: Sequence of 32-bit words (bit b of the bitmap is bit b % 32 of word b // 32)
        symbol: Symbol index to rank
        sigma: Alphabet size; defaults to the bitmap's width in bits

    Returns:
        Rank of `symbol` among the set bits
    """
    words = [int(w) for w in np.asarray(bitmap, dtype=np.uint64).ravel()]
    limit = sigma if sigma is not None else len(words) * config.WORD_BITS
    if not 0 <= symbol < limit:
        raise ValidationError(f"symbol {symbol} out of range for alphabet of size {limit}")
    full, rem = divmod(symbol, config.WORD_BITS)
    count = sum(w.bit_count() for w in words[:full])
    if rem:
        count += (words[full] & ((1 << rem) - 1)).bit_count()
    return count


def bitmap_from_symbols(symbols: Iterable[int], sigma: int) -> np.ndarray:
    """Word array with the bits of `symbols` set."""
    words = np.zeros(-(-sigma // config.WORD_BITS), dtype=WORD_DTYPE)
    for s in symbols:
        words[s // config.WORD_BITS] |= np.uint32(1 << (s % config.WORD_BITS))
    return words


# ======================
# TRIE
# ======================

class TrieNode(NamedTuple):
    bitmap: np.ndarray
    offset: int
    terminal: bool

    @property
    def child_count(self) -> int:
        return sum(int(w).bit_count() for w in self.bitmap)


class ScanTables(NamedTuple):
    """Plain-Python views of the node array, used on hot paths."""

    masks: List[int]
    offsets: List[int]
    terminal: List[bool]
    root_next: List[int]  # byte -> root child index, -1 when absent
    to_symbol: Tuple[int, ...]
    final: int


@dataclass(eq=False)
class Trie:
    """
    Contiguous-array trie. Index 0 is the root.

    When `stage` >= 1, `final_node` is the shared terminal: a node whose
    offset equals final_node sends every one of its set bits there.
    """

    alphabet: Alphabet
    bitmaps: np.ndarray  # (node_count, words_per_bitmap) uint32
    offsets: np.ndarray  # (node_count,) uint32
    terminal: np.ndarray  # (node_count,) bool
    dictionary: Dict[bytes, int]
    depth_limit: Optional[int] = None
    stage: int = 0
    final_node: int = 0
    truncation_noop: bool = False

    @property
    def node_count(self) -> int:
        return int(self.offsets.shape[0])

    def node(self, index: int) -> TrieNode:
        return TrieNode(self.bitmaps[index], int(self.offsets[index]), bool(self.terminal[index]))

    @cached_property
    def max_pattern_length(self) -> int:
        return max((len(p) for p in self.dictionary), default=0)

    @cached_property
    def patterns_by_id(self) -> List[bytes]:
        ordered = [b""] * len(self.dictionary)
        for pattern, pid in self.dictionary.items():
            ordered[pid] = pattern
        return ordered

    @cached_property
    def scan_tables(self) -> ScanTables:
        bitmaps = np.ascontiguousarray(self.bitmaps, dtype=WORD_DTYPE)
        masks = [int.from_bytes(row.tobytes(), "little") for row in bitmaps]
        offsets = [int(o) for o in self.offsets]
        terminal = [bool(t) for t in self.terminal]
        final = self.final_node if self.stage >= 1 else -1

        root_next = [-1] * 256
        for byte in range(256):
            sym = self.alphabet.to_symbol[byte]
            if sym >= 0:
                child = _child(masks, offsets, final, 0, sym)
                if child is not None:
                    root_next[byte] = child
        return ScanTables(masks, offsets, terminal, root_next, self.alphabet.to_symbol, final)

    @cached_property
    def prefix_index(self) -> Dict[bytes, List[Tuple[bytes, int]]]:
        if self.depth_limit is None:
            return {}
        from prefix_matching import build_prefix_index
        return build_prefix_index(self.dictionary, self.depth_limit)

    def __getstate__(self):
        # cached tables are rebuilt lazily on the other side
        state = dict(self.__dict__)
        for key in ("scan_tables", "prefix_index", "patterns_by_id", "max_pattern_length"):
            state.pop(key, None)
        return state


def _child(masks: List[int], offsets: List[int], final: int, node: int, sym: int) -> Optional[int]:
    bm = masks[node]
    bit = 1 << sym
    if not bm & bit:
        return None
    off = offsets[node]
    if off == final:
        return off
    return off + (bm & (bit - 1)).bit_count()


def _pattern_list(patterns) -> List[bytes]:
    items = getattr(patterns, "patterns", patterns)
    out = []
    for p in items:
        if isinstance(p, str):
            p = p.encode("latin-1")
        out.append(bytes(p))
    return out


def build_trie(patterns, alphabet: Alphabet) -> Trie:
    """
    Build the trie breadth-first from alphabetically sorted patterns.

    Args:
        patterns: PatternSet or iterable of byte strings; ids follow input order
        alphabet: Alphabet every pattern byte must belong to

    Returns:
        Uncompressed Trie with all depth-d nodes before depth-d+1 nodes
    """
    patterns = _pattern_list(patterns)
    if not patterns:
        raise PatternError("empty pattern set")

    dictionary: Dict[bytes, int] = {}
    for pid, p in enumerate(patterns):
        if not p:
            raise PatternError(f"pattern {pid} is empty")
        if len(p) > config.MAX_PATTERN_LENGTH:
            raise PatternError(f"pattern {pid} is {len(p):,} bytes, above the {config.MAX_PATTERN_LENGTH:,} byte limit")
        if p in dictionary:
            raise PatternError(f"duplicate pattern {p!r}")
        dictionary[p] = pid

    keys = sorted(alphabet.encode(p) for p in patterns)

    masks = [0]
    offsets = [0]
    terminal = [False]
    # (node index, first key, end key, depth): keys[lo:hi] share a prefix of length depth
    queue = deque([(0, 0, len(keys), 0)])
    while queue:
        node, lo, hi, depth = queue.popleft()
        j = lo
        # sorted order puts the key equal to the prefix first
        while j < hi and len(keys[j]) == depth:
            terminal[node] = True
            j += 1

        first_child = len(masks)
        bm = 0
        while j < hi:
            sym = keys[j][depth]
            k = j + 1
            while k < hi and keys[k][depth] == sym:
                k += 1
            bm |= 1 << sym
            queue.append((len(masks), j, k, depth + 1))
            masks.append(0)
            offsets.append(0)
            terminal.append(False)
            j = k
        masks[node] = bm
        offsets[node] = first_child if bm else 0

    if len(masks) > config.MAX_NODE_COUNT:
        raise ValidationError(f"trie has {len(masks):,} nodes, above the {config.MAX_NODE_COUNT:,} limit")

    logger.debug("built trie: %d patterns, %d nodes, sigma=%d", len(patterns), len(masks), alphabet.size)
    return make_trie(alphabet, masks, offsets, terminal, dictionary)


def make_trie(alphabet: Alphabet, masks: List[int], offsets: List[int], terminal: List[bool],
              dictionary: Dict[bytes, int], **kwargs) -> Trie:
    """Pack Python-int bitmaps and offsets into the contiguous numpy node array."""
    width = alphabet.words_per_bitmap
    raw = b"".join(m.to_bytes(4 * width, "little") for m in masks)
    bitmaps = np.frombuffer(raw, dtype=WORD_DTYPE).reshape(len(masks), width).copy()
    return Trie(
        alphabet=alphabet,
        bitmaps=bitmaps,
        offsets=np.array(offsets, dtype=np.uint32),
        terminal=np.array(terminal, dtype=bool),
        dictionary=dict(dictionary),
        **kwargs,
    )


def transition(trie: Trie, node: int, byte: int) -> Optional[int]:
    """Follow the edge for `byte` out of `node`; None when there is no such child."""
    if not 0 <= node < trie.node_count:
        raise ValidationError(f"node {node} out of range (trie has {trie.node_count} nodes)")
    tables = trie.scan_tables
    sym = tables.to_symbol[byte]
    if sym < 0:
        return None
    return _child(tables.masks, tables.offsets, tables.final, node, sym)


def walk(trie: Trie, text: bytes, start: int) -> List[int]:
    """Depths of the terminal nodes crossed walking from the root at text[start]."""
    tables = trie.scan_tables
    depths = []
    node = 0
    pos = start
    while pos < len(text):
        sym = tables.to_symbol[text[pos]]
        if sym < 0:
            break
        node = _child(tables.masks, tables.offsets, tables.final, node, sym)
        if node is None:
            break
        pos += 1
        if tables.terminal[node]:
            depths.append(pos - start)
    return depths


# ======================
# GRAPH FORM (used by compression and truncation)
# ======================

@dataclass
class TrieGraph:
    """Editable adjacency form of a trie: children[u] = [(symbol, child), ...] by ascending symbol."""

    children: List[List[Tuple[int, int]]]
    terminal: List[bool]
    final: Optional[int] = None

    def depths(self) -> Dict[int, int]:
        """Shallowest depth at which each reachable node is reached."""
        depth = {0: 0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for _, c in self.children[u]:
                if c not in depth:
                    depth[c] = depth[u] + 1
                    queue.append(c)
        return depth

    def parents(self) -> Dict[int, List[int]]:
        reach = self.depths()
        parents: Dict[int, List[int]] = {}
        for u in reach:
            for _, c in self.children[u]:
                parents.setdefault(c, []).append(u)
        return parents


def graph_from_trie(trie: Trie) -> TrieGraph:
    """Decode the node array into explicit child lists (node ids = array indices)."""
    tables = trie.scan_tables
    children = []
    for node in range(trie.node_count):
        bm = tables.masks[node]
        off = tables.offsets[node]
        kids = []
        rank = 0
        while bm:
            low = bm & -bm
            kids.append((low.bit_length() - 1, off if off == tables.final else off + rank))
            rank += 1
            bm ^= low
        children.append(kids)
    final = trie.final_node if trie.stage >= 1 and trie.final_node > 0 else None
    return TrieGraph(children=children, terminal=list(tables.terminal), final=final)


def layout_graph(graph: TrieGraph, alphabet: Alphabet, dictionary: Dict[bytes, int], **kwargs) -> Trie:
    """
    Lay a trie graph out as a contiguous array, breadth-first.

    Siblings of a multi-child node get consecutive slots. A node shared by
    several parents is placed with the one parent that has other children
    (at most one may), or at its first reference otherwise. The shared
    terminal goes last.
    """
    children, final = graph.children, graph.final

    def redirects(kids):
        return final is not None and all(c == final for _, c in kids)

    reachable = graph.depths()
    home: Dict[int, int] = {}
    for u in reachable:
        kids = children[u]
        if len(kids) > 1 and not redirects(kids):
            for _, c in kids:
                if c == final:
                    raise ValidationError(f"shared terminal inside the mixed sibling run of node {u}")
                if home.setdefault(c, u) != u:
                    raise ValidationError(f"node {c} belongs to two sibling runs")

    slot = {0: 0}
    order = [0]
    final_used = False
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        kids = children[u]
        if not kids:
            continue
        if redirects(kids):
            final_used = True
            continue
        if len(kids) > 1:
            for _, c in kids:
                slot[c] = len(order)
                order.append(c)
        else:
            c = kids[0][1]
            if c not in slot and c not in home:
                slot[c] = len(order)
                order.append(c)
    if final_used:
        slot[final] = len(order)
        order.append(final)

    masks = [0] * len(order)
    offsets = [0] * len(order)
    terminal = [False] * len(order)
    for new, u in enumerate(order):
        terminal[new] = graph.terminal[u]
        kids = children[u]
        if not kids:
            continue
        bm = 0
        for s, _ in kids:
            bm |= 1 << s
        masks[new] = bm
        offsets[new] = slot[final] if redirects(kids) else slot[kids[0][1]]

    if len(order) > config.MAX_NODE_COUNT:
        raise ValidationError(f"trie has {len(order):,} nodes, above the {config.MAX_NODE_COUNT:,} limit")
    final_node = slot[final] if final_used else 0
    return make_trie(alphabet, masks, offsets, terminal, dictionary, final_node=final_node, **kwargs)


# ======================
# MEMORY ACCOUNTING
# ======================

@dataclass(frozen=True)
class MemoryReport:
    node_count: int
    bytes_per_node: int
    total_bytes: int
    sigma: int

    @property
    def total_mib(self) -> str:
        """Binary megabytes truncated to one decimal."""
        tenths = self.total_bytes * 10 // (1 << 20)
        return f"{tenths // 10}.{tenths % 10}"

    def to_dict(self) -> Dict[str, Union[int, str]]:
        return {
            "node_count": self.node_count,
            "bytes_per_node": self.bytes_per_node,
            "total_bytes": self.total_bytes,
            "sigma": self.sigma,
            "total_mib": self.total_mib,
        }

    def render(self) -> str:
        return (f"{self.node_count:,} nodes x {self.bytes_per_node} B = "
                f"{self.total_bytes:,} B ({self.total_mib} MiB), sigma={self.sigma}")


def bytes_per_node(sigma: int) -> int:
    return 4 * -(-sigma // config.WORD_BITS) + 4


def memory_report_for(node_count: int, sigma: int) -> MemoryReport:
    per_node = bytes_per_node(sigma)
    return MemoryReport(node_count=node_count, bytes_per_node=per_node,
                        total_bytes=node_count * per_node, sigma=sigma)


def memory_report(trie: Trie) -> MemoryReport:
    return memory_report_for(trie.node_count, trie.alphabet.size)
