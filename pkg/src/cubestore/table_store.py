"""Sorted fixed-width table file with a bulk-loaded disk B-tree index.

Table file (.tbl): r fixed-width rows, no file header.  A row is the
encoded key followed by the measure record.  Each key coordinate is a
4-byte big-endian unsigned integer and the coordinates are stored most
significant dimension first (i_k, ..., i_1), so comparing the raw key
bytes equals comparing logical positions and the file is sorted both
ways at once.

Index file (.btx): fixed-size pages.  Page 0 is metadata (magic "CBTX",
page size, minimal degree, key width, root page, node count, entry
count, height; all little-endian).  Pages 1..m hold nodes: an 8-byte
node header (type byte, pad, 16-bit key count, pad), then for leaves
key/record-number entries and for internal nodes the separator keys
followed by the child page numbers.  Leaves carry (key, record number);
internal nodes carry separators only, each separator being the smallest
key of the child subtree to its right.  The tree is bulk-loaded bottom
up from the sorted stream; every node except the root keeps between
t - 1 and 2t - 1 keys, where the minimal degree t is derived from the
page size.  A lookup therefore reads at most ceil(log_t((r + 1) / 2)) + 1
node pages.  The metadata page is read once at open time and cached.
"""

from __future__ import annotations

import math
import os
import struct
from pathlib import Path
from typing import NamedTuple

from .errors import (
    DatasetError,
    DuplicateKeyError,
    MalformedInputError,
    NotSortedError,
    ParameterError,
    RangeError,
    StorageError,
)
from .linearizer import cell_count

KEY_FIELD_WIDTH = 4
RECNO_WIDTH = 8
CHILD_WIDTH = 8

DEFAULT_PAGE_SIZE = 4096
PAGE_SIZE_ENV = "CUBESTORE_PAGE_SIZE"

_MAGIC = b"CBTX"
_VERSION = 1
_META = struct.Struct("<4sHHIIIQQQI")
_NODE_HEADER = struct.Struct("<BxHxxxx")
_LEAF = 0
_INTERNAL = 1

_KEY_PACKERS: dict[int, struct.Struct] = {}


def _key_packer(k: int) -> struct.Struct:
    packer = _KEY_PACKERS.get(k)
    if packer is None:
        packer = _KEY_PACKERS[k] = struct.Struct(f">{k}I")
    return packer


def encode_key(indices) -> bytes:
    """Pack coordinates into comparable key bytes, last dimension first."""
    return _key_packer(len(indices)).pack(*reversed(indices))


def decode_key(raw: bytes, k: int) -> tuple[int, ...]:
    return tuple(reversed(_key_packer(k).unpack(raw)))


def resolve_page_size(page_size: int | None = None) -> int:
    """Explicit argument, else the CUBESTORE_PAGE_SIZE variable, else 4096."""
    if page_size is None:
        env = os.environ.get(PAGE_SIZE_ENV)
        page_size = int(env) if env else DEFAULT_PAGE_SIZE
    if page_size < _META.size or page_size < 64:
        raise ParameterError(f"page size {page_size} is too small")
    return page_size


def min_degree(page_size: int, key_bytes: int) -> int:
    """Minimal degree t such that any node of 2t - 1 keys fits in one page."""
    t = (page_size - _NODE_HEADER.size) // (2 * (key_bytes + RECNO_WIDTH))
    if t < 2:
        raise ParameterError(
            f"page size {page_size} cannot hold a B-tree of {key_bytes}-byte keys"
        )
    return t


def worst_case_page_reads(r: int, t: int) -> int:
    """Upper bound on node pages read by one lookup in an r-entry index."""
    if r < 1:
        return 1
    return max(math.ceil(math.log((r + 1) / 2, t)), 0) + 1


class BTreeMeta(NamedTuple):
    page_size: int
    t: int
    key_bytes: int
    root: int
    node_count: int
    entry_count: int
    height: int  # edges from root to leaf; 0 for a root-only tree


def write_table(cells, out, cards, record_width: int) -> int:
    """Write (coordinates, record) cells as sorted fixed-width rows.

    The stream must be strictly ascending in key order; returns the row
    count.  Equal keys are duplicates, descending keys are a sort error.
    """
    k = len(cards)
    pack = _key_packer(k).pack
    prev = b""
    count = 0
    for indices, record in cells:
        if len(indices) != k:
            raise RangeError(f"expected {k} coordinates, got {len(indices)}")
        for pos, (i, c) in enumerate(zip(indices, cards)):
            if not 1 <= i <= c:
                raise RangeError(f"coordinate {pos + 1} is {i}, outside 1..{c}")
        key = pack(*reversed(indices))
        if key == prev:
            raise DuplicateKeyError(f"duplicate key {tuple(indices)}")
        if key < prev:
            raise NotSortedError(f"key {tuple(indices)} out of order; stream must ascend")
        if len(record) != record_width:
            raise MalformedInputError(
                f"record for key {tuple(indices)} is {len(record)} bytes, "
                f"expected {record_width}"
            )
        out.write(key + record)
        prev = key
        count += 1
    return count


def _balanced_chunks(items: list, cap: int, minimum: int) -> list[list]:
    """Split into chunks of at most cap items, rebalancing the tail.

    All chunks except a lone one hold at least `minimum` items; the last
    two chunks are evenly split when the tail would underflow.
    """
    if len(items) <= cap:
        return [items]
    chunks = [items[i : i + cap] for i in range(0, len(items), cap)]
    if len(chunks[-1]) < minimum:
        merged = chunks[-2] + chunks[-1]
        half = len(merged) // 2
        chunks[-2] = merged[:half]
        chunks[-1] = merged[half:]
    return chunks


def build_index(entries, out_path, key_bytes: int, page_size: int | None = None) -> BTreeMeta:
    """Bulk-load a B-tree over a sorted (key bytes, record number) stream."""
    page_size = resolve_page_size(page_size)
    t = min_degree(page_size, key_bytes)
    entries = list(entries)
    pages: list[bytes] = []

    def leaf_page(chunk) -> bytes:
        buf = bytearray(page_size)
        _NODE_HEADER.pack_into(buf, 0, _LEAF, len(chunk))
        off = _NODE_HEADER.size
        for key, recno in chunk:
            buf[off : off + key_bytes] = key
            struct.pack_into("<Q", buf, off + key_bytes, recno)
            off += key_bytes + RECNO_WIDTH
        return bytes(buf)

    def internal_page(children) -> bytes:
        buf = bytearray(page_size)
        _NODE_HEADER.pack_into(buf, 0, _INTERNAL, len(children) - 1)
        off = _NODE_HEADER.size
        for key, _ in children[1:]:
            buf[off : off + key_bytes] = key
            off += key_bytes
        for _, page_no in children:
            struct.pack_into("<Q", buf, off, page_no)
            off += CHILD_WIDTH
        return bytes(buf)

    root = 0
    height = 0
    if entries:
        level = []
        for chunk in _balanced_chunks(entries, 2 * t - 1, t - 1):
            pages.append(leaf_page(chunk))
            level.append((chunk[0][0], len(pages)))
        while len(level) > 1:
            parents = []
            for chunk in _balanced_chunks(level, 2 * t, t):
                pages.append(internal_page(chunk))
                parents.append((chunk[0][0], len(pages)))
            level = parents
            height += 1
        root = level[0][1]

    meta = BTreeMeta(page_size, t, key_bytes, root, len(pages), len(entries), height)
    with open(out_path, "wb") as f:
        head = bytearray(page_size)
        head[: _META.size] = _META.pack(
            _MAGIC, _VERSION, 0, page_size, t, key_bytes,
            meta.root, meta.node_count, meta.entry_count, meta.height,
        )
        f.write(head)
        for page in pages:
            f.write(page)
    return meta


def _iter_table_keys(tbl_path, key_bytes: int, record_width: int):
    row = key_bytes + record_width
    block = row * 2048
    recno = 0
    with open(tbl_path, "rb") as f:
        while True:
            chunk = f.read(block)
            if not chunk:
                break
            if len(chunk) % row:
                raise StorageError(f"{tbl_path}: size is not a multiple of {row}")
            for off in range(0, len(chunk), row):
                recno += 1
                yield chunk[off : off + key_bytes], recno


def build_index_from_table(tbl_path, btx_path, k: int, record_width: int,
                           page_size: int | None = None) -> BTreeMeta:
    """Index an existing sorted table file."""
    key_bytes = k * KEY_FIELD_WIDTH
    return build_index(_iter_table_keys(tbl_path, key_bytes, record_width),
                       btx_path, key_bytes, page_size)


def build_table(cells, tbl_path, btx_path, cards, record_width: int,
                page_size: int | None = None) -> int:
    """Write the sorted row file and its index in one go; returns the row count."""
    with open(tbl_path, "wb") as f:
        count = write_table(cells, f, cards, record_width)
    build_index_from_table(tbl_path, btx_path, len(cards), record_width, page_size)
    return count


class TableStore:
    """Read handle over a sorted table file and its optional B-tree index.

    Reads go through pread; the per-lookup counters (last_page_reads,
    last_row_reads) are plain attributes and not thread-safe.
    """

    def __init__(self, tbl_file, cards, record_width: int, btx_file=None):
        self._tbl = tbl_file
        self._tbl_fd = tbl_file.fileno()
        self.cards = tuple(cards)
        cell_count(self.cards)
        self.record_width = record_width
        self.key_bytes = len(self.cards) * KEY_FIELD_WIDTH
        self.row_bytes = self.key_bytes + record_width
        size = os.fstat(self._tbl_fd).st_size
        if size % self.row_bytes:
            raise StorageError(
                f"table size {size} is not a multiple of the {self.row_bytes}-byte row"
            )
        self.row_count = size // self.row_bytes
        self._btx = btx_file
        self._btx_fd = btx_file.fileno() if btx_file else None
        self.meta: BTreeMeta | None = None
        if btx_file is not None:
            self.meta = self._read_meta()
        self.last_page_reads = 0
        self.last_row_reads = 0

    @classmethod
    def open(cls, tbl_path, cards, record_width: int, btx_path=None) -> "TableStore":
        try:
            tbl = open(tbl_path, "rb")
        except OSError as exc:
            raise StorageError(f"cannot open {tbl_path}: {exc}") from None
        btx = None
        if btx_path is not None:
            try:
                btx = open(btx_path, "rb")
            except OSError as exc:
                tbl.close()
                raise StorageError(f"cannot open {btx_path}: {exc}") from None
        try:
            return cls(tbl, cards, record_width, btx)
        except Exception:
            tbl.close()
            if btx:
                btx.close()
            raise

    def close(self) -> None:
        self._tbl.close()
        if self._btx:
            self._btx.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _read_meta(self) -> BTreeMeta:
        raw = os.pread(self._btx_fd, _META.size, 0)
        if len(raw) != _META.size:
            raise StorageError("index file is truncated")
        magic, version, _, page_size, t, key_bytes, root, nodes, entries, height = (
            _META.unpack(raw)
        )
        if magic != _MAGIC:
            raise StorageError(f"bad index magic {magic!r}")
        if version != _VERSION:
            raise StorageError(f"unsupported index version {version}")
        if key_bytes != self.key_bytes:
            raise StorageError(
                f"index keys are {key_bytes} bytes, table keys are {self.key_bytes}"
            )
        if entries != self.row_count:
            raise StorageError(
                f"index covers {entries} rows, table holds {self.row_count}"
            )
        return BTreeMeta(page_size, t, key_bytes, root, nodes, entries, height)

    def _read_page(self, page_no: int) -> bytes:
        page = os.pread(self._btx_fd, self.meta.page_size, page_no * self.meta.page_size)
        if len(page) != self.meta.page_size:
            raise StorageError(f"short read of index page {page_no}")
        return page

    def _read_row(self, recno: int) -> bytes:
        data = os.pread(self._tbl_fd, self.row_bytes, (recno - 1) * self.row_bytes)
        if len(data) != self.row_bytes:
            raise StorageError(f"short read of row {recno}")
        return data

    def btree_lookup(self, indices) -> int | None:
        """Record number of a key, or None when no row has it."""
        if self.meta is None:
            raise DatasetError("no B-tree index is attached to this table")
        key = encode_key(indices)
        width = self.key_bytes
        reads = 0
        page_no = self.meta.root
        result = None
        if page_no:
            hdr = _NODE_HEADER.size
            while True:
                page = self._read_page(page_no)
                reads += 1
                node_type, count = _NODE_HEADER.unpack_from(page, 0)
                if node_type == _INTERNAL:
                    lo, hi = 0, count
                    while lo < hi:
                        mid = (lo + hi) // 2
                        off = hdr + mid * width
                        if key < page[off : off + width]:
                            hi = mid
                        else:
                            lo = mid + 1
                    child_off = hdr + count * width + lo * CHILD_WIDTH
                    page_no = struct.unpack_from("<Q", page, child_off)[0]
                    continue
                entry = width + RECNO_WIDTH
                lo, hi = 0, count
                while lo < hi:
                    mid = (lo + hi) // 2
                    off = hdr + mid * entry
                    if page[off : off + width] < key:
                        lo = mid + 1
                    else:
                        hi = mid
                if lo < count:
                    off = hdr + lo * entry
                    if page[off : off + width] == key:
                        result = struct.unpack_from("<Q", page, off + width)[0]
                break
        self.last_page_reads = reads
        return result

    def binary_search_lookup(self, indices) -> int | None:
        """Record number of a key by bisecting the row file directly."""
        key = encode_key(indices)
        width = self.key_bytes
        reads = 0
        lo, hi = 1, self.row_count
        result = None
        while lo <= hi:
            mid = (lo + hi) // 2
            row_key = self._read_row(mid)[:width]
            reads += 1
            if row_key == key:
                result = mid
                break
            if row_key < key:
                lo = mid + 1
            else:
                hi = mid - 1
        self.last_row_reads = reads
        return result

    def read_row(self, recno: int) -> tuple[tuple[int, ...], bytes]:
        """Decoded coordinates and raw measure record of a 1-based row."""
        if not 1 <= recno <= self.row_count:
            raise RangeError(f"record number {recno} outside 1..{self.row_count}")
        raw = self._read_row(recno)
        return decode_key(raw[: self.key_bytes], len(self.cards)), raw[self.key_bytes :]

    def read_measures(self, recno: int) -> bytes:
        """Raw measure record of a 1-based row (no key decode)."""
        if not 1 <= recno <= self.row_count:
            raise RangeError(f"record number {recno} outside 1..{self.row_count}")
        return self._read_row(recno)[self.key_bytes :]

    def iter_rows(self):
        """Yield (coordinates, record) in stored (logical) order."""
        for recno in range(1, self.row_count + 1):
            raw = self._read_row(recno)
            yield decode_key(raw[: self.key_bytes], len(self.cards)), raw[self.key_bytes :]

    def iter_nodes(self):
        """Yield (page number, is_leaf, key count) for every index node."""
        if self.meta is None:
            raise DatasetError("no B-tree index is attached to this table")
        for page_no in range(1, self.meta.node_count + 1):
            page = self._read_page(page_no)
            node_type, count = _NODE_HEADER.unpack_from(page, 0)
            yield page_no, node_type == _LEAF, count
