"""Header-compressed multidimensional array storage.

The logical array has one cell per coordinate combination; only nonempty
cells are stored.  Two files describe it:

  .arr  fixed-width measure records back to back, one per nonempty cell,
        in ascending logical order; no delimiters, no file header.
  .hdr  run entries as pairs of unsigned 64-bit little-endian integers,
        ascending; entry count = file size / 16.

A run is a maximal block of zero or more empty cells followed by one or
more nonempty cells.  Its entry stores the logical position of the run's
last nonempty cell and the cumulative number of empty cells seen up to
and including the run's leading gap.  The final entry is always the
terminal boundary (total_cells, total_cells - record_count); it doubles
as the entry of a dense tail run and covers a trailing all-empty
stretch.  Lookups treat a virtual (0, 0) entry as the predecessor of the
first stored one; that virtual entry is never written.

Point lookup is three steps: linearize the coordinates, binary-search the
first entry whose end covers the position, then compare against the run's
gap to decide emptiness.  A nonempty position p maps to physical record
p minus the entry's empty count.
"""

from __future__ import annotations

import os
import struct
from bisect import bisect_left
from pathlib import Path
from typing import NamedTuple

from .errors import (
    DuplicateKeyError,
    MalformedInputError,
    NotSortedError,
    RangeError,
    StorageError,
)
from .linearizer import cell_count, delinearize, linearize

_PAIR = struct.Struct("<QQ")


class RunEntry(NamedTuple):
    end: int      # logical position of the run's last nonempty cell (or the box end)
    empties: int  # empty cells up to and including this run's leading gap


class Header:
    """Validated, fully in-memory run table of one compressed array."""

    __slots__ = ("entries", "_ends", "_filled")

    def __init__(self, entries):
        entries = [RunEntry(int(e), int(v)) for e, v in entries]
        if not entries:
            raise StorageError("a header holds at least the terminal entry")
        prev = RunEntry(0, 0)
        for pos, entry in enumerate(entries):
            last = pos == len(entries) - 1
            if entry.end <= prev.end:
                raise StorageError("run ends must be strictly increasing")
            if entry.empties < prev.empties:
                raise StorageError("empty counts must be non-decreasing")
            filled_now = entry.end - entry.empties
            filled_before = prev.end - prev.empties
            if filled_now < filled_before or (not last and filled_now == filled_before):
                raise StorageError("every non-terminal run holds at least one record")
            prev = entry
        self.entries = entries
        self._ends = [e.end for e in entries]
        self._filled = [e.end - e.empties for e in entries]

    @property
    def total_cells(self) -> int:
        return self.entries[-1].end

    @property
    def record_count(self) -> int:
        return self.entries[-1].end - self.entries[-1].empties

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        return isinstance(other, Header) and self.entries == other.entries

    def locate(self, position: int) -> int | None:
        """Physical record number of a logical position, or None if empty."""
        if not 1 <= position <= self.total_cells:
            raise RangeError(f"logical position {position} outside 1..{self.total_cells}")
        j = bisect_left(self._ends, position)
        entry = self.entries[j]
        if j:
            prev = self.entries[j - 1]
            boundary = prev.end + entry.empties - prev.empties
        else:
            boundary = entry.empties
        if boundary < position:
            return position - entry.empties
        return None

    def logical_of_physical(self, record: int) -> int:
        """Logical position of the record'th stored cell (inverse of locate)."""
        if not 1 <= record <= self.record_count:
            raise RangeError(f"record number {record} outside 1..{self.record_count}")
        j = bisect_left(self._filled, record)
        return record + self.entries[j].empties

    def save(self, path) -> None:
        with open(path, "wb") as f:
            for entry in self.entries:
                f.write(_PAIR.pack(entry.end, entry.empties))

    @classmethod
    def load(cls, path) -> "Header":
        data = Path(path).read_bytes()
        if len(data) % _PAIR.size:
            raise StorageError(f"{path}: size {len(data)} is not a multiple of {_PAIR.size}")
        return cls(_PAIR.unpack_from(data, off) for off in range(0, len(data), _PAIR.size))


def compress_stream(cells, total_cells: int, record_width: int, out) -> Header:
    """One-pass compression of a strictly ascending (position, record) stream.

    Writes the records to the binary sink and returns the header, without
    ever materializing the empty cells.  Run entries are emitted when a
    gap closes a run; after the stream, a run that does not reach the box
    end gets its entry, and the terminal boundary entry is always written.
    An empty stream yields the single entry (total_cells, total_cells).
    """
    if total_cells < 1:
        raise RangeError("the box holds at least one cell")
    if record_width < 1:
        raise MalformedInputError("records must be at least one byte wide")
    entries = []
    write = out.write
    prev = 0
    count = 0
    for position, record in cells:
        if not 1 <= position <= total_cells:
            raise RangeError(f"logical position {position} outside 1..{total_cells}")
        if position == prev:
            raise DuplicateKeyError(f"two records share logical position {position}")
        if position < prev:
            raise NotSortedError(f"position {position} after {prev}; stream must ascend")
        if len(record) != record_width:
            raise MalformedInputError(
                f"record at position {position} is {len(record)} bytes, expected {record_width}"
            )
        if prev and position > prev + 1:
            entries.append(RunEntry(prev, prev - count))
        write(record)
        count += 1
        prev = position
    if prev and total_cells > prev:
        entries.append(RunEntry(prev, prev - count))
    entries.append(RunEntry(total_cells, total_cells - count))
    return Header(entries)


class ArrayStore:
    """Read handle over a compressed array file plus its cached header.

    The header is loaded and validated up front; record reads go through
    pread, so a handle can serve interleaved lookups without seek state.
    """

    def __init__(self, arr_file, header: Header, cards, record_width: int):
        self._file = arr_file
        self._fd = arr_file.fileno()
        self.header = header
        self.cards = tuple(cards)
        self.record_width = record_width
        total = cell_count(self.cards)
        if header.total_cells != total:
            raise StorageError(
                f"header covers {header.total_cells} cells, box has {total}"
            )
        size = os.fstat(self._fd).st_size
        if size != header.record_count * record_width:
            raise StorageError(
                f"array file is {size} bytes, header expects "
                f"{header.record_count * record_width}"
            )

    @classmethod
    def open(cls, arr_path, hdr_path, cards, record_width: int) -> "ArrayStore":
        header = Header.load(hdr_path)
        try:
            f = open(arr_path, "rb")
        except OSError as exc:
            raise StorageError(f"cannot open {arr_path}: {exc}") from None
        try:
            return cls(f, header, cards, record_width)
        except Exception:
            f.close()
            raise

    @property
    def record_count(self) -> int:
        return self.header.record_count

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def read_record(self, record: int) -> bytes:
        """Raw measure record at a 1-based physical position."""
        if not 1 <= record <= self.header.record_count:
            raise RangeError(f"record number {record} outside 1..{self.header.record_count}")
        w = self.record_width
        data = os.pread(self._fd, w, (record - 1) * w)
        if len(data) != w:
            raise StorageError(f"short read at record {record}")
        return data

    def get_cell(self, indices) -> bytes | None:
        """Measure record at the given coordinates, or None for an empty cell."""
        record = self.header.locate(linearize(indices, self.cards))
        if record is None:
            return None
        return self.read_record(record)

    def logical_of_physical(self, record: int) -> int:
        return self.header.logical_of_physical(record)

    def iterate_nonempty(self):
        """Yield (coordinates, record) for every stored cell in logical order."""
        prev = RunEntry(0, 0)
        record = 0
        for entry in self.header.entries:
            first = prev.end + (entry.empties - prev.empties) + 1
            for position in range(first, entry.end + 1):
                record += 1
                yield delinearize(position, self.cards), self.read_record(record)
            prev = entry
