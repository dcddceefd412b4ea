"""Relation schema, dimension directories, row encoding, and sparsity statistics.

A finite relation of arity n with a k-attribute primary key is stored with
the key attributes dictionary-encoded: every key attribute gets a directory
of its distinct values in sorted order, and a row's key collapses to the
1-based positions of its values in those directories.  The remaining n - k
attributes are serialized into one fixed-width measure record per row.
Key-only relations (k = n) carry a single presence byte instead, so every
relation shape shares the same record-per-row layout.

Directory files (.dim) are line-based UTF-8 text: one value per line in
sorted order, the 1-based line number being the value's index.  Newlines
and backslashes inside a value are escaped as \\n and \\\\.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DegenerateConjointError,
    DuplicateRowError,
    ImpossibleDensityError,
    MalformedInputError,
    ParameterError,
    RangeError,
    UndefinedDensityError,
    UnknownDimensionValueError,
)
from .linearizer import cell_count

KEY_FIELD_WIDTH = 4  # bytes per dictionary-encoded key field
MAX_CARDINALITY = 2**32 - 1  # key fields are 4-byte unsigned

KIND_INT = "int64"
KIND_FLOAT = "float64"
KIND_TEXT = "text"
KIND_PRESENCE = "presence"

_INT64 = struct.Struct("<q")
_FLOAT64 = struct.Struct("<d")
_I64_MIN = -(2**63)
_I64_MAX = 2**63 - 1


@dataclass(frozen=True)
class MeasureColumn:
    """One non-key attribute: a name, a kind, and a fixed byte width.

    int64 is an 8-byte little-endian two's-complement integer, float64 an
    8-byte little-endian IEEE-754 double, text a NUL-padded UTF-8 field of
    the declared width, presence a single 0x01 byte.
    """

    name: str
    kind: str
    width: int

    def __post_init__(self):
        if self.kind in (KIND_INT, KIND_FLOAT):
            if self.width != 8:
                raise ParameterError(f"{self.kind} columns are 8 bytes wide, got {self.width}")
        elif self.kind == KIND_TEXT:
            if self.width < 1:
                raise ParameterError("text columns need a width of at least 1")
        elif self.kind == KIND_PRESENCE:
            if self.width != 1:
                raise ParameterError("presence columns are 1 byte wide")
        else:
            raise ParameterError(f"unknown column kind {self.kind!r}")

    def from_text(self, text: str):
        """Parse a textual value (e.g. a CSV field) into a typed value."""
        if self.kind == KIND_INT:
            try:
                value = int(text, 10)
            except ValueError:
                raise MalformedInputError(f"column {self.name}: {text!r} is not an integer") from None
            if not _I64_MIN <= value <= _I64_MAX:
                raise MalformedInputError(f"column {self.name}: {text!r} does not fit in 64 bits")
            return value
        if self.kind == KIND_FLOAT:
            try:
                return float(text)
            except ValueError:
                raise MalformedInputError(f"column {self.name}: {text!r} is not a number") from None
        if self.kind == KIND_TEXT:
            return text
        raise MalformedInputError(f"column {self.name}: presence columns take no input")

    def pack(self, value) -> bytes:
        if self.kind == KIND_INT:
            if not isinstance(value, int) or not _I64_MIN <= value <= _I64_MAX:
                raise MalformedInputError(f"column {self.name}: bad int64 value {value!r}")
            return _INT64.pack(value)
        if self.kind == KIND_FLOAT:
            return _FLOAT64.pack(float(value))
        if self.kind == KIND_TEXT:
            raw = value.encode("utf-8") if isinstance(value, str) else bytes(value)
            if b"\x00" in raw:
                raise MalformedInputError(f"column {self.name}: NUL bytes are not allowed in text")
            if len(raw) > self.width:
                raise MalformedInputError(
                    f"column {self.name}: value is {len(raw)} bytes, width is {self.width}"
                )
            return raw.ljust(self.width, b"\x00")
        if value != 1:
            raise MalformedInputError(f"column {self.name}: presence value must be 1")
        return b"\x01"

    def unpack(self, raw: bytes):
        if self.kind == KIND_INT:
            return _INT64.unpack(raw)[0]
        if self.kind == KIND_FLOAT:
            return _FLOAT64.unpack(raw)[0]
        if self.kind == KIND_TEXT:
            return raw.rstrip(b"\x00").decode("utf-8")
        if raw != b"\x01":
            raise MalformedInputError(f"column {self.name}: corrupt presence byte {raw!r}")
        return 1

    def canonical(self, value) -> str:
        """Render a typed value back to its canonical text form."""
        if self.kind == KIND_FLOAT:
            return repr(value)
        return str(value)


class RecordCodec:
    """Packs and unpacks the fixed-width measure record of one row."""

    __slots__ = ("columns", "record_width", "_offsets")

    def __init__(self, columns):
        self.columns = tuple(columns)
        if not self.columns:
            raise ParameterError("a record codec needs at least one column")
        offsets = []
        pos = 0
        for col in self.columns:
            offsets.append(pos)
            pos += col.width
        self._offsets = tuple(offsets)
        self.record_width = pos

    @classmethod
    def presence(cls) -> "RecordCodec":
        """Codec for key-only relations: a single presence byte per row."""
        return cls((MeasureColumn("present", KIND_PRESENCE, 1),))

    @property
    def is_presence(self) -> bool:
        return len(self.columns) == 1 and self.columns[0].kind == KIND_PRESENCE

    def pack(self, values) -> bytes:
        if len(values) != len(self.columns):
            raise MalformedInputError(
                f"expected {len(self.columns)} measure values, got {len(values)}"
            )
        return b"".join(col.pack(v) for col, v in zip(self.columns, values))

    def unpack(self, raw: bytes) -> tuple:
        if len(raw) != self.record_width:
            raise MalformedInputError(
                f"record is {len(raw)} bytes, expected {self.record_width}"
            )
        return tuple(
            col.unpack(raw[off : off + col.width])
            for col, off in zip(self.columns, self._offsets)
        )


@dataclass(frozen=True)
class RelationSchema:
    """Shape of one stored relation.

    n is the arity, the first k attributes form the primary key, cards are
    the key-attribute cardinalities (directory sizes), and measure_widths
    are the byte widths of the n - k measure fields.  Key fields are
    stored as 4-byte unsigned integers, so each cardinality must fit in
    32 bits and the total cell count in 64 bits.
    """

    n: int
    k: int
    cards: tuple[int, ...]
    measure_widths: tuple[int, ...] = ()
    key_widths: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.k < 1 or self.n < self.k:
            raise ParameterError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if len(self.cards) != self.k:
            raise ParameterError(f"expected {self.k} cardinalities, got {len(self.cards)}")
        for c in self.cards:
            if not 1 <= c <= MAX_CARDINALITY:
                raise ParameterError(f"cardinality {c} outside 1..{MAX_CARDINALITY}")
        cell_count(self.cards)  # enforces the 64-bit cap
        if len(self.measure_widths) != self.n - self.k:
            raise ParameterError(
                f"expected {self.n - self.k} measure widths, got {len(self.measure_widths)}"
            )
        for w in self.measure_widths:
            if w < 1:
                raise ParameterError(f"measure width must be >= 1, got {w}")
        if not self.key_widths:
            object.__setattr__(self, "key_widths", (KEY_FIELD_WIDTH,) * self.k)
        elif self.key_widths != (KEY_FIELD_WIDTH,) * self.k:
            raise ParameterError(f"key fields are fixed at {KEY_FIELD_WIDTH} bytes each")

    @property
    def case(self) -> str:
        """Construction case: 1.1 for k = n, 1.2 for one measure, 1.3 otherwise."""
        if self.k == self.n:
            return "1.1"
        if self.k == self.n - 1:
            return "1.2"
        return "1.3"

    @property
    def cell_total(self) -> int:
        return cell_count(self.cards)

    @property
    def record_width(self) -> int:
        """Bytes per measure record; key-only relations store a presence byte."""
        if self.k == self.n:
            return 1
        return sum(self.measure_widths)

    @property
    def row_bytes(self) -> int:
        """Bytes per table row: key fields plus the measure record."""
        return sum(self.key_widths) + self.record_width

    @property
    def delta(self) -> float:
        """Fraction of a row taken by non-key data."""
        return self.record_width / self.row_bytes


@dataclass(frozen=True)
class RelationStats:
    """Row count and derived sparsity figures for one relation."""

    r: int
    row_bytes: int
    record_width: int
    cell_total: int

    def __post_init__(self):
        if self.r < 0:
            raise ParameterError("row count cannot be negative")
        if self.r > self.cell_total:
            raise ImpossibleDensityError(
                f"{self.r} rows cannot have unique keys in {self.cell_total} cells"
            )

    @classmethod
    def from_schema(cls, schema: RelationSchema, r: int) -> "RelationStats":
        return cls(r=r, row_bytes=schema.row_bytes,
                   record_width=schema.record_width, cell_total=schema.cell_total)

    @property
    def delta(self) -> float:
        return self.record_width / self.row_bytes

    @property
    def rho(self) -> float:
        return self.r / self.cell_total


class DimensionDirectory:
    """Distinct values of one dimension in sorted order; index = 1-based position.

    Values are compared by their UTF-8 encoding; for UTF-8 that equals
    code-point order, so plain string sorting is used.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        vals = list(values)
        for a, b in zip(vals, vals[1:]):
            if not a < b:
                raise MalformedInputError("directory values must be strictly sorted")
        self.values = vals

    @classmethod
    def from_values(cls, values) -> "DimensionDirectory":
        """Build a directory from an unordered iterable, deduplicating."""
        return cls(sorted(set(values)))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __eq__(self, other):
        return isinstance(other, DimensionDirectory) and self.values == other.values

    def index_of(self, value: str) -> int:
        pos = bisect_left(self.values, value)
        if pos == len(self.values) or self.values[pos] != value:
            raise UnknownDimensionValueError(f"value {value!r} is not in the directory")
        return pos + 1

    def value_of(self, index: int) -> str:
        if not 1 <= index <= len(self.values):
            raise RangeError(f"directory index {index} outside 1..{len(self.values)}")
        return self.values[index - 1]

    def save(self, path) -> None:
        data = "".join(_escape(v) + "\n" for v in self.values)
        Path(path).write_bytes(data.encode("utf-8"))

    @classmethod
    def load(cls, path) -> "DimensionDirectory":
        data = Path(path).read_bytes().decode("utf-8")
        if data.endswith("\n"):
            data = data[:-1]
        elif data:
            raise MalformedInputError(f"{path}: missing trailing newline")
        if not data:
            return cls([])
        return cls([_unescape(line) for line in data.split("\n")])


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape(line: str) -> str:
    out = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\" and i + 1 < len(line):
            nxt = line[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def compute_active_domains(rows, arity: int | None = None) -> list[DimensionDirectory]:
    """Collect the distinct values of every attribute position.

    Returns one directory per position.  Rejects rows of uneven arity and
    exact duplicate rows.  With no rows the arity cannot be inferred, so
    the result is empty unless an explicit arity is given.
    """
    seen = set()
    domains: list[set] | None = None
    for row in rows:
        t = tuple(row)
        if domains is None:
            if arity is not None and len(t) != arity:
                raise MalformedInputError(f"expected arity {arity}, got {len(t)}")
            arity = len(t)
            if arity == 0:
                raise MalformedInputError("rows must have at least one attribute")
            domains = [set() for _ in range(arity)]
        elif len(t) != arity:
            raise MalformedInputError(f"row arity {len(t)} differs from {arity}")
        if t in seen:
            raise DuplicateRowError(f"duplicate row {t!r}")
        seen.add(t)
        for dom, v in zip(domains, t):
            dom.add(v)
    if domains is None:
        return [DimensionDirectory([]) for _ in range(arity)] if arity else []
    return [DimensionDirectory.from_values(dom) for dom in domains]


def encode_row(row, key_dirs) -> tuple[tuple[int, ...], tuple]:
    """Dictionary-encode the key of one row.

    Returns (key indices, measure values).  The first len(key_dirs) fields
    are translated through the directories; the rest are returned as-is.
    A key-only row yields the presence value (1,) as its measures.
    """
    k = len(key_dirs)
    t = tuple(row)
    if len(t) < k:
        raise MalformedInputError(f"row has {len(t)} fields, key needs {k}")
    indices = tuple(d.index_of(v) for d, v in zip(key_dirs, t))
    measures = t[k:] if len(t) > k else (1,)
    return indices, measures


def density(r: int, cards) -> float:
    """Fraction of box cells that hold a row: r divided by the cell count."""
    if r < 0:
        raise ParameterError("row count cannot be negative")
    total = cell_count(cards)
    if r > total:
        raise ImpossibleDensityError(f"{r} rows cannot have unique keys in {total} cells")
    return r / total


def space_ratio(delta: float, rho: float) -> float:
    """Size of the uncompressed array relative to the table: delta / rho.

    A ratio below 1 means the array form is smaller, above 1 the table.
    """
    if rho == 0:
        raise UndefinedDensityError("space ratio is undefined at density zero")
    if not 0 <= delta < 1:
        raise ParameterError(f"data ratio must be in [0, 1), got {delta}")
    if not 0 < rho <= 1:
        raise ParameterError(f"density must be in (0, 1], got {rho}")
    return delta / rho


@dataclass(frozen=True)
class ConjointResult:
    """Outcome of folding the first h key dimensions into one.

    conjoint_values lists the distinct key prefixes in the order that
    preserves logical ordering (last prefix coordinate most significant),
    cell_ratio compares their count to the full prefix box, and rho_prime
    is the density of the remapped relation.
    """

    h: int
    conjoint_values: tuple[tuple[int, ...], ...]
    cell_ratio: float
    rho_prime: float
    cards_after: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.conjoint_values)


def build_conjoint(cells, h: int, cards, allow_degenerate: bool = False):
    """Fold the first h key dimensions of an encoded relation into one.

    cells is an iterable of (key indices, measures).  Returns the
    ConjointResult and the remapped cell list, whose keys are
    (conjoint index, i_{h+1}, ..., i_k).  Prefixes are ordered with the
    last coordinate most significant, matching logical order, so a
    stream sorted by logical position stays sorted after remapping.
    Folding the entire key (h = k) turns the array into a plain list of
    rows and is refused unless explicitly allowed.
    """
    k = len(cards)
    if not 1 <= h <= k:
        raise ParameterError(f"prefix length must be in 1..{k}, got {h}")
    if h == k and not allow_degenerate:
        raise DegenerateConjointError(
            "folding the whole key leaves a degenerate one-dimensional array"
        )
    cells = list(cells)
    prefixes = sorted({key[:h] for key, _ in cells}, key=lambda t: t[::-1])
    position = {prefix: j + 1 for j, prefix in enumerate(prefixes)}
    remapped = [((position[key[:h]],) + tuple(key[h:]), measures) for key, measures in cells]
    prefix_box = cell_count(cards[:h])
    rest_box = cell_count(cards[h:]) if h < k else 1
    size = len(prefixes)
    cards_after = (size,) + tuple(cards[h:])
    result = ConjointResult(
        h=h,
        conjoint_values=tuple(prefixes),
        cell_ratio=size / prefix_box,
        rho_prime=(len(cells) / (size * rest_box)) if size else 0.0,
        cards_after=cards_after,
    )
    return result, remapped
