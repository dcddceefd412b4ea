"""Row-major linearization between k-dimensional coordinates and logical positions.

Coordinates and logical positions are 1-based.  For per-dimension cell
counts (c_1, ..., c_k) the logical position of (i_1, ..., i_k) is

    (((i_k - 1) * c_{k-1} + i_{k-1} - 1) * c_{k-2} + ...) * c_1 + i_1

so the last dimension varies slowest, the first dimension is contiguous,
and the mapping costs exactly k - 1 multiplications.  Sorting cells by
the reversed coordinate tuple (i_k, ..., i_1) therefore equals sorting
by logical position.

Logical positions must fit in an unsigned 64-bit integer; anything
larger is rejected.
"""

from __future__ import annotations

from collections.abc import Sequence

from .errors import CapacityError, RangeError

U64_MAX = 2**64 - 1


def cell_count(cards: Sequence[int]) -> int:
    """Return the total cell count of a box, enforcing the 64-bit cap."""
    if not cards:
        raise RangeError("box needs at least one dimension")
    total = 1
    for c in cards:
        if c < 1:
            raise RangeError(f"cardinality must be >= 1, got {c}")
        total *= c
    if total > U64_MAX:
        raise CapacityError(f"cell count {total} exceeds the unsigned 64-bit range")
    return total


def linearize(indices: Sequence[int], cards: Sequence[int]) -> int:
    """Map 1-based coordinates to their 1-based logical position."""
    k = len(cards)
    if k == 0:
        raise RangeError("box needs at least one dimension")
    if len(indices) != k:
        raise RangeError(f"expected {k} coordinates, got {len(indices)}")
    i = indices[k - 1]
    if not 1 <= i <= cards[k - 1]:
        raise RangeError(f"coordinate {k} is {i}, outside 1..{cards[k - 1]}")
    acc = i - 1
    for j in range(k - 2, -1, -1):
        i = indices[j]
        c = cards[j]
        if not 1 <= i <= c:
            raise RangeError(f"coordinate {j + 1} is {i}, outside 1..{c}")
        acc = acc * c + i - 1
    if acc >= U64_MAX:
        raise CapacityError("logical position exceeds the unsigned 64-bit range")
    return acc + 1


def delinearize(position: int, cards: Sequence[int]) -> tuple[int, ...]:
    """Map a 1-based logical position back to coordinates (inverse of linearize)."""
    total = cell_count(cards)
    if not 1 <= position <= total:
        raise RangeError(f"logical position {position} outside 1..{total}")
    z = position - 1
    out = []
    for c in cards[:-1]:
        out.append(z % c + 1)
        z //= c
    out.append(z + 1)
    return tuple(out)
