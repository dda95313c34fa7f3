"""Octant tiling systems, the row-major word encoding, a brute-force
validity oracle, and an exhaustive bounded solver.

The octant of parameter n is the triangular region
{(r, c) : 0 <= c <= r <= n}. A word over the tile set encodes a tiling
by listing cells in row-major order (0,0), (1,0), (1,1), (2,0), ...
Validity (correct initial/final tiles, horizontal and vertical
adjacency) is decided here by direct coordinate enumeration; compiled
encoders are tested against this oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence


@dataclass(frozen=True)
class TilingSystem:
    tiles: tuple  # ordered, distinct symbols
    horiz: frozenset  # pairs (left, right)
    vert: frozenset  # pairs (below, above) -- (t[r][c], t[r+1][c])
    t_init: str
    t_final: str

    def __post_init__(self):
        tiles = tuple(self.tiles)
        if len(set(tiles)) != len(tiles) or not tiles:
            raise ValueError("tile set must be non-empty and distinct")
        object.__setattr__(self, "tiles", tiles)
        object.__setattr__(self, "horiz", frozenset(tuple(p) for p in self.horiz))
        object.__setattr__(self, "vert", frozenset(tuple(p) for p in self.vert))
        universe = set(tiles)
        for rel, name in ((self.horiz, "horiz"), (self.vert, "vert")):
            for a, b in rel:
                if a not in universe or b not in universe:
                    raise ValueError(f"{name} relation mentions unknown tile ({a}, {b})")
        if self.t_init not in universe or self.t_final not in universe:
            raise ValueError("initial/final tiles must be in the tile set")

    def code(self, tile: str) -> int:
        """1-based rank of a tile in the declared order."""
        return self.tiles.index(tile) + 1

    def to_json(self) -> dict:
        return {
            "tiles": list(self.tiles),
            "horiz": sorted([a, b] for a, b in self.horiz),
            "vert": sorted([a, b] for a, b in self.vert),
            "t_init": self.t_init,
            "t_final": self.t_final,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TilingSystem":
        return cls(
            tiles=tuple(obj["tiles"]),
            horiz=frozenset(tuple(p) for p in obj["horiz"]),
            vert=frozenset(tuple(p) for p in obj["vert"]),
            t_init=obj["t_init"],
            t_final=obj["t_final"],
        )


def octant_coords(i: int) -> tuple:
    """Row-major cell of the 1-based position i: 1 -> (0,0), 2 -> (1,0), ..."""
    if i < 1:
        raise ValueError("positions are 1-based")
    # row r covers positions r(r+1)/2 + 1 .. (r+1)(r+2)/2
    r = (math.isqrt(8 * i - 7) - 1) // 2
    while (r + 1) * (r + 2) // 2 < i:
        r += 1
    while r * (r + 1) // 2 + 1 > i:
        r -= 1
    c = i - r * (r + 1) // 2 - 1
    return (r, c)


def octant_index(r: int, c: int) -> int:
    if not 0 <= c <= r:
        raise ValueError("octant cells require 0 <= col <= row")
    return r * (r + 1) // 2 + c + 1


def is_triangular(n: int) -> bool:
    if n < 1:
        return False
    k = (math.isqrt(8 * n + 1) - 1) // 2
    return k * (k + 1) // 2 == n


def is_encoded_tiling(word: Sequence[str]) -> bool:
    """True iff the word ends exactly at a diagonal cell (triangular length)."""
    return is_triangular(len(word))


def is_valid_encoded_tiling(sys: TilingSystem, word: Sequence[str]) -> bool:
    """Brute-force validity check by direct coordinate enumeration."""
    word = list(word)
    universe = set(sys.tiles)
    if any(t not in universe for t in word):
        return False
    if not is_encoded_tiling(word):
        return False
    if word[0] != sys.t_init or word[-1] != sys.t_final:
        return False
    for i, tile in enumerate(word, start=1):
        r, c = octant_coords(i)
        if c < r:  # horizontal neighbour (r, c+1) is position i+1
            if (tile, word[i]) not in sys.horiz:
                return False
        j = octant_index(r + 1, c)
        if j <= len(word):  # vertical neighbour (r+1, c)
            if (tile, word[j - 1]) not in sys.vert:
                return False
    return True


def _extend(sys: TilingSystem, word: list, target_len: int, results: list) -> bool:
    """Depth-first completion of a partial row-major prefix, pruning on the
    adjacency relations; appends the first full valid word to results."""
    i = len(word)
    if i == target_len:
        if word[-1] == sys.t_final:
            results.append(list(word))
            return True
        return False
    r, c = octant_coords(i + 1)
    for tile in sys.tiles:
        if c > 0 and (word[-1], tile) not in sys.horiz:
            continue
        if r > 0:
            below = word[octant_index(r - 1, c) - 1] if c <= r - 1 else None
            if below is not None and (below, tile) not in sys.vert:
                continue
        word.append(tile)
        if _extend(sys, word, target_len, results):
            word.pop()
            return True
        word.pop()
    return False


def solve_bounded_tiling(sys: TilingSystem, max_len: int) -> Optional[list]:
    """First valid encoded tiling in length-then-lexicographic order (by
    declared tile order), or None if no triangular length <= max_len works."""
    if max_len < 1:
        raise ValueError("max_len must be positive")
    k = 1
    while k * (k + 1) // 2 <= max_len:
        length = k * (k + 1) // 2
        results: list = []
        if length == 1:
            if sys.t_init == sys.t_final:
                results.append([sys.t_init])
        else:
            _extend(sys, [sys.t_init], length, results)
        if results:
            return results[0]
        k += 1
    return None
