"""Even-parity codec over four multi-level cells.

Codewords are the length-4 words over {0..n_levels-1} whose symbol sum is
even; adjacent codewords then differ by Manhattan distance >= 2.  For 5
levels there are (5**4 + 1) / 2 = 313 codewords, enough to map all 256
byte values while keeping 2 bits/cell of payload.

Decoding: margin-sense each cell to the nearest level, check parity, and
on failure pick the L1-nearest codeword among those whose symbol sum is
one off the sensed sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .channel import LevelGrid

__all__ = [
    "CodeBook",
    "DecodeOutcome",
    "enumerate_codewords",
    "encode",
    "margin_sense",
    "parity_ok",
    "soft_correct",
    "oracle_nearest",
    "read_byte",
]

N_CELLS = 4


def enumerate_codewords(n_levels: int) -> np.ndarray:
    """All length-4 even-sum words over {0..n_levels-1}, lexicographic.

    Count is (n**4 + 1) // 2 for odd n and n**4 // 2 for even n.
    """
    if n_levels < 2:
        raise ValueError(f"need at least 2 levels, got {n_levels}")
    words = [w for w in product(range(n_levels), repeat=N_CELLS) if sum(w) % 2 == 0]
    return np.array(words, dtype=np.int64)


def parity_ok(symbols) -> bool:
    """True iff the symbol sum is even."""
    s = np.asarray(symbols)
    if s.shape != (N_CELLS,):
        raise ValueError(f"expected {N_CELLS} symbols, got shape {s.shape}")
    return int(s.sum()) % 2 == 0


@dataclass(frozen=True)
class CodeBook:
    """Enumerated codewords plus the byte mapping (first 256 words)."""

    n_levels: int
    words: np.ndarray = field(repr=False)
    _index: dict = field(repr=False)

    @classmethod
    def build(cls, n_levels: int = 5) -> "CodeBook":
        words = enumerate_codewords(n_levels)
        index = {tuple(int(x) for x in w): i for i, w in enumerate(words)}
        return cls(n_levels=n_levels, words=words, _index=index)

    def __len__(self) -> int:
        return len(self.words)

    @property
    def word_sums(self) -> np.ndarray:
        return self.words.sum(axis=1)

    def index_of(self, word) -> int | None:
        return self._index.get(tuple(int(x) for x in word))

    def byte_for_word(self, word) -> int | None:
        """Byte value of a codeword, or None for codewords beyond the 256
        byte-mapped ones (and for non-codewords)."""
        i = self.index_of(word)
        return i if i is not None and i < 256 else None

    def word_for_byte(self, byte: int) -> tuple:
        if not 0 <= byte <= 255:
            raise ValueError(f"byte out of range: {byte}")
        if len(self.words) < 256:
            raise ValueError(
                f"codebook has only {len(self.words)} words; cannot map all bytes"
            )
        return tuple(int(x) for x in self.words[byte])


def encode(byte: int, book: CodeBook) -> tuple:
    """Map a byte to its codeword (lexicographic rank = byte value)."""
    return book.word_for_byte(byte)


def margin_sense(read, grid: LevelGrid):
    """Hard-read each cell: round (V - l0) / pitch to the nearest level.

    Exact half-pitch ties round toward the lower level; results are clamped
    into the valid level range, as a physical sense amp cannot report a
    nonexistent level.
    """
    v = np.asarray(read, dtype=float)
    t = (v - grid.l0) / grid.pitch
    sensed = np.ceil(t - 0.5).astype(np.int64)
    return np.clip(sensed, 0, grid.n_levels - 1)


def _l1_distances(read, grid: LevelGrid, words: np.ndarray) -> np.ndarray:
    v = np.asarray(read, dtype=float)
    level_v = grid.l0 + grid.pitch * words
    return np.abs(v[None, :] - level_v).sum(axis=1)


def soft_correct(read, sensed, grid: LevelGrid, book: CodeBook) -> tuple:
    """L1-nearest codeword among those with symbol sum = sensed sum +/- 1.

    Requires a parity-failing ``sensed`` word.  Distance ties (measure zero
    under continuous noise) break to the lexicographically lowest word.
    """
    word, _ = _soft_correct_with_distance(read, sensed, grid, book)
    return word


def _soft_correct_with_distance(read, sensed, grid, book):
    if parity_ok(sensed):
        raise ValueError("soft correction requires a parity-failing sensed word")
    s = int(np.asarray(sensed).sum())
    sums = book.word_sums
    mask = (sums == s - 1) | (sums == s + 1)
    if not mask.any():
        raise AssertionError(f"no candidate codewords for sensed sum {s}")
    dist = _l1_distances(read, grid, book.words)
    dist = np.where(mask, dist, np.inf)
    i = int(np.argmin(dist))
    return tuple(int(x) for x in book.words[i]), float(dist[i])


def oracle_nearest(read, grid: LevelGrid, book: CodeBook) -> tuple:
    """L1-nearest codeword over the full codebook (reference decoder)."""
    word, _ = _oracle_nearest_with_distance(read, grid, book)
    return word


def _oracle_nearest_with_distance(read, grid, book):
    dist = _l1_distances(read, grid, book.words)
    i = int(np.argmin(dist))
    return tuple(int(x) for x in book.words[i]), float(dist[i])


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of one word read.

    ``corrected`` is present exactly when parity failed and the soft
    correction ran; ``byte`` is absent when the decoded word is outside
    the byte mapping.
    """

    sensed: tuple
    parity_passed: bool
    corrected: tuple | None
    byte: int | None
    decoder_distance: float | None

    @property
    def word(self) -> tuple:
        return self.sensed if self.parity_passed else self.corrected


def read_byte(read, grid: LevelGrid, book: CodeBook) -> DecodeOutcome:
    """Full read path: margin sense, parity check, soft correction."""
    v = np.asarray(read, dtype=float)
    if v.shape != (N_CELLS,) or not np.all(np.isfinite(v)):
        raise ValueError(f"read vector must be {N_CELLS} finite voltages")
    sensed = tuple(int(x) for x in margin_sense(v, grid))
    if parity_ok(sensed):
        return DecodeOutcome(
            sensed=sensed,
            parity_passed=True,
            corrected=None,
            byte=book.byte_for_word(sensed),
            decoder_distance=None,
        )
    word, dist = _soft_correct_with_distance(v, sensed, grid, book)
    return DecodeOutcome(
        sensed=sensed,
        parity_passed=False,
        corrected=word,
        byte=book.byte_for_word(word),
        decoder_distance=dist,
    )
