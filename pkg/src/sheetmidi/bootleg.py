"""Bootleg score data model, staff-row coordinates and the BSCR wire format.

A bootleg score is a 62-row binary matrix. Rows 0..27 cover the left-hand
(bass) staff from A0 to G4, rows 28..61 the right-hand (treble) staff from
E3 to C8. Each column packs into one 64-bit word with row ``i`` on bit ``i``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BadMagicError,
    CorruptFeatureError,
    InvalidArgumentError,
    TruncatedFeatureError,
    UnsupportedVersionError,
)

NUM_ROWS = 62

LETTERS = "CDEFGAB"
LETTER_OFFSET = {letter: i for i, letter in enumerate(LETTERS)}
# semitone of each natural letter within an octave
LETTER_PITCH_CLASS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

# inclusive diatonic ranges for each hand
LEFT_RANGE = (5, 32)  # A0 .. G4
RIGHT_RANGE = (23, 56)  # E3 .. C8
LEFT_ROWS = LEFT_RANGE[1] - LEFT_RANGE[0] + 1
RIGHT_ROWS = RIGHT_RANGE[1] - RIGHT_RANGE[0] + 1

MAGIC = b"BSCR"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sB3xI")
_VALID_MASK = (1 << NUM_ROWS) - 1


def diatonic_index(letter: str, octave: int) -> int:
    return 7 * octave + LETTER_OFFSET[letter]


def global_row(hand: str, diatonic: int) -> int | None:
    """Map a diatonic index on one hand's staff to a bootleg row, or None if off-staff."""
    if hand == "left":
        lo, hi = LEFT_RANGE
        return diatonic - lo if lo <= diatonic <= hi else None
    if hand == "right":
        lo, hi = RIGHT_RANGE
        return LEFT_ROWS + diatonic - lo if lo <= diatonic <= hi else None
    raise InvalidArgumentError(f"unknown hand {hand!r}")


def hand_rows(hand: str) -> tuple[int, int]:
    """Inclusive global row range of a hand."""
    if hand == "left":
        return 0, LEFT_ROWS - 1
    return LEFT_ROWS, NUM_ROWS - 1


# Provenance tags for columns. Event/notehead-group index, plus slot kind.
REPEAT = "repeat"
FILLER = "filler"
SINGLE = "single"


@dataclass(frozen=True)
class Provenance:
    index: int
    kind: str = SINGLE


@dataclass(frozen=True)
class BootlegScore:
    """Immutable 62-row binary score, stored column-major as a (N, 62) uint8 array."""

    columns: np.ndarray
    provenance: tuple[Provenance, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.uint8)
        if cols.ndim != 2 or cols.shape[1] != NUM_ROWS:
            if cols.size == 0:
                cols = np.zeros((0, NUM_ROWS), dtype=np.uint8)
            else:
                raise InvalidArgumentError(f"columns must have shape (N, {NUM_ROWS}), got {cols.shape}")
        if cols.size and cols.max() > 1:
            raise InvalidArgumentError("bootleg entries must be 0 or 1")
        cols = cols.copy()
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        if self.provenance is not None:
            prov = tuple(self.provenance)
            if len(prov) != len(cols):
                raise InvalidArgumentError("provenance length must match column count")
            object.__setattr__(self, "provenance", prov)

    @property
    def height(self) -> int:
        return NUM_ROWS

    @property
    def width(self) -> int:
        return self.columns.shape[0]

    def __len__(self) -> int:
        return self.width

    def __eq__(self, other):
        if not isinstance(other, BootlegScore):
            return NotImplemented
        return np.array_equal(self.columns, other.columns)

    def __hash__(self):
        return hash(self.columns.tobytes())

    def as_matrix(self) -> np.ndarray:
        """The score as a 62 x N matrix, one column per time step."""
        return self.columns.T

    def words(self) -> np.ndarray:
        return encode_columns(self.columns)

    @classmethod
    def from_words(cls, words: Sequence[int]) -> "BootlegScore":
        return cls(decode_columns(np.asarray(words, dtype=np.uint64)))


def encode_column(col) -> int:
    col = np.asarray(col)
    if col.shape != (NUM_ROWS,):
        raise InvalidArgumentError(f"column must have length {NUM_ROWS}, got shape {col.shape}")
    if np.any((col != 0) & (col != 1)):
        raise InvalidArgumentError("column entries must be 0 or 1")
    return int(encode_columns(col[None, :])[0])


def decode_column(word: int) -> np.ndarray:
    word = int(word)
    if word < 0 or word >> NUM_ROWS:
        raise CorruptFeatureError(f"column word {word:#x} has bits set above row {NUM_ROWS - 1}")
    return decode_columns(np.array([word], dtype=np.uint64))[0]


_BIT_WEIGHTS = np.left_shift(np.uint64(1), np.arange(NUM_ROWS, dtype=np.uint64))


def encode_columns(cols: np.ndarray) -> np.ndarray:
    """Pack an (N, 62) binary array into N uint64 words."""
    cols = np.asarray(cols, dtype=np.uint64)
    if cols.shape[0] == 0:
        return np.zeros(0, dtype=np.uint64)
    return np.bitwise_or.reduce(cols * _BIT_WEIGHTS, axis=1)


def decode_columns(words: np.ndarray) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    if np.any(words >> np.uint64(NUM_ROWS)):
        raise CorruptFeatureError("column word has bits 62-63 set")
    bits = (words[:, None] >> np.arange(NUM_ROWS, dtype=np.uint64)) & np.uint64(1)
    return bits.astype(np.uint8)


def serialize(score: BootlegScore) -> bytes:
    words = score.words().astype("<u8")
    return HEADER.pack(MAGIC, FORMAT_VERSION, len(words)) + words.tobytes()


def deserialize(data: bytes) -> BootlegScore:
    if len(data) < HEADER.size:
        raise TruncatedFeatureError(f"need {HEADER.size} header bytes, got {len(data)}")
    magic, version, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    expected = HEADER.size + 8 * count
    if len(data) < expected:
        raise TruncatedFeatureError(f"header declares {count} columns but payload holds {(len(data) - HEADER.size) // 8}")
    if len(data) > expected:
        raise CorruptFeatureError(f"{len(data) - expected} trailing bytes after column payload")
    words = np.frombuffer(data, dtype="<u8", count=count, offset=HEADER.size)
    return BootlegScore(decode_columns(words))
