"""MIDI ingestion: Standard MIDI File parsing, onset grouping and MIDI bootleg scores."""
from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import bootleg as bs
from .errors import EmptyPieceError, MidiParseError

DEFAULT_TEMPO = 500_000  # microseconds per quarter note


@dataclass(frozen=True, order=True)
class NoteOnset:
    time: float
    pitch: int
    track: int = 0
    channel: int = 0


@dataclass(frozen=True)
class NoteEvent:
    time: float
    pitches: frozenset[int]


@dataclass(frozen=True)
class MidiBootleg:
    score: bs.BootlegScore
    event_times: tuple[float, ...]
    col_to_event: tuple[int, ...]

    @property
    def num_events(self) -> int:
        return len(self.event_times)


def _read_varlen(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise MidiParseError("truncated variable-length quantity")
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes")


def _chunks(data: bytes):
    pos = 0
    while pos + 8 <= len(data):
        kind, length = struct.unpack_from(">4sI", data, pos)
        pos += 8
        if pos + length > len(data):
            raise MidiParseError(f"chunk {kind!r} runs past end of file")
        yield kind, data[pos:pos + length]
        pos += length
    if pos != len(data):
        raise MidiParseError("trailing bytes after last chunk")


_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _parse_track(chunk: bytes):
    """Yield (tick, kind, payload) for note-ons and tempo changes in one track."""
    pos = 0
    tick = 0
    status = None
    while pos < len(chunk):
        delta, pos = _read_varlen(chunk, pos)
        tick += delta
        if pos >= len(chunk):
            raise MidiParseError("track ends mid-event")
        b = chunk[pos]
        if b == 0xFF:
            if pos + 1 >= len(chunk):
                raise MidiParseError("truncated meta event")
            meta = chunk[pos + 1]
            length, pos = _read_varlen(chunk, pos + 2)
            payload = chunk[pos:pos + length]
            if len(payload) != length:
                raise MidiParseError("truncated meta event")
            pos += length
            if meta == 0x51 and length == 3:
                yield tick, "tempo", int.from_bytes(payload, "big")
            elif meta == 0x2F:
                return
            continue
        if b in (0xF0, 0xF7):
            length, pos = _read_varlen(chunk, pos + 1)
            pos += length
            status = None
            continue
        if b & 0x80:
            status = b
            pos += 1
        elif status is None:
            raise MidiParseError("running status with no previous status byte")
        kind = status & 0xF0
        n = _DATA_LEN.get(kind)
        if n is None:
            raise MidiParseError(f"unexpected status byte {status:#x}")
        args = chunk[pos:pos + n]
        if len(args) != n:
            raise MidiParseError("truncated channel event")
        pos += n
        if kind == 0x90 and args[1] > 0:
            yield tick, "note", (args[0], status & 0x0F)
    # tolerate a missing end-of-track meta event


class TempoMap:
    """Piecewise-constant tempo; converts ticks to seconds."""

    def __init__(self, ppq: int, changes: Iterable[tuple[int, int]] = ()):
        self.ppq = ppq
        points = {0: DEFAULT_TEMPO}
        for tick, tempo in sorted(changes, key=lambda c: c[0]):
            points[tick] = tempo  # later events at the same tick win
        self.ticks = sorted(points)
        self.tempos = [points[t] for t in self.ticks]
        self.seconds = [0.0]
        for i in range(1, len(self.ticks)):
            span = self.ticks[i] - self.ticks[i - 1]
            self.seconds.append(self.seconds[-1] + span * self.tempos[i - 1] / (1e6 * ppq))

    def to_seconds(self, tick: int) -> float:
        i = bisect.bisect_right(self.ticks, tick) - 1
        return self.seconds[i] + (tick - self.ticks[i]) * self.tempos[i] / (1e6 * self.ppq)


def parse_midi(data: bytes) -> list[NoteOnset]:
    """Note onsets of a format 0/1 Standard MIDI File, sorted by time then pitch."""
    chunks = list(_chunks(bytes(data)))
    if not chunks or chunks[0][0] != b"MThd" or len(chunks[0][1]) < 6:
        raise MidiParseError("missing MThd header")
    fmt, ntracks, division = struct.unpack_from(">HHH", chunks[0][1])
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}")
    tracks = [c for kind, c in chunks[1:] if kind == b"MTrk"]
    if len(tracks) != ntracks:
        raise MidiParseError(f"header declares {ntracks} tracks, found {len(tracks)}")

    tempo_changes = []
    notes = []
    for ti, chunk in enumerate(tracks):
        for tick, kind, payload in _parse_track(chunk):
            if kind == "tempo":
                tempo_changes.append((tick, payload))
            else:
                notes.append((tick, payload[0], ti, payload[1]))

    if division & 0x8000:
        # SMPTE timing: ticks are fixed fractions of a second
        fps = 256 - (division >> 8)
        per_frame = division & 0xFF
        to_sec = lambda tick: tick / (fps * per_frame)  # noqa: E731
    else:
        if division == 0:
            raise MidiParseError("zero ticks per quarter note")
        to_sec = TempoMap(division, tempo_changes).to_seconds

    onsets = sorted(NoteOnset(to_sec(tick), pitch, track, ch) for tick, pitch, track, ch in notes)
    if not onsets:
        raise EmptyPieceError("MIDI file contains no note onsets")
    return onsets


def group_onsets(onsets: Sequence[NoteOnset], tolerance_sec: float = 0.05) -> list[NoteEvent]:
    """Greedy grouping: an onset joins the open event if within tolerance of its first onset."""
    events = []
    start = None
    pitches: set[int] = set()
    for onset in onsets:
        if start is not None and onset.time - start <= tolerance_sec:
            pitches.add(onset.pitch)
            continue
        if start is not None:
            events.append(NoteEvent(start, frozenset(pitches)))
        start = onset.time
        pitches = {onset.pitch}
    if start is not None:
        events.append(NoteEvent(start, frozenset(pitches)))
    return events


def _spellings(pitch: int):
    """Diatonic indices of every spelling of ``pitch`` with at most one accidental."""
    pc = pitch % 12
    for letter, natural_pc in bs.LETTER_PITCH_CLASS.items():
        for accidental in (-1, 0, 1):
            if (natural_pc + accidental) % 12 == pc:
                natural = pitch - accidental
                yield bs.diatonic_index(letter, natural // 12 - 1)


def _natural_rows(pitch: int) -> set[int]:
    rows = set()
    for d in _spellings(pitch):
        for hand in ("left", "right"):
            row = bs.global_row(hand, d)
            if row is not None:
                rows.add(row)
    return rows


# a treble-clef line is 12 diatonic steps above the same bass-clef line
CLEF_SHIFT = 12


def _other_clef_rows(pitch: int) -> set[int]:
    """Rows a note takes when a staff carries the other hand's clef."""
    rows = set()
    for d in _spellings(pitch):
        # treble clef on the bass staff, bass clef on the treble staff
        for row in (bs.global_row("left", d - CLEF_SHIFT), bs.global_row("right", d + CLEF_SHIFT)):
            if row is not None:
                rows.add(row)
    return rows


def staff_positions(pitch: int, octave_interps: bool = False, clef_interps: bool = False) -> set[int]:
    """All bootleg rows where a notehead for ``pitch`` could be written.

    Spellings use at most one sharp or flat; each spelling is placed on both
    staves when in range.
    """
    rows = _natural_rows(pitch)
    if octave_interps:
        for shifted in (pitch - 12, pitch + 12):
            rows |= _natural_rows(shifted)
    if clef_interps:
        rows |= _other_clef_rows(pitch)
    return rows


def events_to_bootleg(events: Sequence[NoteEvent], octave_interps: bool = False,
                      clef_interps: bool = False, filler_repetition: bool = True) -> MidiBootleg:
    if not events:
        raise EmptyPieceError("no note events")
    reps = 3 if filler_repetition else 1
    cols = np.zeros((reps * len(events), bs.NUM_ROWS), dtype=np.uint8)
    provenance = []
    col_to_event = []
    cache: dict[int, list[int]] = {}
    for k, event in enumerate(events):
        rows = set()
        for p in event.pitches:
            if p not in cache:
                cache[p] = sorted(staff_positions(p, octave_interps, clef_interps))
            rows.update(cache[p])
        idx = list(rows)
        if filler_repetition:
            cols[3 * k, idx] = 1
            cols[3 * k + 1, idx] = 1
            provenance += [bs.Provenance(k, bs.REPEAT), bs.Provenance(k, bs.REPEAT), bs.Provenance(k, bs.FILLER)]
            col_to_event += [k, k, k]
        else:
            cols[k, idx] = 1
            provenance.append(bs.Provenance(k))
            col_to_event.append(k)
    return MidiBootleg(bs.BootlegScore(cols, tuple(provenance)),
                       tuple(e.time for e in events), tuple(col_to_event))


def midi_to_bootleg(data: bytes, tolerance_sec: float = 0.05, **options) -> MidiBootleg:
    return events_to_bootleg(group_onsets(parse_midi(data), tolerance_sec), **options)


def write_midi(notes: Iterable[tuple[float, int, float]], ppq: int = 480, tempo: int = DEFAULT_TEMPO,
               tempo_changes: Sequence[tuple[int, int]] = ()) -> bytes:
    """Encode (onset_sec, pitch, duration_sec) notes as a format-0 SMF at a constant tempo.

    ``tempo_changes`` adds extra (tick, tempo) meta events; onset times are then
    interpreted as ticks-at-initial-tempo and will not match seconds.
    """
    def varlen(v: int) -> bytes:
        out = [v & 0x7F]
        v >>= 7
        while v:
            out.append(0x80 | (v & 0x7F))
            v >>= 7
        return bytes(reversed(out))

    sec_to_tick = ppq * 1e6 / tempo
    msgs = [(0, 0, b"\xff\x51\x03" + tempo.to_bytes(3, "big"))]
    for tick, t in tempo_changes:
        msgs.append((tick, 0, b"\xff\x51\x03" + t.to_bytes(3, "big")))
    for onset, pitch, dur in notes:
        on = round(onset * sec_to_tick)
        off = round((onset + dur) * sec_to_tick)
        msgs.append((on, 2, bytes([0x90, pitch, 80])))
        msgs.append((off, 1, bytes([0x80, pitch, 0])))
    msgs.sort(key=lambda m: (m[0], m[1]))
    body = bytearray()
    last = 0
    for tick, _, payload in msgs:
        body += varlen(tick - last) + payload
        last = tick
    body += b"\x00\xff\x2f\x00"
    header = struct.pack(">4sIHHH", b"MThd", 6, 0, 1, ppq)
    return header + struct.pack(">4sI", b"MTrk", len(body)) + bytes(body)
