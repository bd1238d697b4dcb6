"""Synthetic piano-score renderer with exact ground truth, plus matching MIDI pieces.

Geometry is specified in "page units" where the staff interline is 10; the
``zoom`` factor scales everything when rasterizing.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFilter

from . import bootleg as bs
from .align import TimeInterval
from .errors import FixtureSpecError
from .midi import write_midi

INTERLINE = 10.0
STAFF_HEIGHT = 4 * INTERLINE
NOTE_W = 13.0
NOTE_H = 12.0
# diatonic index of each hand's bottom staff line (E4 treble, G2 bass)
BOTTOM_DIATONIC = {"right": 30, "left": 18}
BOTTOM_ROW = {"right": 35, "left": 13}


@dataclass(frozen=True)
class NoteSpec:
    x: float
    hand: str
    position: int  # half-spaces above the bottom staff line
    event: int = -1
    filled: bool = True


@dataclass
class SystemSpec:
    top: float  # row of the right-hand staff's top line
    x0: float
    x1: float
    gap: float = 60.0  # between right-hand bottom line and left-hand top line
    bars: list[float] = field(default_factory=list)
    notes: list[NoteSpec] = field(default_factory=list)
    beams: list[tuple[float, float, float]] = field(default_factory=list)  # (x0, x1, row) in right staff

    def staff_top(self, hand: str) -> float:
        return self.top if hand == "right" else self.top + STAFF_HEIGHT + self.gap

    def note_row(self, hand: str, position: int) -> float:
        return self.staff_top(hand) + STAFF_HEIGHT - position * INTERLINE / 2

    @property
    def bottom(self) -> float:
        return self.staff_top("left") + STAFF_HEIGHT


@dataclass
class PageSpec:
    width: float = 1000.0
    height: float = 700.0
    systems: list[SystemSpec] = field(default_factory=list)
    zoom: float = 1.0
    line_thickness: float = 2.0
    stem_thickness: float = 1.2
    rotation: float = 0.0  # degrees, counter-clockwise
    ramp: float = 0.0  # darkening at the right edge, 0..1
    blur: float = 0.0  # gaussian radius in page units
    noise: float = 0.0
    margin: float = 0.0  # width of a dark band at the left edge (music stand)
    seed: int = 0


@dataclass
class RenderedNote:
    row: float
    col: float
    global_row: int
    hand: str
    event: int
    system: int


@dataclass
class Fixture:
    image: np.ndarray  # H x W x 3 uint8
    notes: list[RenderedNote]
    spec: PageSpec

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.image).save(buf, format="PNG", compress_level=1)
        return buf.getvalue()

    def jpeg_bytes(self, quality: int = 90) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.image).save(buf, format="JPEG", quality=quality)
        return buf.getvalue()


def global_row(hand: str, position: int) -> int:
    return BOTTOM_ROW[hand] + position


def natural_pitch(hand: str, position: int) -> int:
    d = BOTTOM_DIATONIC[hand] + position
    octave, step = divmod(d, 7)
    return 12 * (octave + 1) + bs.LETTER_PITCH_CLASS[bs.LETTERS[step]]


def validate(spec: PageSpec):
    systems = sorted(spec.systems, key=lambda s: s.top)
    for a, b in zip(systems, systems[1:]):
        if a.bottom + 2 * INTERLINE > b.top - 2 * INTERLINE:
            raise FixtureSpecError(f"systems at rows {a.top} and {b.top} overlap")
    for s in spec.systems:
        if not (0 <= s.x0 < s.x1 <= spec.width) or s.top - 3 * INTERLINE < 0 or s.bottom + 3 * INTERLINE > spec.height:
            raise FixtureSpecError(f"system at row {s.top} leaves the page")
        by_staff: dict[str, list[NoteSpec]] = {}
        for n in s.notes:
            if not s.x0 + NOTE_W <= n.x <= s.x1 - NOTE_W:
                raise FixtureSpecError(f"note at x={n.x} outside its system")
            by_staff.setdefault(n.hand, []).append(n)
        for notes in by_staff.values():
            notes.sort(key=lambda n: n.x)
            for a, b in zip(notes, notes[1:]):
                if a.x != b.x and b.x - a.x < 1.5 * NOTE_W:
                    raise FixtureSpecError(f"noteheads at x={a.x} and x={b.x} overlap")
                if a.x == b.x and abs(a.position - b.position) < 2:
                    raise FixtureSpecError(f"chord at x={a.x} has adjacent positions")


def _draw_page(spec: PageSpec) -> tuple[Image.Image, list[RenderedNote]]:
    z = spec.zoom
    W, H = int(round(spec.width * z)), int(round(spec.height * z))
    img = Image.new("L", (W, H), 255)
    draw = ImageDraw.Draw(img)
    lt = max(1.0, spec.line_thickness * z)
    st = max(1.0, spec.stem_thickness * z)

    def hline(x0, x1, y, t):
        draw.rectangle([x0 * z, y * z - t / 2, x1 * z, y * z + t / 2 - 1], fill=0)

    def vline(x, y0, y1, t):
        draw.rectangle([x * z - t / 2, y0 * z, x * z + t / 2 - 1, y1 * z], fill=0)

    notes = []
    for si, s in enumerate(spec.systems):
        for hand in ("right", "left"):
            top = s.staff_top(hand)
            for j in range(5):
                hline(s.x0, s.x1, top + j * INTERLINE, lt)
        for x in [s.x0, s.x1, *s.bars]:
            vline(x, s.top, s.bottom, lt)
        for x0, x1, row in s.beams:
            draw.rectangle([x0 * z, row * z, x1 * z, (row + 0.8 * INTERLINE) * z], fill=0)

        chords: dict[tuple[float, str], list[NoteSpec]] = {}
        for n in s.notes:
            chords.setdefault((n.x, n.hand), []).append(n)
        for (x, hand), members in chords.items():
            rows = [s.note_row(hand, n.position) for n in members]
            positions = [n.position for n in members]
            # ledger lines
            for p in range(-2, min(positions) - 1, -2):
                hline(x - INTERLINE, x + INTERLINE, s.note_row(hand, p), lt)
            for p in range(10, max(positions) + 1, 2):
                hline(x - INTERLINE, x + INTERLINE, s.note_row(hand, p), lt)
            up = np.mean(positions) < 4
            if up:
                sx = x + NOTE_W / 2 - 0.6
                vline(sx, min(rows) - 3.5 * INTERLINE, max(rows), st)
            else:
                sx = x - NOTE_W / 2 + 0.6
                vline(sx, min(rows), max(rows) + 3.5 * INTERLINE, st)
            for n, row in zip(members, rows):
                box = [(x - NOTE_W / 2) * z, (row - NOTE_H / 2) * z, (x + NOTE_W / 2) * z, (row + NOTE_H / 2) * z]
                if n.filled:
                    draw.ellipse(box, fill=0)
                else:
                    draw.ellipse(box, outline=0, width=max(1, int(round(2 * z))))
                notes.append(RenderedNote(row * z, x * z, global_row(hand, n.position), hand, n.event, si))
    return img, notes


def render_fixture(spec: PageSpec) -> Fixture:
    """Rasterize a page spec; ground-truth coordinates follow every geometric distortion."""
    validate(spec)
    img, notes = _draw_page(spec)
    z = spec.zoom
    if spec.rotation:
        W, H = img.size
        img = img.rotate(spec.rotation, resample=Image.BILINEAR, fillcolor=255)
        cx, cy = W / 2, H / 2
        a = math.radians(spec.rotation)
        for n in notes:
            dx, dy = n.col - cx, n.row - cy
            # PIL rotates counter-clockwise in screen coordinates (y down)
            n.col = cx + dx * math.cos(a) + dy * math.sin(a)
            n.row = cy - dx * math.sin(a) + dy * math.cos(a)
    if spec.blur:
        img = img.filter(ImageFilter.GaussianBlur(spec.blur * z))
    arr = np.asarray(img, dtype=np.float32) / 255.0
    H, W = arr.shape
    if spec.margin:
        arr[:, :int(spec.margin * z)] = 0.15
    if spec.ramp:
        arr = arr * (1.0 - spec.ramp * np.linspace(0, 1, W, dtype=np.float32))[None, :]
    if spec.noise:
        rng = np.random.default_rng(spec.seed)
        arr = arr + rng.normal(0, spec.noise, arr.shape).astype(np.float32)
    gray = np.clip(np.rint(arr * 255), 0, 255).astype(np.uint8)
    return Fixture(np.repeat(gray[:, :, None], 3, axis=2), notes, spec)


# --- pieces: random note sequences rendered to both MIDI and pages ---

@dataclass(frozen=True)
class PieceEvent:
    time: float
    duration: float
    right: tuple[int, ...]  # staff positions
    left: tuple[int, ...]
    sharp: tuple[bool, ...] = ()  # per right-hand note: raise by a semitone

    def pitches(self) -> list[int]:
        out = []
        for i, p in enumerate(self.right):
            raised = self.sharp[i] if i < len(self.sharp) else False
            out.append(natural_pitch("right", p) + int(raised))
        out += [natural_pitch("left", p) for p in self.left]
        return out


@dataclass(frozen=True)
class Piece:
    events: tuple[PieceEvent, ...]

    def midi_bytes(self) -> bytes:
        notes = [(e.time, pitch, e.duration) for e in self.events for pitch in e.pitches()]
        return write_midi(notes)

    def interval(self, first: int, last: int) -> TimeInterval:
        ev = self.events
        end = ev[last + 1].time if last + 1 < len(ev) else ev[last].time + ev[last].duration
        return TimeInterval(ev[first].time, end)


def make_piece(seed: int, num_events: int = 120, left_prob: float = 0.6, chord_prob: float = 0.25) -> Piece:
    rng = np.random.default_rng(seed)
    t = 0.0
    events = []
    for _ in range(num_events):
        dur = float(rng.choice([0.25, 0.5, 0.5, 0.75, 1.0]))
        if rng.random() < chord_prob:
            size = int(rng.choice([2, 3]))
            base = int(rng.integers(-2, 11 - 2 * (size - 1)))
            right = tuple(base + 2 * i for i in range(size))
        else:
            right = (int(rng.integers(-2, 11)),)
        sharp = tuple(bool(rng.random() < 0.1) for _ in right)
        left = ()
        if rng.random() < left_prob:
            base = int(rng.integers(-2, 7))
            left = (base, base + 4) if rng.random() < 0.3 else (base,)
        events.append(PieceEvent(round(t, 6), dur, right, left, sharp))
        t += dur
    return Piece(tuple(events))


def layout_passage(piece: Piece, first: int, counts: list[int], width: float = 1000.0,
                   system_pitch: float = 230.0, top_margin: float = 60.0, **page_kw) -> PageSpec:
    """Lay events first.. across one grand staff per entry of ``counts``."""
    systems = []
    k = first
    for si, count in enumerate(counts):
        top = top_margin + si * system_pitch
        x0, x1 = 40.0, width - 40.0
        start = x0 + 60.0
        step = (x1 - 20.0 - start) / max(count, 1)
        s = SystemSpec(top, x0, x1)
        for i in range(count):
            x = round(start + (i + 0.5) * step, 2)
            ev = piece.events[k]
            s.notes += [NoteSpec(x, "right", p, k) for p in ev.right]
            s.notes += [NoteSpec(x, "left", p, k) for p in ev.left]
            if i % 4 == 3 and i < count - 1:
                s.bars.append(round(x + step / 2, 2))
            k += 1
        systems.append(s)
    height = top_margin + len(counts) * system_pitch + 20.0
    return PageSpec(width=width, height=height, systems=systems, **page_kw)


@dataclass
class Query:
    query_id: str
    fixture: Fixture
    piece_index: int
    first: int
    last: int
    interval: TimeInterval


def make_query(piece: Piece, rng: np.random.Generator, query_id: str, piece_index: int = 0,
               num_systems: int | None = None, distort: bool = True, notehead_range=(20, 60),
               **page_kw) -> Query:
    """Render a random passage of ``piece`` on 1-3 grand staves.

    Passages are redrawn until their notehead count falls in ``notehead_range``.
    """
    for _ in range(200):
        n_sys = num_systems or int(rng.integers(1, 4))
        counts = [int(rng.integers(6, 17)) for _ in range(n_sys)]
        total = sum(counts)
        first = int(rng.integers(0, len(piece.events) - total - 1))
        heads = sum(len(e.right) + len(e.left) for e in piece.events[first:first + total])
        if notehead_range is None or notehead_range[0] <= heads <= notehead_range[1]:
            break
    else:
        raise FixtureSpecError(f"no passage with {notehead_range} noteheads in this piece")
    kw = dict(seed=int(rng.integers(1 << 30)))
    if distort:
        kw.update(rotation=float(rng.uniform(-0.7, 0.7)), ramp=float(rng.uniform(0, 0.3)),
                  blur=float(rng.uniform(0, 0.8)), noise=float(rng.uniform(0, 0.03)))
    kw.update(page_kw)
    spec = layout_passage(piece, first, counts, **kw)
    return Query(query_id, render_fixture(spec), piece_index, first, first + total - 1,
                 piece.interval(first, first + total - 1))


def make_suite(num_queries: int = 25, num_pieces: int = 5, seed: int = 0, **kw):
    """Pieces and rendered queries for an end-to-end fixture corpus."""
    rng = np.random.default_rng(seed)
    pieces = [make_piece(seed * 1000 + i) for i in range(num_pieces)]
    queries = [make_query(pieces[i % num_pieces], rng, f"q{i:03d}", i % num_pieces, **kw)
               for i in range(num_queries)]
    return pieces, queries


def write_corpus(out_dir: str | Path, num_queries: int = 25, num_pieces: int = 5, seed: int = 0, **kw) -> Path:
    """Write images, MIDI files and a JSONL manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pieces, queries = make_suite(num_queries, num_pieces, seed, **kw)
    for i, piece in enumerate(pieces):
        (out / f"piece{i:02d}.mid").write_bytes(piece.midi_bytes())
    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as fh:
        for q in queries:
            name = f"{q.query_id}.png"
            (out / name).write_bytes(q.fixture.png_bytes())
            fh.write(json.dumps({"id": q.query_id, "image": name, "midi": f"piece{q.piece_index:02d}.mid",
                                 "intervals": [[q.interval.start, q.interval.end]]}) + "\n")
    return manifest


def spec_to_dict(spec: PageSpec) -> dict:
    return asdict(spec)


def spec_from_dict(d: dict) -> PageSpec:
    systems = []
    for s in d.get("systems", []):
        s = dict(s)
        s["notes"] = [NoteSpec(**n) for n in s.get("notes", [])]
        s["beams"] = [tuple(b) for b in s.get("beams", [])]
        systems.append(SystemSpec(**s))
    rest = {k: v for k, v in d.items() if k != "systems"}
    return PageSpec(systems=systems, **rest)
