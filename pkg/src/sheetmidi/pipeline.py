"""End-to-end query execution with per-stage timing."""
from __future__ import annotations

import io
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import bootleg as bs
from . import cv, detect, project
from .align import AlignmentResult, TimeInterval, align
from .config import HyperParams
from .errors import SheetMidiError
from .midi import MidiBootleg, midi_to_bootleg
from .preprocess import PreprocessedImage, preprocess

log = logging.getLogger(__name__)

LOAD_MIDI = "Load MIDI Bootleg Score"
PREPROCESS = "Pre-Processing"
NOTEHEADS = "Notehead Detection"
STAFF = "Staff Line Features"
BARLINES = "Bar Line Features"
PROJECTION = "Query Bootleg Projection"
DTW = "Subsequence DTW"
STAGES = (LOAD_MIDI, PREPROCESS, NOTEHEADS, STAFF, BARLINES, PROJECTION, DTW)

NO_MATCH = TimeInterval(0.0, 0.0)


class StageTimer:
    def __init__(self):
        self.timings = {name: 0.0 for name in STAGES}

    @contextmanager
    def __call__(self, stage: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[stage] += time.perf_counter() - t0


@dataclass
class QueryExtraction:
    bootleg: project.QueryBootleg | None
    preprocessed: PreprocessedImage | None = None
    noteheads: list = field(default_factory=list)
    template: detect.NoteheadTemplate | None = None
    estimates: list = field(default_factory=list)
    staves: list = field(default_factory=list)
    grand_staves: list = field(default_factory=list)
    placed: list = field(default_factory=list)
    failure: str | None = None
    debug: dict = field(default_factory=dict)


@dataclass
class QueryResult:
    interval: TimeInterval
    features: bytes
    timings: dict[str, float]
    alignment: AlignmentResult | None = None
    extraction: QueryExtraction | None = None

    @property
    def matched(self) -> bool:
        return self.alignment is not None


def decode_image(image) -> np.ndarray:
    """Bytes, path or array -> grayscale float32 image."""
    if isinstance(image, np.ndarray):
        return image.astype(np.float32) if image.ndim == 2 else cv.to_grayscale(image)
    if isinstance(image, (str, Path)):
        image = Path(image).read_bytes()
    with Image.open(io.BytesIO(image)) as im:
        rgb = np.asarray(im.convert("RGB"))
    return cv.to_grayscale(rgb)


def extract_query(image, params: HyperParams = HyperParams(), timer: StageTimer | None = None,
                  debug: bool = False) -> QueryExtraction:
    timer = timer or StageTimer()
    out = QueryExtraction(None)
    dbg = out.debug if debug else None
    try:
        with timer(PREPROCESS):
            gray = decode_image(image)
            pre = preprocess(gray, params)
        out.preprocessed = pre
        img = pre.gray
        if dbg is not None:
            dbg["preprocessed"] = img
        with timer(NOTEHEADS):
            boxes, template = detect.detect_noteheads(img, params, debug=dbg)
        out.noteheads, out.template = boxes, template
        with timer(STAFF):
            tensor = detect.compute_staff_features(img, params, debug=dbg)
        with timer(BARLINES):
            bars = detect.compute_barline_features(img, params, debug=dbg)
    except SheetMidiError as exc:
        out.failure = f"preprocessing failed: {exc}"
        return out

    with timer(PROJECTION):
        out.failure = _project(out, tensor, bars, params)
    return out


def _project(out: QueryExtraction, tensor, bars, params: HyperParams) -> str | None:
    boxes = out.noteheads
    if not boxes:
        return "no noteheads detected"
    est = project.estimate_local_staves(boxes, tensor, params.context_rows)
    staves = project.cluster_staves(est, params.cluster_min_distance)
    out.staves = staves
    if not staves:
        return "no staff estimates"
    if params.staffline_reestimate:
        est, owner = project.refine_local_estimates(boxes, staves, tensor, est, params.refine_context_rows)
    else:
        owner = project.assign_without_refinement(staves, est)
    out.estimates = est
    grand = project.group_grand_staves(staves, bars)
    out.grand_staves = grand
    if not grand:
        return "fewer than two staves"
    placed = project.place_notes(boxes, est, owner, staves, grand)
    out.placed = placed
    if not placed:
        return "no noteheads placed on a grand staff"
    filler = params.filler_repetition and params.query_filler_repetition
    out.bootleg = project.build_query_bootleg(placed, len(grand), filler_repetition=filler)
    return None


def load_midi_bootleg(midi, params: HyperParams = HyperParams()) -> MidiBootleg:
    if isinstance(midi, MidiBootleg):
        return midi
    if isinstance(midi, (str, Path)):
        midi = Path(midi).read_bytes()
    return midi_to_bootleg(midi, params.onset_tolerance, **params.midi_options())


def match_features(query, midi: MidiBootleg, params: HyperParams = HyperParams()) -> AlignmentResult:
    """Align a query bootleg (score or BSCR bytes) against a MIDI bootleg."""
    if isinstance(query, (bytes, bytearray, memoryview)):
        query = bs.deserialize(bytes(query))
    return align(query, midi, params.dtw_steps, params.dtw_weights)


def run_query(image, midi, params: HyperParams = HyperParams(), debug: bool = False) -> QueryResult:
    """Image + MIDI (bootleg, bytes or path) -> predicted time interval.

    Degenerate images produce a zero-duration interval rather than an error.
    """
    timer = StageTimer()
    with timer(LOAD_MIDI):
        midi_bootleg = load_midi_bootleg(midi, params)
    extraction = extract_query(image, params, timer, debug)
    if extraction.bootleg is None:
        log.info("no match: %s", extraction.failure)
        return QueryResult(NO_MATCH, bs.serialize(bs.BootlegScore(np.zeros((0, bs.NUM_ROWS)))),
                           timer.timings, None, extraction)
    features = bs.serialize(extraction.bootleg.score)
    with timer(DTW):
        result = match_features(extraction.bootleg.score, midi_bootleg, params)
    return QueryResult(result.interval, features, timer.timings, result, extraction)
