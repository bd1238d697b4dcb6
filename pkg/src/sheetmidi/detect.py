"""Notehead detection, staff-line feature tensor and bar-line features.

All functions expect a preprocessed image normalized to ~10 px interline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cv
from .config import HyperParams
from .errors import NotAChordError
from .preprocess import column_row_medians, comb_response, spacing_candidates

ISOLATED = "isolated"
CHORD_SPLIT = "chord-split"


@dataclass(frozen=True)
class NoteheadTemplate:
    height: float
    width: float
    area: float
    adaptive: bool = True

    @property
    def plausible(self) -> bool:
        return 6 <= self.height <= 14


@dataclass(frozen=True)
class NoteheadBox:
    bbox: tuple[int, int, int, int]  # rowMin, colMin, rowMax, colMax (inclusive)
    center: tuple[float, float]  # row, col
    source: str = ISOLATED


@dataclass(frozen=True)
class StaffFeatureTensor:
    activations: np.ndarray  # (K, H, C)
    spacings: np.ndarray
    column_edges: np.ndarray  # C + 1 pixel boundaries

    @property
    def column_width(self) -> float:
        return float(np.mean(np.diff(self.column_edges)))

    def column_of(self, col: float) -> int:
        c = int(np.searchsorted(self.column_edges, col, side="right")) - 1
        return min(max(c, 0), self.activations.shape[2] - 1)


@dataclass(frozen=True)
class BarlineFeatures:
    rowsum: np.ndarray


def fallback_template(params: HyperParams) -> NoteheadTemplate:
    return NoteheadTemplate(params.fallback_height, params.fallback_width, params.fallback_area, adaptive=False)


def estimate_template(opened: np.ndarray, keypoints, params: HyperParams) -> NoteheadTemplate | None:
    """Average the neighborhoods of blob keypoints and measure the dark blob at the center."""
    half = int(round(params.template_crop_factor * params.target_interline))
    h, w = opened.shape
    crops = []
    for r, c in keypoints:
        r, c = int(round(r)), int(round(c))
        if half <= r < h - half and half <= c < w - half:
            crops.append(opened[r - half:r + half + 1, c - half:c + half + 1])
    if len(crops) < params.min_blobs:
        return None
    ink = 1.0 - np.mean(crops, axis=0)
    mask = (ink >= 0.5).astype(np.uint8)
    if not mask[half, half]:
        return None
    comp = next(cc for cc in cv.connected_components(mask)
                if any(r == half and c == half for r, c in cc.pixels))
    return NoteheadTemplate(float(comp.height), float(comp.width), float(comp.area))


def _within(value: float, ref: float, lo: float, hi: float) -> bool:
    return lo * ref <= value <= hi * ref


def is_notehead(comp: cv.ConnectedComponent, tpl: NoteheadTemplate, params: HyperParams) -> bool:
    lo, hi = params.notehead_tol_low, params.notehead_tol_high
    return (_within(comp.height, tpl.height, lo, hi)
            and _within(comp.width, tpl.width, lo, hi)
            and _within(comp.height / comp.width, tpl.height / tpl.width, lo, hi)
            and _within(comp.area, tpl.area, lo, hi))


def is_chord_block(comp: cv.ConnectedComponent, tpl: NoteheadTemplate, params: HyperParams) -> bool:
    min_area = params.chord_min_mult * tpl.area * params.chord_area_tol_low
    max_area = params.chord_max_mult * tpl.area * params.chord_area_tol_high
    return (min_area <= comp.area <= max_area
            and comp.width <= params.chord_max_width_mult * tpl.width
            and comp.height <= params.chord_max_height_mult * tpl.height)


def split_chord_block(comp: cv.ConnectedComponent, tpl: NoteheadTemplate,
                      params: HyperParams = HyperParams()) -> list[NoteheadBox]:
    """Split a block of touching noteheads by k-means on its pixel coordinates."""
    if not is_chord_block(comp, tpl, params):
        raise NotAChordError(f"component with area {comp.area} is not a chord block")
    n = int(np.clip(round(comp.area / tpl.area), params.chord_min_mult, params.chord_max_mult))
    pixels = comp.pixels
    n = min(n, len(pixels))
    centroids, assign = cv.kmeans(pixels, n)
    boxes = []
    for j in range(n):
        pts = pixels[assign == j]
        r0, c0 = pts.min(axis=0)
        r1, c1 = pts.max(axis=0)
        boxes.append(NoteheadBox((int(r0), int(c0), int(r1), int(c1)),
                                 (float(centroids[j, 0]), float(centroids[j, 1])), CHORD_SPLIT))
    return boxes


def detect_noteheads(gray: np.ndarray, params: HyperParams = HyperParams(), debug: dict | None = None):
    """Return (boxes, template) for filled noteheads in a normalized image."""
    opened = cv.open_dark(gray, cv.disk(params.notehead_disk))
    template = None
    if params.adaptive_template:
        keypoints = cv.detect_blobs(opened, params.blob_min_area, params.blob_max_area, params.blob_min_fill,
                                    (params.blob_aspect_min, params.blob_aspect_max))
        if len(keypoints) >= params.min_blobs:
            template = estimate_template(opened, keypoints, params)
    if template is None:
        template = fallback_template(params)

    _, binary = cv.otsu_threshold(opened)
    if debug is not None:
        debug["notehead_opened"] = opened
        debug["notehead_binary"] = 1.0 - binary
    if binary.mean() > 0.5:
        # Otsu on a page with no dark blobs splits the paper itself
        return [], template

    boxes = []
    for comp in cv.connected_components(binary):
        if is_notehead(comp, template, params):
            r0, c0, r1, c1 = comp.bbox
            boxes.append(NoteheadBox(comp.bbox, ((r0 + r1) / 2, (c0 + c1) / 2)))
        elif params.chord_blocks and is_chord_block(comp, template, params):
            boxes.extend(split_chord_block(comp, template, params))
    return boxes, template


def isolate_staff_lines(gray: np.ndarray, params: HyperParams = HyperParams(), remove_beams: bool = True):
    """Ink-positive image of horizontal lines, with thick beams subtracted."""
    horiz = cv.open_dark(gray, cv.horizontal(params.staff_filter_length))
    lines = 1.0 - horiz
    if remove_beams:
        beams = 1.0 - cv.open_dark(horiz, cv.vertical(params.beam_thickness))
        lines = np.clip(lines - beams, 0.0, None)
    return lines


def compute_staff_features(gray: np.ndarray, params: HyperParams = HyperParams(), remove_beams: bool = True,
                           debug: dict | None = None) -> StaffFeatureTensor:
    lines = isolate_staff_lines(gray, params, remove_beams)
    if debug is not None:
        debug["staff_lines"] = 1.0 - lines
    medians = column_row_medians(1.0 - lines, params.num_columns)
    spacings = spacing_candidates(params.feature_spacing_min, params.feature_spacing_max,
                                  params.feature_spacing_step)
    act = np.stack([comb_response(medians, s) for s in spacings])
    np.clip(act, 0.0, None, out=act)
    edges = np.linspace(0, gray.shape[1], params.num_columns + 1)
    return StaffFeatureTensor(act, spacings, edges)


def compute_barline_features(gray: np.ndarray, params: HyperParams = HyperParams(),
                             debug: dict | None = None) -> BarlineFeatures:
    widened = cv.dilate(gray, cv.horizontal(params.bar_dilate_length))
    tall = cv.open_dark(widened, cv.vertical(params.bar_filter_height))
    ink = 1.0 - tall
    thick = 1.0 - cv.open_dark(tall, cv.horizontal(params.bar_thick_length))
    bars = np.clip(ink - thick, 0.0, None)
    if debug is not None:
        debug["bar_lines"] = 1.0 - bars
    return BarlineFeatures((bars > params.bar_threshold).sum(axis=1))
