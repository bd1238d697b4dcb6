"""Sheet image preprocessing: background removal and interline normalization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import cv
from .config import HyperParams
from .errors import DegenerateImageError, InvalidArgumentError

MIN_DIMENSION = 50


@dataclass(frozen=True)
class PreprocessedImage:
    gray: np.ndarray
    scale_factor: float
    estimated_raw_spacing: float | None
    confidence: float = 0.0


@dataclass(frozen=True)
class SpacingEstimate:
    spacing: float
    confidence: float
    low_confidence: bool
    scores: np.ndarray


def comb_offsets(spacing: float, taps: int = 5) -> np.ndarray:
    return np.rint(np.arange(taps) * spacing).astype(int)


def column_row_medians(img: np.ndarray, num_columns: int) -> np.ndarray:
    """(H, C) row medians of ``num_columns`` equal-width vertical strips, ink-positive."""
    h, w = img.shape
    if w < num_columns:
        raise InvalidArgumentError(f"image width {w} smaller than {num_columns} columns")
    edges = np.linspace(0, w, num_columns + 1).astype(int)
    med = np.empty((h, num_columns), dtype=np.float32)
    for c in range(num_columns):
        med[:, c] = np.median(img[:, edges[c]:edges[c + 1]], axis=1)
    return 1.0 - med


def comb_response(signal: np.ndarray, spacing: float) -> np.ndarray:
    """Response at row h = sum of signal at rows h + round(j * spacing), j = 0..4 (zero past the end)."""
    out = np.zeros_like(signal)
    n = signal.shape[0]
    for off in comb_offsets(spacing):
        if off < n:
            out[:n - off] += signal[off:]
    return out


def remove_background(gray: np.ndarray, radius: int) -> np.ndarray:
    """Flatten slow illumination changes: gray - blur(gray) + 1, clamped to [0, 1]."""
    bg = cv.blur(gray, radius)
    out = gray - bg
    out += 1.0
    return np.clip(out, 0.0, 1.0, out=out)


def spacing_candidates(lo: float, hi: float, step: float) -> np.ndarray:
    return np.arange(lo, hi + step / 2, step)


def estimate_staff_spacing(gray: np.ndarray, num_columns: int = 10, spacing_range=(5.0, 50.0),
                           step: float = 1.0, min_confidence: float = 1.5) -> SpacingEstimate:
    spacings = spacing_candidates(spacing_range[0], spacing_range[1], step)
    if gray.shape[0] < 4 * spacings[-1]:
        raise InvalidArgumentError(f"image height {gray.shape[0]} too small for spacing up to {spacings[-1]}")
    medians = column_row_medians(gray, num_columns)
    scores = np.array([comb_response(medians, s).max(axis=0).sum() for s in spacings])
    best = int(scores.argmax())
    typical = float(np.median(scores))
    confidence = float(scores[best] / typical) if typical > 0 else 0.0
    return SpacingEstimate(float(spacings[best]), confidence, confidence < min_confidence, scores)


def resize(gray: np.ndarray, scale: float) -> np.ndarray:
    h, w = gray.shape
    nh, nw = int(round(h * scale)), int(round(w * scale))
    if min(nh, nw) < MIN_DIMENSION:
        raise DegenerateImageError(f"resized image {nh}x{nw} below {MIN_DIMENSION} px")
    if (nh, nw) == (h, w):
        return gray.astype(np.float32, copy=True)
    img = Image.fromarray(np.ascontiguousarray(gray, dtype=np.float32), mode="F")
    out = np.asarray(img.resize((nw, nh), Image.BILINEAR), dtype=np.float32)
    return np.clip(out, 0.0, 1.0)


def normalize_interline(gray: np.ndarray, estimated_spacing: float, target: float = 10.0,
                        confidence: float = 0.0) -> PreprocessedImage:
    if estimated_spacing <= 0:
        raise InvalidArgumentError("estimated spacing must be positive")
    scale = target / estimated_spacing
    return PreprocessedImage(resize(gray, scale), scale, estimated_spacing, confidence)


def preprocess(gray: np.ndarray, params: HyperParams = HyperParams()) -> PreprocessedImage:
    """Grayscale image -> background-removed image at ~10 px interline."""
    if params.background_subtract:
        radius = max(1, int(round(params.background_radius_factor * params.spacing_max)))
        gray = remove_background(gray, radius)
    if not params.adaptive_resize:
        scale = params.fixed_width / gray.shape[1]
        return PreprocessedImage(resize(gray, scale), scale, None)
    est = estimate_staff_spacing(gray, params.num_columns, (params.spacing_min, params.spacing_max),
                                 params.spacing_step, params.min_confidence)
    return normalize_interline(gray, est.spacing, params.target_interline, est.confidence)
