"""Hyperparameters and ablation switches for the retrieval pipeline.

Sizes assume the image has been normalized to a 10 px staff interline.
Config files are INI-style ``key = value`` lines under a ``[sheetmidi]``
section; any key can also be overridden from the command line.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import InvalidArgumentError

CONFIG_ENV = "SHEETMIDI_CONFIG"
SECTION = "sheetmidi"


@dataclass(frozen=True)
class HyperParams:
    # preprocessing
    target_interline: float = 10.0
    spacing_min: float = 5.0
    spacing_max: float = 50.0
    spacing_step: float = 1.0
    num_columns: int = 10
    background_radius_factor: float = 4.0  # blur radius = factor * spacing_max
    fixed_width: int = 1000  # used when adaptive_resize is off
    min_confidence: float = 1.5
    # notehead detection
    notehead_disk: int = 5
    blob_min_area: float = 20.0
    blob_max_area: float = 200.0
    blob_min_fill: float = 0.55
    blob_aspect_min: float = 0.5
    blob_aspect_max: float = 2.0
    template_crop_factor: float = 1.5
    min_blobs: int = 5
    # measured from adaptive templates on rendered 10 px-interline pages
    fallback_height: float = 13.0
    fallback_width: float = 13.0
    fallback_area: float = 136.0
    notehead_tol_low: float = 0.5
    notehead_tol_high: float = 1.6
    chord_min_mult: float = 2.0
    chord_max_mult: float = 5.0
    chord_area_tol_low: float = 0.8
    chord_area_tol_high: float = 1.2
    chord_max_width_mult: float = 2.0
    chord_max_height_mult: float = 5.0
    # staff line features
    staff_filter_length: int = 41
    beam_thickness: int = 5
    feature_spacing_min: float = 8.0
    feature_spacing_max: float = 12.0
    feature_spacing_step: float = 0.5
    # bar line features
    bar_dilate_length: int = 5
    bar_filter_height: int = 45
    bar_thick_length: int = 9
    bar_threshold: float = 0.5
    # projection
    context_rows: int = 40
    refine_context_rows: int = 15
    cluster_min_distance: float = 40.0
    # MIDI
    onset_tolerance: float = 0.05
    # alignment
    dtw_steps: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1))
    dtw_weights: tuple[float, ...] = (1.0, 1.0, 2.0)
    # ablation switches
    adaptive_template: bool = True
    adaptive_resize: bool = True
    background_subtract: bool = True
    staffline_reestimate: bool = True
    chord_blocks: bool = True
    filler_repetition: bool = True
    query_filler_repetition: bool = True
    octave_interps: bool = False
    clef_interps: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                continue
            if isinstance(v, (int, float)) and v <= 0:
                raise InvalidArgumentError(f"{f.name} must be positive, got {v}")
        if self.spacing_min >= self.spacing_max or self.feature_spacing_min > self.feature_spacing_max:
            raise InvalidArgumentError("spacing ranges must be nonempty")
        if self.blob_min_area >= self.blob_max_area:
            raise InvalidArgumentError("blob area range must be nonempty")
        if len(self.dtw_steps) != len(self.dtw_weights):
            raise InvalidArgumentError("dtw_steps and dtw_weights must have equal length")

    def replace(self, **changes) -> "HyperParams":
        return dataclasses.replace(self, **changes)

    def midi_options(self) -> dict:
        return {"octave_interps": self.octave_interps, "clef_interps": self.clef_interps,
                "filler_repetition": self.filler_repetition}


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise InvalidArgumentError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if name == "dtw_steps":
        # "1:1, 1:2, 2:1"
        return tuple(tuple(int(x) for x in item.split(":")) for item in raw.split(","))
    if name == "dtw_weights":
        return tuple(float(x) for x in raw.split(","))
    return raw


def _format_value(name: str, value) -> str:
    if name == "dtw_steps":
        return ", ".join(f"{a}:{b}" for a, b in value)
    if name == "dtw_weights":
        return ", ".join(str(w) for w in value)
    return str(value).lower() if isinstance(value, bool) else str(value)


def coerce_overrides(overrides: dict[str, str]) -> dict:
    defaults = HyperParams()
    known = {f.name for f in fields(HyperParams)}
    out = {}
    for key, raw in overrides.items():
        key = key.replace("-", "_")
        if key not in known:
            raise InvalidArgumentError(f"unknown hyperparameter {key!r}")
        out[key] = _parse_value(key, raw, getattr(defaults, key))
    return out


def load_config(path: str | os.PathLike | None = None, overrides: dict[str, str] | None = None) -> HyperParams:
    """Read a config file (or ``$SHEETMIDI_CONFIG``) and apply string overrides."""
    values: dict[str, str] = {}
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise InvalidArgumentError(f"cannot read config file {path}")
        if parser.has_section(SECTION):
            values.update(parser[SECTION])
    values.update(overrides or {})
    return HyperParams(**coerce_overrides(values))


def dump_config(params: HyperParams, path: str | os.PathLike):
    parser = configparser.ConfigParser()
    parser[SECTION] = {f.name: _format_value(f.name, getattr(params, f.name)) for f in fields(params)}
    with open(Path(path), "w") as fh:
        parser.write(fh)
