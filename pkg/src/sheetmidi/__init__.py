"""Retrieve the MIDI passage matching a phone photo of piano sheet music via bootleg scores."""
from .align import AlignmentResult, TimeInterval, subsequence_dtw
from .bootleg import BootlegScore, deserialize, serialize
from .config import HyperParams, load_config
from .midi import MidiBootleg, midi_to_bootleg
from .pipeline import run_query

__all__ = [
    "AlignmentResult", "BootlegScore", "HyperParams", "MidiBootleg", "TimeInterval",
    "deserialize", "load_config", "midi_to_bootleg", "run_query", "serialize", "subsequence_dtw",
]
