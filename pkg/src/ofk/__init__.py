"""Onset-gated piano transcription toolkit.

Label generation, training losses, onset-gated decoding and note-level
evaluation (including a velocity-aware note metric) for 88-key piano
transcription, working from posteriorgrams rather than a trained model.
"""

from .core import (
    BinaryRoll,
    FrameGrid,
    NoteEvent,
    NoteSequence,
    Posteriorgram,
    frame_interval,
    time_to_frame,
)
from .decoder import DecoderConfig, decode, decode_frames_only
from .kernels import BACKEND
from .labels import LabelSet, make_labels
from .metrics import EvalReport, MatchingConfig, aggregate, evaluate_piece, match_notes
from .midi_io import apply_sustain, load_midi, parse_midi, save_midi, write_midi

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BinaryRoll",
    "DecoderConfig",
    "EvalReport",
    "FrameGrid",
    "LabelSet",
    "MatchingConfig",
    "NoteEvent",
    "NoteSequence",
    "Posteriorgram",
    "aggregate",
    "apply_sustain",
    "decode",
    "decode_frames_only",
    "evaluate_piece",
    "frame_interval",
    "load_midi",
    "make_labels",
    "match_notes",
    "parse_midi",
    "save_midi",
    "time_to_frame",
    "write_midi",
]
