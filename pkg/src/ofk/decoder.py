"""Posteriorgram to note decoding with onset gating."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FrameGrid, NoteEvent, NoteSequence, Posteriorgram, as_matrix, check_same_shape, index_pitch
from .kernels import decode_runs

VELOCITY_SCALE = 80.0
VELOCITY_BIAS = 10.0
FRAMES_ONLY_VELOCITY = 64


@dataclass(frozen=True)
class DecoderConfig:
    onset_threshold: float = 0.5
    frame_threshold: float = 0.5
    velocity_scale: float = VELOCITY_SCALE
    velocity_bias: float = VELOCITY_BIAS

    def __post_init__(self):
        for name in ("onset_threshold", "frame_threshold"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def velocity_to_midi(v, cfg: DecoderConfig = DecoderConfig()) -> int:
    """Clip a predicted velocity to [0, 1] and map it linearly to MIDI.

    Halves round up, so the result is ``floor(scale * v + bias + 0.5)``.
    """
    v = min(max(float(v), 0.0), 1.0)
    midi = math.floor(cfg.velocity_scale * v + cfg.velocity_bias + 0.5)
    return int(min(max(midi, 1), 127))


def _resolve_grid(grid, *mats):
    if grid is not None:
        return grid
    for m in mats:
        if isinstance(m, Posteriorgram):
            return m.grid
    return FrameGrid(n_frames=as_matrix(mats[0]).shape[0])


def _check_grids(*mats):
    grids = {m.grid for m in mats if isinstance(m, Posteriorgram)}
    if len(grids) > 1:
        raise ValueError(f"posteriorgrams on different grids: {grids}")


def _runs_to_notes(runs, grid: FrameGrid, velocity_of) -> NoteSequence:
    notes = []
    for p, start, stop in runs.tolist():
        notes.append(NoteEvent(index_pitch(p), grid.frame_start(start),
                               grid.frame_start(stop), velocity_of(start, p)))
    return NoteSequence(tuple(notes), grid.duration_s)


def decode(onset_probs, frame_probs, v_pred=None, cfg: DecoderConfig = DecoderConfig(),
           grid: FrameGrid | None = None) -> NoteSequence:
    """Onset-gated note decoding.

    A note of pitch p starts at frame t only if both the frame and the onset
    activation pass their thresholds at t and no note of p is open. It lasts
    while the frame activation stays above threshold; frame runs that never
    see an onset produce nothing, and onsets inside an open note do not
    restart it. Velocity comes from ``v_pred`` at the starting frame.
    """
    _check_grids(onset_probs, frame_probs, *(() if v_pred is None else (v_pred,)))
    grid = _resolve_grid(grid, frame_probs, onset_probs)
    onset = as_matrix(onset_probs, "onset probabilities")
    frame = as_matrix(frame_probs, "frame probabilities")
    vel = np.zeros_like(frame) if v_pred is None else as_matrix(v_pred, "velocity predictions")
    check_same_shape(onset, frame, vel, names=("onset", "frame", "velocity"))
    if frame.shape[0] != grid.n_frames:
        raise ValueError(f"posteriorgram has {frame.shape[0]} frames, grid has {grid.n_frames}")

    runs = decode_runs(frame >= cfg.frame_threshold, onset >= cfg.onset_threshold, True)
    return _runs_to_notes(runs, grid, lambda t, p: velocity_to_midi(vel[t, p], cfg))


def decode_frames_only(frame_probs, cfg: DecoderConfig = DecoderConfig(),
                       grid: FrameGrid | None = None) -> NoteSequence:
    """Frame-threshold segmentation without the onset gate; fixed velocity 64."""
    grid = _resolve_grid(grid, frame_probs)
    frame = as_matrix(frame_probs, "frame probabilities")
    if frame.shape[0] != grid.n_frames:
        raise ValueError(f"posteriorgram has {frame.shape[0]} frames, grid has {grid.n_frames}")
    active = frame >= cfg.frame_threshold
    runs = decode_runs(active, active, False)
    return _runs_to_notes(runs, grid, lambda t, p: FRAMES_ONLY_VELOCITY)
