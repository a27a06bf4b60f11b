"""Frame, onset, velocity and loss-weight targets from a note sequence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_PITCHES, BinaryRoll, FrameGrid, NoteSequence, pitch_index

ONSET_LENGTH_S = 0.032
WEIGHT_C = 5.0


@dataclass(frozen=True, eq=False)
class LabelSet:
    frames: BinaryRoll
    onsets: BinaryRoll
    weights: np.ndarray
    velocities: np.ndarray

    @property
    def grid(self) -> FrameGrid:
        return self.frames.grid


def _note_spans(seq: NoteSequence, grid: FrameGrid, max_length_s: float | None = None):
    for n in seq.notes:
        offset = n.offset_s
        if max_length_s is not None:
            offset = min(offset, n.onset_s + max_length_s)
        start, stop = grid.frame_span(n.onset_s, offset)
        yield n, pitch_index(n.pitch), start, stop


def make_frame_labels(seq: NoteSequence, grid: FrameGrid) -> BinaryRoll:
    """Mark every frame that a note overlaps by any positive amount."""
    roll = np.zeros((grid.n_frames, N_PITCHES), dtype=np.uint8)
    for _, p, start, stop in _note_spans(seq, grid):
        roll[start:stop, p] = 1
    return BinaryRoll(grid, roll)


def make_onset_labels(seq: NoteSequence, grid: FrameGrid,
                      onset_length_s: float = ONSET_LENGTH_S) -> BinaryRoll:
    """Frame labels of the notes truncated to ``onset_length_s``."""
    if onset_length_s <= 0:
        raise ValueError("onset_length_s must be positive")
    roll = np.zeros((grid.n_frames, N_PITCHES), dtype=np.uint8)
    for _, p, start, stop in _note_spans(seq, grid, onset_length_s):
        roll[start:stop, p] = 1
    return BinaryRoll(grid, roll)


def _runs(col: np.ndarray):
    """Half-open ``(start, stop)`` runs of nonzero entries of a 1-D array."""
    padded = np.concatenate(([0], (col != 0).astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return edges[0::2], edges[1::2]


def make_weights(frames, onsets, c: float = WEIGHT_C) -> np.ndarray:
    """Per-cell multipliers for the frame cross entropy.

    Notes are recovered from the rolls: within each active frame run, every
    onset run opens a new note region. A region starting at ``t1`` whose onset
    ends at ``t2`` and which lasts until ``t3`` gets ``c`` on ``[t1, t2]`` and
    ``c / (t - t2)`` on ``(t2, t3]``; everything else stays 1. Decay values
    below 1 on long notes are kept as is.
    """
    f = frames.values if isinstance(frames, BinaryRoll) else np.asarray(frames)
    o = onsets.values if isinstance(onsets, BinaryRoll) else np.asarray(onsets)
    if f.shape != o.shape:
        raise ValueError(f"frames {f.shape} and onsets {o.shape} differ in shape")
    weights = np.ones(f.shape, dtype=np.float64)
    o = o * (f != 0)
    for p in range(f.shape[1]):
        if not f[:, p].any():
            continue
        f_starts, f_stops = _runs(f[:, p])
        o_starts, o_stops = _runs(o[:, p])
        for t_run, t_end in zip(f_starts, f_stops):
            inside = (o_starts >= t_run) & (o_starts < t_end)
            for k in np.flatnonzero(inside):
                t1 = o_starts[k]
                t2 = o_stops[k] - 1
                nxt = o_starts[k + 1] if k + 1 < len(o_starts) else t_end
                t3 = min(nxt, t_end) - 1
                weights[t1:t2 + 1, p] = c
                decay = np.arange(t2 + 1, t3 + 1)
                weights[t2 + 1:t3 + 1, p] = c / (decay - t2)
    return weights


def make_velocity_labels(seq: NoteSequence, onsets, grid: FrameGrid,
                         onset_length_s: float = ONSET_LENGTH_S) -> np.ndarray:
    """Normalized velocity ``v / v_max`` on each note's onset frames."""
    out = np.zeros((grid.n_frames, N_PITCHES), dtype=np.float64)
    if not len(seq):
        return out
    mask = onsets.values if isinstance(onsets, BinaryRoll) else np.asarray(onsets)
    vmax = max(n.velocity for n in seq.notes)
    for n, p, start, stop in _note_spans(seq, grid, onset_length_s):
        out[start:stop, p] = n.velocity / vmax
    return out * (mask != 0)


def make_labels(seq: NoteSequence, grid: FrameGrid | None = None,
                onset_length_s: float = ONSET_LENGTH_S, c: float = WEIGHT_C) -> LabelSet:
    if grid is None:
        grid = FrameGrid.covering(seq.duration_s)
    frames = make_frame_labels(seq, grid)
    onsets = make_onset_labels(seq, grid, onset_length_s)
    return LabelSet(
        frames=frames,
        onsets=onsets,
        weights=make_weights(frames, onsets, c),
        velocities=make_velocity_labels(seq, onsets, grid, onset_length_s),
    )
