"""Domain types and frame-grid arithmetic shared by every other module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MIN_PITCH = 21  # A0
MAX_PITCH = 108  # C8
N_PITCHES = MAX_PITCH - MIN_PITCH + 1

SAMPLE_RATE = 16000
HOP_LENGTH = 512

# overlaps shorter than this are float noise, not note presence
OVERLAP_EPS_S = 1e-9


def is_piano_pitch(pitch: int) -> bool:
    return MIN_PITCH <= pitch <= MAX_PITCH


def pitch_index(pitch: int) -> int:
    """Row index of a MIDI pitch in an 88-key roll."""
    if not is_piano_pitch(pitch):
        raise ValueError(f"pitch {pitch} outside piano range {MIN_PITCH}-{MAX_PITCH}")
    return pitch - MIN_PITCH


def index_pitch(index: int) -> int:
    if not 0 <= index < N_PITCHES:
        raise ValueError(f"pitch index {index} outside [0, {N_PITCHES})")
    return index + MIN_PITCH


@dataclass(frozen=True)
class NoteEvent:
    """A single pitched note; times in seconds, velocity in MIDI units."""

    pitch: int
    onset_s: float
    offset_s: float
    velocity: int = 64

    def __post_init__(self):
        if not is_piano_pitch(self.pitch):
            raise ValueError(f"pitch {self.pitch} outside piano range")
        if self.onset_s < 0:
            raise ValueError(f"negative onset {self.onset_s}")
        if not self.offset_s > self.onset_s:
            raise ValueError(f"offset {self.offset_s} not after onset {self.onset_s}")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside [1, 127]")

    @property
    def duration_s(self) -> float:
        return self.offset_s - self.onset_s

    def sort_key(self):
        return (self.onset_s, self.pitch, self.offset_s, self.velocity)


@dataclass(frozen=True)
class NoteSequence:
    """Notes of one piece, sorted by (onset, pitch).

    ``pedal`` holds sustain pedal transitions ``(time_s, is_down)`` as read
    from the source file; it is empty once sustain has been applied.
    """

    notes: tuple[NoteEvent, ...] = ()
    duration_s: float = 0.0
    pedal: tuple[tuple[float, bool], ...] = field(default=(), compare=False)

    def __post_init__(self):
        notes = tuple(sorted(self.notes, key=NoteEvent.sort_key))
        object.__setattr__(self, "notes", notes)
        end = max((n.offset_s for n in notes), default=0.0)
        if self.duration_s < end:
            object.__setattr__(self, "duration_s", end)
        object.__setattr__(self, "pedal", tuple(self.pedal))

    @classmethod
    def from_notes(cls, notes: Iterable[NoteEvent], duration_s: float = 0.0) -> "NoteSequence":
        return cls(tuple(notes), duration_s)

    def __len__(self):
        return len(self.notes)

    def __iter__(self):
        return iter(self.notes)

    def __getitem__(self, i):
        return self.notes[i]

    def as_arrays(self):
        """Return ``(pitches, onsets, offsets, velocities)`` numpy arrays."""
        n = len(self.notes)
        pitches = np.fromiter((x.pitch for x in self.notes), dtype=np.int64, count=n)
        onsets = np.fromiter((x.onset_s for x in self.notes), dtype=np.float64, count=n)
        offsets = np.fromiter((x.offset_s for x in self.notes), dtype=np.float64, count=n)
        velocities = np.fromiter((x.velocity for x in self.notes), dtype=np.float64, count=n)
        return pitches, onsets, offsets, velocities

    def same_pitch_overlaps(self) -> bool:
        last_off: dict[int, float] = {}
        for n in self.notes:
            if n.onset_s < last_off.get(n.pitch, -math.inf):
                return True
            last_off[n.pitch] = n.offset_s
        return False


@dataclass(frozen=True)
class FrameGrid:
    sample_rate: int = SAMPLE_RATE
    hop_length: int = HOP_LENGTH
    n_frames: int = 0

    def __post_init__(self):
        if self.sample_rate <= 0 or self.hop_length <= 0:
            raise ValueError("sample_rate and hop_length must be positive")
        if self.n_frames < 0:
            raise ValueError("n_frames must be non-negative")

    @property
    def frame_duration(self) -> float:
        return self.hop_length / self.sample_rate

    @property
    def duration_s(self) -> float:
        return self.n_frames * self.frame_duration

    @classmethod
    def covering(cls, duration_s: float, sample_rate: int = SAMPLE_RATE,
                 hop_length: int = HOP_LENGTH) -> "FrameGrid":
        """Smallest grid whose frames cover ``[0, duration_s)``."""
        grid = cls(sample_rate, hop_length, 0)
        n = grid.frame_ceil(duration_s)
        return cls(sample_rate, hop_length, n)

    def frame_start(self, i) -> float:
        return i * self.frame_duration

    def frame_floor(self, t: float) -> int:
        """Unclamped index of the frame containing ``t``.

        Boundaries are the products ``i * frame_duration``; the division is
        corrected so a time equal to a boundary always maps to the later
        frame, whatever the rounding of ``t / frame_duration``.
        """
        fd = self.frame_duration
        k = math.floor(t / fd)
        if (k + 1) * fd <= t:
            k += 1
        elif k * fd > t:
            k -= 1
        return k

    def frame_ceil(self, t: float) -> int:
        """Number of frames needed so that frame ends reach ``t``.

        Overhangs shorter than ``OVERLAP_EPS_S`` past a boundary do not count,
        so ``onset + 0.032`` on an aligned onset ends on the next boundary.
        """
        k = self.frame_floor(t)
        return k if t - self.frame_start(k) <= OVERLAP_EPS_S else k + 1

    def frame_span(self, onset_s: float, offset_s: float) -> tuple[int, int]:
        """Frames overlapping ``[onset_s, offset_s)`` by a positive amount.

        Returns a half-open ``(start, stop)`` pair clipped to the grid.
        """
        start = max(self.frame_floor(onset_s), 0)
        stop = min(self.frame_ceil(offset_s), self.n_frames)
        return start, max(stop, start)


def time_to_frame(t: float, grid: FrameGrid) -> int:
    """Index of the frame containing ``t``, clamped to the grid."""
    if t < 0:
        raise ValueError(f"negative time {t}")
    if grid.n_frames == 0:
        raise ValueError("empty grid")
    return min(max(grid.frame_floor(t), 0), grid.n_frames - 1)


def frame_interval(i: int, grid: FrameGrid) -> tuple[float, float]:
    if not 0 <= i < grid.n_frames:
        raise IndexError(f"frame {i} outside [0, {grid.n_frames})")
    return grid.frame_start(i), grid.frame_start(i + 1)


def _check_matrix(values: np.ndarray, n_frames: int, name: str) -> None:
    if values.ndim != 2 or values.shape[1] != N_PITCHES:
        raise ValueError(f"{name} must be T x {N_PITCHES}, got shape {values.shape}")
    if values.shape[0] != n_frames:
        raise ValueError(f"{name} has {values.shape[0]} frames, grid has {n_frames}")


@dataclass(frozen=True, eq=False)
class Posteriorgram:
    """T x 88 matrix of per-frame activations on a grid.

    ``probability=False`` marks the velocity channel, whose entries are
    unconstrained until decode time.
    """

    grid: FrameGrid
    values: np.ndarray
    probability: bool = True

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        _check_matrix(values, self.grid.n_frames, "posteriorgram")
        if self.probability and values.size and (values.min() < 0 or values.max() > 1):
            raise ValueError("probability posteriorgram entries must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, grid: FrameGrid | None = None, probability: bool = True):
        values = np.asarray(values, dtype=np.float64)
        if grid is None:
            grid = FrameGrid(n_frames=values.shape[0])
        return cls(grid, values, probability)


@dataclass(frozen=True, eq=False)
class BinaryRoll:
    grid: FrameGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        _check_matrix(values, self.grid.n_frames, "roll")
        if values.size and not np.isin(values, (0, 1)).all():
            raise ValueError("roll entries must be 0 or 1")
        values = values.astype(np.uint8)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: FrameGrid) -> "BinaryRoll":
        return cls(grid, np.zeros((grid.n_frames, N_PITCHES), dtype=np.uint8))

    def as_posteriorgram(self) -> Posteriorgram:
        return Posteriorgram(self.grid, self.values.astype(np.float64))


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Values of a roll/posteriorgram or a raw array, as float64."""
    if isinstance(x, (Posteriorgram, BinaryRoll)):
        x = x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def check_same_shape(*arrays: np.ndarray, names: Sequence[str] = ()) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        label = ", ".join(names) if names else "inputs"
        raise ValueError(f"shape mismatch between {label}: {[a.shape for a in arrays]}")
