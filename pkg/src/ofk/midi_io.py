"""Standard MIDI File reading/writing and sustain-pedal translation."""

from __future__ import annotations

import bisect
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import NoteEvent, NoteSequence, is_piano_pitch

logger = logging.getLogger(__name__)

DEFAULT_TEMPO = 500000  # microseconds per quarter note (120 BPM)
WRITE_TICKS_PER_QUARTER = 220
SUSTAIN_CC = 64
SUSTAIN_THRESHOLD = 64
DRUM_CHANNEL = 9  # channel 10, zero based

NOTE_OFF = "note_off"
NOTE_ON = "note_on"
CONTROL = "control_change"
END_OF_TRACK = "end_of_track"


class MidiParseError(ValueError):
    """Malformed SMF data; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass
class RawMidiTrack:
    """All tracks of a file merged into one tick-ordered event list.

    ``events`` hold ``(tick, kind, channel, data)`` where ``data`` is a
    tuple of the message data bytes.
    """

    events: list = field(default_factory=list)
    ticks_per_quarter: int = 480
    tempo_map: list = field(default_factory=lambda: [(0, DEFAULT_TEMPO)])
    smpte_seconds_per_tick: float | None = None
    end_tick: int = 0

    def tick_to_seconds(self, ticks) -> np.ndarray:
        """Vectorized tick -> seconds conversion through the tempo map."""
        ticks = np.asarray(ticks, dtype=np.float64)
        if self.smpte_seconds_per_tick is not None:
            return ticks * self.smpte_seconds_per_tick
        tm_ticks = np.array([t for t, _ in self.tempo_map], dtype=np.float64)
        tm_tempo = np.array([u for _, u in self.tempo_map], dtype=np.float64)
        sec_per_tick = tm_tempo / 1e6 / self.ticks_per_quarter
        seg_start = np.concatenate(([0.0], np.cumsum(np.diff(tm_ticks) * sec_per_tick[:-1])))
        idx = np.searchsorted(tm_ticks, ticks, side="right") - 1
        idx = np.clip(idx, 0, None)
        return seg_start[idx] + (ticks - tm_ticks[idx]) * sec_per_tick[idx]


class _Reader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def need(self, n: int, what: str) -> None:
        if self.pos + n > self.end:
            raise MidiParseError(f"truncated {what}", self.pos)

    def byte(self, what: str = "data byte") -> int:
        self.need(1, what)
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n: int, what: str) -> bytes:
        self.need(n, what)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def varlen(self) -> int:
        start = self.pos
        value = 0
        for _ in range(4):
            b = self.byte("variable-length quantity")
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MidiParseError("variable-length quantity longer than 4 bytes", start)


_DATA_LENGTH = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


def _read_track(r: _Reader, events: list, tempos: list) -> int:
    tick = 0
    status = None
    while r.pos < r.end:
        tick += r.varlen()
        at = r.pos
        b = r.byte("event status")
        if b == 0xFF:
            kind = r.byte("meta type")
            length = r.varlen()
            payload = r.take(length, "meta event")
            if kind == 0x51:
                if length != 3:
                    raise MidiParseError("tempo meta event must have length 3", at)
                tempos.append((tick, int.from_bytes(payload, "big")))
            elif kind == 0x2F:
                events.append((tick, END_OF_TRACK, -1, ()))
                break
            continue
        if b in (0xF0, 0xF7):
            r.take(r.varlen(), "sysex event")
            continue
        if b & 0x80:
            if b >= 0xF0:
                raise MidiParseError(f"unexpected system message 0x{b:02X}", at)
            status = b
            data = ()
        else:
            if status is None:
                raise MidiParseError("running status without a preceding status byte", at)
            data = (b,)
        hi, channel = status >> 4, status & 0x0F
        while len(data) < _DATA_LENGTH[hi]:
            data += (r.byte("channel message"),)
        if any(d & 0x80 for d in data):
            raise MidiParseError("data byte with high bit set", at)
        if hi == 0x9:
            events.append((tick, NOTE_ON if data[1] else NOTE_OFF, channel, data))
        elif hi == 0x8:
            events.append((tick, NOTE_OFF, channel, data))
        elif hi == 0xB:
            events.append((tick, CONTROL, channel, data))
    return tick


def read_raw(data: bytes) -> RawMidiTrack:
    """Parse SMF bytes into a merged :class:`RawMidiTrack`."""
    data = bytes(data)
    if data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    r = _Reader(data, 4)
    (hlen,) = struct.unpack(">I", r.take(4, "header length"))
    if hlen < 6:
        raise MidiParseError(f"header length {hlen} < 6", 4)
    fmt, ntracks, division = struct.unpack(">HHH", r.take(6, "header"))
    r.pos = 8 + hlen
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)

    raw = RawMidiTrack()
    if division & 0x8000:
        fps = 256 - (division >> 8)
        raw.smpte_seconds_per_tick = 1.0 / (fps * (division & 0xFF) or 1)
    else:
        if division == 0:
            raise MidiParseError("ticks per quarter note is zero", 12)
        raw.ticks_per_quarter = division

    events: list = []
    tempos: list = []
    end_tick = 0
    for _ in range(ntracks):
        if r.pos == len(data):
            break
        at = r.pos
        chunk_id = r.take(4, "chunk id")
        (length,) = struct.unpack(">I", r.take(4, "chunk length"))
        if r.pos + length > len(data):
            raise MidiParseError("chunk extends past end of file", at)
        if chunk_id != b"MTrk":
            r.pos += length
            continue
        track_reader = _Reader(data, r.pos, r.pos + length)
        end_tick = max(end_tick, _read_track(track_reader, events, tempos))
        r.pos += length

    # stable: simultaneous events keep their in-track order
    events.sort(key=lambda e: e[0])
    raw.events = events
    tempos.sort(key=lambda x: x[0])
    if not tempos or tempos[0][0] != 0:
        tempos.insert(0, (0, DEFAULT_TEMPO))
    raw.tempo_map = tempos
    raw.end_tick = max([end_tick] + [e[0] for e in events])
    return raw


def parse_midi(data: bytes) -> NoteSequence:
    """Decode SMF bytes into notes in seconds.

    Sustain is not applied; CC64 transitions are kept on ``NoteSequence.pedal``
    for :func:`apply_sustain`.
    """
    raw = read_raw(data)
    ticks = [e[0] for e in raw.events]
    times = raw.tick_to_seconds(ticks) if ticks else np.zeros(0)
    end_time = float(raw.tick_to_seconds([raw.end_tick])[0])

    open_notes: dict[int, tuple[float, int]] = {}
    notes: list[NoteEvent] = []
    pedal: list[tuple[float, bool]] = []
    pedal_down = False
    skipped: set[int] = set()

    def close(pitch: int, t: float) -> None:
        onset, vel = open_notes.pop(pitch)
        if t > onset:
            notes.append(NoteEvent(pitch, onset, t, vel))

    for (tick, kind, channel, data), t in zip(raw.events, times):
        t = float(t)
        if channel == DRUM_CHANNEL:
            continue
        if kind == NOTE_ON:
            pitch, vel = data
            if not is_piano_pitch(pitch):
                skipped.add(pitch)
                continue
            if pitch in open_notes:
                close(pitch, t)
            open_notes[pitch] = (t, vel)
        elif kind == NOTE_OFF:
            pitch = data[0]
            if pitch in open_notes:
                close(pitch, t)
        elif kind == CONTROL and data[0] == SUSTAIN_CC:
            down = data[1] >= SUSTAIN_THRESHOLD
            if down != pedal_down:
                pedal.append((t, down))
                pedal_down = down

    if skipped:
        logger.warning("dropped notes outside the piano range: pitches %s", sorted(skipped))
    if open_notes:
        logger.warning("%d note(s) still on at end of file; closing at %.3f s",
                       len(open_notes), end_time)
        for pitch in list(open_notes):
            close(pitch, end_time)
    return NoteSequence(tuple(notes), end_time, tuple(pedal))


def apply_sustain(seq: NoteSequence, pedal=None) -> NoteSequence:
    """Extend notes whose key is released while the sustain pedal is down.

    A note sounding (or starting) under the pedal is held until the pedal is
    released, the same pitch is struck again, or the piece ends, whichever
    comes first. ``pedal`` defaults to the transitions stored on ``seq``.
    """
    if pedal is None:
        pedal = seq.pedal
    duration = seq.duration_s
    intervals: list[tuple[float, float]] = []
    down_at = None
    for t, down in pedal:
        t = min(max(float(t), 0.0), duration)
        if down and down_at is None:
            down_at = t
        elif not down and down_at is not None:
            if t > down_at:
                intervals.append((down_at, t))
            down_at = None
    if down_at is not None and duration > down_at:
        intervals.append((down_at, duration))
    if not intervals:
        return NoteSequence(seq.notes, duration)

    starts = [a for a, _ in intervals]
    by_pitch: dict[int, list[float]] = {}
    for n in seq.notes:
        by_pitch.setdefault(n.pitch, []).append(n.onset_s)

    out = []
    for n in seq.notes:
        i = bisect.bisect_left(starts, n.offset_s) - 1
        offset = n.offset_s
        if i >= 0:
            down, up = intervals[i]
            if down < n.offset_s < up:
                onsets = by_pitch[n.pitch]
                j = bisect.bisect_right(onsets, n.onset_s)
                next_onset = onsets[j] if j < len(onsets) else duration
                offset = max(n.offset_s, min(up, next_onset, duration))
        out.append(NoteEvent(n.pitch, n.onset_s, offset, n.velocity))
    return NoteSequence(tuple(out), duration)


def normalize_velocities(seq: NoteSequence) -> list[float]:
    """Velocities divided by the piece maximum, in note order."""
    if not len(seq):
        raise ValueError("cannot normalize velocities of an empty sequence")
    vmax = max(n.velocity for n in seq.notes)
    return [n.velocity / vmax for n in seq.notes]


def _varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def write_midi(seq: NoteSequence) -> bytes:
    """Encode notes as an SMF type-0 file at 120 BPM, 220 ticks per quarter."""
    ticks_per_second = WRITE_TICKS_PER_QUARTER * 1e6 / DEFAULT_TEMPO
    events = []  # (tick, order, bytes); note-offs sort before note-ons
    for n in seq.notes:
        on = int(round(n.onset_s * ticks_per_second))
        off = max(int(round(n.offset_s * ticks_per_second)), on + 1)
        events.append((on, 1, n.pitch, bytes((0x90, n.pitch, n.velocity))))
        events.append((off, 0, n.pitch, bytes((0x80, n.pitch, 0))))
    events.sort(key=lambda e: e[:3])
    end = max([int(round(seq.duration_s * ticks_per_second))] + [e[0] for e in events])

    body = bytearray()
    body += b"\x00\xff\x51\x03" + DEFAULT_TEMPO.to_bytes(3, "big")
    last = 0
    for tick, _, _, msg in events:
        body += _varlen(tick - last) + msg
        last = tick
    body += _varlen(end - last) + b"\xff\x2f\x00"

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, WRITE_TICKS_PER_QUARTER)
    return header + b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def load_midi(path, sustain: bool = True) -> NoteSequence:
    with open(path, "rb") as f:
        seq = parse_midi(f.read())
    return apply_sustain(seq) if sustain else seq


def save_midi(seq: NoteSequence, path) -> None:
    with open(path, "wb") as f:
        f.write(write_midi(seq))
