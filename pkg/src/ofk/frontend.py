"""Log-mel spectrogram input features, WAV I/O and zero-crossing splits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .core import HOP_LENGTH, SAMPLE_RATE, FrameGrid, NoteSequence

N_FFT = 2048
N_MELS = 229
FMIN = 30.0
FMAX = 8000.0
LOG_EPS = 1e-5
SPLIT_TARGET_S = 20.0
SPLIT_WINDOW_S = 1.0


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError(f"audio must be mono (1-D), got shape {x.shape}")
        object.__setattr__(self, "samples", x)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    grid: FrameGrid
    values: np.ndarray

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]


def read_wav(path) -> tuple[int, np.ndarray]:
    """Raw ``(rate, data)`` exactly as stored in the file."""
    try:
        return wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, OSError) as exc:
        raise ValueError(f"cannot read WAV {path}: {exc}") from exc


def to_float(data: np.ndarray) -> np.ndarray:
    """PCM data scaled to [-1, 1] float64, stereo averaged to mono."""
    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.integer):
        x = data.astype(np.float64) / float(-np.iinfo(data.dtype).min)
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    return x


def resample(x: np.ndarray, orig_sr: int, target_sr: int = SAMPLE_RATE) -> np.ndarray:
    """Polyphase windowed-sinc resampling."""
    if orig_sr == target_sr:
        return x
    ratio = Fraction(target_sr, orig_sr)
    return resample_poly(x, ratio.numerator, ratio.denominator)


def load_audio(path, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    rate, data = read_wav(path)
    return AudioBuffer(resample(to_float(data), rate, sample_rate), sample_rate)


def write_wav(path, rate: int, data: np.ndarray) -> None:
    wavfile.write(path, rate, data)


def n_frames_for(n_samples: int, hop_length: int = HOP_LENGTH) -> int:
    return -(-n_samples // hop_length)


def stft_magnitude(audio: AudioBuffer, n_fft: int = N_FFT, hop_length: int = HOP_LENGTH) -> np.ndarray:
    """Hann-windowed STFT magnitude, frames x (n_fft // 2 + 1).

    Frame i is centered on sample ``i * hop_length`` with reflect padding,
    and there are ``ceil(len / hop_length)`` frames.
    """
    x = audio.samples
    if len(x) == 0:
        raise ValueError("empty audio")
    n_frames = n_frames_for(len(x), hop_length)
    pad = n_fft // 2
    mode = "reflect" if len(x) > 1 else "constant"
    padded = np.pad(x, pad, mode=mode)
    needed = (n_frames - 1) * hop_length + n_fft
    if len(padded) < needed:
        padded = np.pad(padded, (0, needed - len(padded)))
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop_length][:n_frames]
    window = np.hanning(n_fft + 1)[:-1]  # periodic Hann
    return np.abs(np.fft.rfft(frames * window, axis=1))


def hz_to_mel(f):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = math.log(6.4) / 27.0
    return np.where(f >= min_log_hz,
                    min_log_mel + np.log(np.maximum(f, min_log_hz) / min_log_hz) / logstep,
                    f / f_sp)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = math.log(6.4) / 27.0
    return np.where(m >= min_log_mel,
                    min_log_hz * np.exp(logstep * (m - min_log_mel)),
                    f_sp * m)


def mel_frequencies(n_mels: int = N_MELS, fmin: float = FMIN, fmax: float = FMAX) -> np.ndarray:
    """The ``n_mels + 2`` band edges, evenly spaced on the mel scale."""
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


def mel_filterbank(sample_rate: int = SAMPLE_RATE, n_fft: int = N_FFT, n_mels: int = N_MELS,
                   fmin: float = FMIN, fmax: float = FMAX) -> np.ndarray:
    """Triangular mel filters, n_mels x (n_fft // 2 + 1).

    Each triangle is scaled by ``2 / (upper - lower)`` so filters carry
    equal area.
    """
    fft_freqs = np.linspace(0, sample_rate / 2, n_fft // 2 + 1)
    edges = mel_frequencies(n_mels, fmin, fmax)
    widths = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    return weights


_FILTERBANK = None


def _default_filterbank() -> np.ndarray:
    global _FILTERBANK
    if _FILTERBANK is None:
        fb = mel_filterbank()
        fb.setflags(write=False)
        _FILTERBANK = fb
    return _FILTERBANK


def log_mel(audio: AudioBuffer) -> MelSpectrogram:
    """``ln(mel_filterbank @ |STFT| + 1e-5)`` per frame, shape T x 229."""
    if audio.sample_rate != SAMPLE_RATE:
        audio = AudioBuffer(resample(audio.samples, audio.sample_rate), SAMPLE_RATE)
    mag = stft_magnitude(audio)
    values = np.log(mag @ _default_filterbank().T + LOG_EPS)
    grid = FrameGrid(SAMPLE_RATE, HOP_LENGTH, values.shape[0])
    return MelSpectrogram(grid, values)


def silent_gaps(seq: NoteSequence, duration_s: float) -> list[tuple[float, float]]:
    """Maximal intervals within ``[0, duration_s]`` where no note sounds."""
    gaps = []
    cursor = 0.0
    for on, off in sorted((n.onset_s, n.offset_s) for n in seq.notes):
        if on > cursor:
            gaps.append((cursor, min(on, duration_s)))
        cursor = max(cursor, off)
    if cursor < duration_s:
        gaps.append((cursor, duration_s))
    return [(a, b) for a, b in gaps if b > a]


def _zero_crossings(x: np.ndarray) -> np.ndarray:
    s = np.sign(x)
    return np.flatnonzero(s[:-1] != s[1:])


def find_splits(audio: AudioBuffer, seq: NoteSequence, target_s: float = SPLIT_TARGET_S) -> list[int]:
    """Sample indices at which to cut a long piece into ~``target_s`` chunks.

    Each cut aims ``target_s`` after the previous one. A silent gap within
    one second of the aim is preferred (the point of the gap nearest the
    aim); otherwise the nearest zero crossing ``k`` (sign of sample k differs
    from sample k + 1) is used. No cut falls within a second of either end.
    """
    x = audio.samples
    sr = audio.sample_rate
    duration = len(x) / sr
    if duration <= target_s:
        return []
    gaps = silent_gaps(seq, duration)
    crossings = _zero_crossings(x)
    lo_limit = int(math.ceil(SPLIT_WINDOW_S * sr))
    hi_limit = len(x) - lo_limit
    splits: list[int] = []
    prev = 0
    while True:
        aim = prev + int(round(target_s * sr))
        if aim > hi_limit:
            break
        lo = max(aim - int(round(SPLIT_WINDOW_S * sr)), lo_limit, prev + 1)
        hi = min(aim + int(round(SPLIT_WINDOW_S * sr)), hi_limit)
        if lo > hi:
            break
        k = _nearest_gap_sample(gaps, sr, aim, lo, hi)
        if k is None:
            k = _nearest_crossing(crossings, aim, lo_limit, hi_limit, prev)
        if k is None:
            k = aim
        splits.append(k)
        prev = k
    return splits


def _nearest_gap_sample(gaps, sr, aim, lo, hi):
    best = None
    for a, b in gaps:
        first = max(int(math.ceil(a * sr)), lo)
        last = min(int(math.ceil(b * sr)) - 1, hi)
        if first > last:
            continue
        k = min(max(aim, first), last)
        if best is None or abs(k - aim) < abs(best - aim):
            best = k
    return best


def _nearest_crossing(crossings, aim, lo_limit, hi_limit, prev):
    valid = crossings[(crossings >= lo_limit) & (crossings <= hi_limit) & (crossings > prev)]
    if valid.size == 0:
        return None
    return int(valid[np.argmin(np.abs(valid - aim))])
