"""Shared generators and independent oracles for the test suite."""

import itertools

import numpy as np

from ofk.core import MAX_PITCH, MIN_PITCH, NoteEvent, NoteSequence

FRAME = 0.032


def random_sequence(rng, max_notes=30, min_dur=0.05, max_dur=3.0, span=10.0,
                    pitches=None, same_pitch_gap=2 * FRAME, velocities=(1, 127)):
    """Random valid sequence; same-pitch notes are separated by at least
    ``same_pitch_gap`` seconds so their frame runs cannot merge."""
    n = int(rng.integers(1, max_notes + 1))
    pool = pitches if pitches is not None else range(MIN_PITCH, MAX_PITCH + 1)
    pool = list(pool)
    notes = []
    busy = {}
    for _ in range(n * 4):
        if len(notes) >= n:
            break
        pitch = int(rng.choice(pool))
        onset = float(rng.uniform(0, span))
        dur = float(rng.uniform(min_dur, max_dur))
        offset = onset + dur
        clash = any(onset < b + same_pitch_gap and a < offset + same_pitch_gap
                    for a, b in busy.get(pitch, []))
        if clash:
            continue
        busy.setdefault(pitch, []).append((onset, offset))
        notes.append(NoteEvent(pitch, onset, offset, int(rng.integers(velocities[0], velocities[1] + 1))))
    return NoteSequence(tuple(notes))


def edge_ok(r, e, onset_tol=0.05, require_offset=False, ratio=0.2, min_tol=0.05):
    if r.pitch != e.pitch or abs(r.onset_s - e.onset_s) > onset_tol + 1e-9:
        return False
    if require_offset:
        tol = max(min_tol, ratio * (r.offset_s - r.onset_s))
        return abs(r.offset_s - e.offset_s) <= tol + 1e-9
    return True


def brute_force_matching_size(ref, est, require_offset=False):
    """Largest matching by exhaustive search over injective assignments."""
    n_ref, n_est = len(ref), len(est)
    best = 0
    for k in range(min(n_ref, n_est), 0, -1):
        for rs in itertools.combinations(range(n_ref), k):
            for es in itertools.permutations(range(n_est), k):
                if all(edge_ok(ref[i], est[j], require_offset=require_offset) for i, j in zip(rs, es)):
                    return k
    return best


def lstsq_fit(x, y):
    """Slope/intercept via numpy's generic least-squares solver."""
    a = np.column_stack([np.asarray(x, float), np.ones(len(x))])
    (m, b), *_ = np.linalg.lstsq(a, np.asarray(y, float), rcond=None)
    return m, b


def central_difference(f, x, h=1e-5):
    """Gradient of scalar ``f`` at every entry of ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x)
        flat[i] = orig - h
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return g


def relative_error(a, b, floor=1e-8):
    a = np.asarray(a)
    b = np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def direct_dft_frames(x, n_fft=2048, hop=512):
    """STFT magnitude from an explicit DFT matrix and hand-rolled framing."""
    n = len(x)
    pad = n_fft // 2
    padded = np.concatenate([x[1:pad + 1][::-1], x, x[-pad - 1:-1][::-1]])
    n_frames = -(-n // hop)
    k = np.arange(n_fft // 2 + 1)[:, None]
    t = np.arange(n_fft)[None, :]
    basis = np.exp(-2j * np.pi * k * t / n_fft)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n_fft) / n_fft)
    out = []
    for i in range(n_frames):
        seg = padded[i * hop:i * hop + n_fft]
        seg = np.pad(seg, (0, n_fft - len(seg)))
        out.append(np.abs(basis @ (seg * window)))
    return np.array(out)


def exhaustive_matching_size(adj):
    """Maximum matching of a boolean adjacency matrix by trying every
    assignment of each left node (to a free right node, or to nothing)."""
    adj = np.asarray(adj, dtype=bool)
    n_left, n_right = adj.shape
    memo = {}

    def best(i, used):
        if i == n_left:
            return 0
        key = (i, used)
        if key not in memo:
            out = best(i + 1, used)
            for j in range(n_right):
                if adj[i, j] and not used >> j & 1:
                    out = max(out, 1 + best(i + 1, used | 1 << j))
            memo[key] = out
        return memo[key]

    return best(0, 0)
