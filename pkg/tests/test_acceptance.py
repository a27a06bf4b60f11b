"""Acceptance suite: one block per criterion, each at its pinned tolerance.

Every test carries an ``acceptance`` marker; the conftest prints one
PASS/FAIL line per criterion at the end of the run.
"""

import time

import numpy as np
import pytest

from ofk import mat1
from ofk.core import HOP_LENGTH, SAMPLE_RATE, FrameGrid, NoteEvent, NoteSequence, Posteriorgram
from ofk.decoder import DecoderConfig, decode, decode_frames_only, velocity_to_midi
from ofk.frontend import N_FFT, N_MELS, AudioBuffer, log_mel, stft_magnitude
from ofk.labels import ONSET_LENGTH_S, WEIGHT_C, make_labels, make_onset_labels, make_weights
from ofk.losses import (
    onset_loss,
    onset_loss_grad,
    velocity_loss,
    velocity_loss_grad,
    weighted_frame_loss,
    weighted_frame_loss_grad,
)
from ofk.metrics import (
    MatchingConfig,
    candidate_edges,
    evaluate_piece,
    match_notes,
    note_scores,
    velocity_keep_mask,
)
from ofk.midi_io import apply_sustain, parse_midi, write_midi
from tests.helpers import (
    central_difference,
    direct_dft_frames,
    exhaustive_matching_size,
    lstsq_fit,
    random_sequence,
    relative_error,
)

FRAME = HOP_LENGTH / SAMPLE_RATE
TICK = 0.5 / 220


def criterion(number, title):
    return pytest.mark.acceptance(number, title)


def say(number, ok, detail):
    print(f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")


# 1 -------------------------------------------------------------------------------

@criterion(1, "analytic loss gradients match central differences")
def test_gradient_fidelity():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        frames = (rng.random((8, 88)) < 0.3).astype(np.uint8)
        onsets = frames * (rng.random((8, 88)) < 0.4)
        weights = make_weights(frames, onsets)
        p_on = rng.uniform(0.05, 0.95, (8, 88))
        p_fr = rng.uniform(0.05, 0.95, (8, 88))
        v_lab = rng.random((8, 88)) * onsets
        v_pred = rng.random((8, 88))
        cases = [
            (onset_loss_grad(onsets, p_on), lambda x: onset_loss(onsets, x), p_on),
            (weighted_frame_loss_grad(frames, p_fr, weights),
             lambda x: weighted_frame_loss(frames, x, weights), p_fr),
            (velocity_loss_grad(onsets, v_lab, v_pred), lambda x: velocity_loss(onsets, v_lab, x), v_pred),
        ]
        for analytic, f, x in cases:
            numeric = central_difference(f, x, h=1e-5)
            worst = max(worst, float(relative_error(analytic, numeric).max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and elapsed < 10
    say(1, ok, f"max relative error {worst:.2e} (<= 1e-5), {elapsed:.1f} s (< 10 s)")
    assert worst <= 1e-5
    assert elapsed < 10


# 2 -------------------------------------------------------------------------------

def ideal_posteriorgrams(seq):
    labels = make_labels(seq)
    grid = labels.grid
    return (Posteriorgram(grid, labels.onsets.values.astype(float)),
            Posteriorgram(grid, labels.frames.values.astype(float)),
            Posteriorgram(grid, labels.velocities, probability=False))


@criterion(2, "label to decode round trip")
def test_label_decode_round_trip():
    rng = np.random.default_rng(202)
    worst_time = worst_vel = 0.0
    f1s = []
    for _ in range(200):
        seq = random_sequence(rng, max_notes=30, min_dur=0.05, max_dur=3.0)
        on, fr, vel = ideal_posteriorgrams(seq)
        dec = decode(on, fr, vel)
        assert len(dec) == len(seq)
        vmax = max(n.velocity for n in seq)
        key = lambda n: (n.pitch, n.onset_s)
        for a, b in zip(sorted(seq, key=key), sorted(dec, key=key)):
            assert a.pitch == b.pitch
            worst_time = max(worst_time, abs(a.onset_s - b.onset_s), abs(a.offset_s - b.offset_s))
            worst_vel = max(worst_vel, abs(b.velocity - velocity_to_midi(a.velocity / vmax)))
        f1s.append(evaluate_piece(seq, dec).note.f1)
    ok = worst_time <= FRAME + 1e-9 and worst_vel <= 1 and min(f1s) == 1.0
    say(2, ok, f"max time error {worst_time * 1000:.2f} ms, max velocity error {worst_vel}, "
               f"min note F1 {min(f1s)}")
    assert worst_time <= FRAME + 1e-9
    assert worst_vel <= 1
    assert min(f1s) == 1.0


# 3 -------------------------------------------------------------------------------

def corrupted_posteriorgrams(seq, rng, miss_rate=0.15, spurious_per_note=1.0):
    """Ideal posteriorgrams with some onsets missed and onset-free frame runs added."""
    labels = make_labels(seq)
    grid = labels.grid
    frame = labels.frames.values * 0.9
    onset = labels.onsets.values * 0.9
    for n in seq:
        if rng.random() < miss_rate:
            start, stop = grid.frame_span(n.onset_s, n.onset_s + ONSET_LENGTH_S)
            onset[start:stop, n.pitch - 21] = 0.3
    occupied = labels.frames.values.astype(bool)
    n_spurious = int(round(spurious_per_note * len(seq)))
    placed = 0
    while placed < n_spurious:
        p = int(rng.integers(0, 88))
        length = int(rng.integers(2, 5))
        t = int(rng.integers(1, max(2, grid.n_frames - length - 1)))
        lo, hi = t - 1, min(t + length + 1, grid.n_frames)
        if t + length > grid.n_frames or occupied[lo:hi, p].any():
            continue
        occupied[t:t + length, p] = True
        frame[t:t + length, p] = 0.7
        placed += 1
    return onset, frame, labels.velocities, grid


@criterion(3, "onset gating trades frame score for note score")
def test_onset_gating_ablation():
    rng = np.random.default_rng(303)
    gated, plain = [], []
    for _ in range(50):
        seq = random_sequence(rng, max_notes=30, min_dur=0.2, max_dur=3.0)
        onset, frame, vel, grid = corrupted_posteriorgrams(seq, rng)
        gated.append(evaluate_piece(seq, decode(onset, frame, vel, grid=grid), grid))
        plain.append(evaluate_piece(seq, decode_frames_only(frame, grid=grid), grid))
    note_gated = np.mean([r.note_with_offset.f1 for r in gated])
    note_plain = np.mean([r.note_with_offset.f1 for r in plain])
    frame_gated = np.mean([r.frame.f1 for r in gated])
    frame_plain = np.mean([r.frame.f1 for r in plain])
    ok = note_gated - note_plain > 0 and frame_plain - frame_gated >= 0
    say(3, ok, f"note-with-offset F1 gated {note_gated:.4f} vs frames-only {note_plain:.4f}; "
               f"frame F1 frames-only {frame_plain:.4f} vs gated {frame_gated:.4f}")
    assert note_gated - note_plain > 0
    assert frame_plain - frame_gated >= 0


# 4 -------------------------------------------------------------------------------

def small_instance(rng):
    """Up to six notes per side packed into a few pitches and half a second,
    so candidate graphs are dense and ambiguous."""
    def side():
        k = int(rng.integers(0, 7))
        notes = []
        for _ in range(k):
            on = float(rng.uniform(0, 0.5))
            notes.append(NoteEvent(int(rng.integers(60, 63)), on, on + float(rng.uniform(0.05, 0.6)),
                                   int(rng.integers(1, 128))))
        return NoteSequence(tuple(notes))
    return side(), side()


def reference_velocity_count(ref, est, pairs, tau=0.1):
    """Kept-match count from the generic least-squares solver."""
    if not pairs:
        return 0
    vmax = max(n.velocity for n in ref)
    v_ref = np.array([ref[i].velocity / vmax for i, _ in pairs])
    v_est = np.array([est[j].velocity for _, j in pairs], dtype=float)
    if np.ptp(v_est) == 0:
        m, b = 0.0, v_ref.mean()
    else:
        m, b = lstsq_fit(v_est, v_ref)
    return int(np.sum(np.abs(m * v_est + b - v_ref) < tau))


def edge_matrix(ref, est, cfg):
    indptr, indices = candidate_edges(ref, est, cfg)
    adj = np.zeros((len(ref), len(est)), dtype=bool)
    for i in range(len(ref)):
        adj[i, indices[indptr[i]:indptr[i + 1]]] = True
    return adj


def oracle_adjacency(ref, est, require_offset):
    """Candidate edges recomputed from the timing rules, without the library."""
    adj = np.zeros((len(ref), len(est)), dtype=bool)
    for i, r in enumerate(ref):
        for j, e in enumerate(est):
            ok = r.pitch == e.pitch and abs(r.onset_s - e.onset_s) <= 0.05 + 1e-9
            if require_offset:
                tol = max(0.05, 0.2 * (r.offset_s - r.onset_s))
                ok = ok and abs(r.offset_s - e.offset_s) <= tol + 1e-9
            adj[i, j] = ok
    return adj


@criterion(4, "matching equals exhaustive maximum matching")
def test_matching_oracle(backend):
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    levels = {
        "note": MatchingConfig(),
        "note_with_offset": MatchingConfig(require_offset=True),
        "note_with_offset_velocity": MatchingConfig(require_offset=True, require_velocity=True),
    }
    mismatches = 0
    for _ in range(1000):
        ref, est = small_instance(rng)
        for name, cfg in levels.items():
            pairs = match_notes(ref, est, cfg)
            adj = oracle_adjacency(ref, est, cfg.require_offset)
            assert np.array_equal(adj, edge_matrix(ref, est, cfg)) or not (len(ref) and len(est))
            assert all(adj[i, j] for i, j in pairs)
            assert len({j for _, j in pairs}) == len(pairs)
            if len(pairs) != exhaustive_matching_size(adj):
                mismatches += 1
            if cfg.require_velocity:
                kept = note_scores(ref, est, cfg).tp
                if kept != reference_velocity_count(ref, est, pairs):
                    mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 30
    say(4, ok, f"[{backend.__name__.rsplit('.', 1)[-1]}] {mismatches} mismatches over 1000 instances x 3 levels, "
               f"{elapsed:.1f} s (< 30 s)")
    assert mismatches == 0
    assert elapsed < 30


# 5 -------------------------------------------------------------------------------

@criterion(5, "velocity filter is affine invariant with a strict threshold")
def test_velocity_affine_invariance():
    rng = np.random.default_rng(505)
    changed = 0
    for _ in range(100):
        n = int(rng.integers(2, 25))
        v_ref = rng.uniform(0.05, 1.0, n)
        # estimates loosely tied to the reference so both outcomes occur
        v_est = 127 * np.clip(v_ref + rng.normal(0, 0.15, n), 0, 1)
        a = float(rng.uniform(0.1, 10))
        c = float(rng.uniform(-50, 50))
        base = velocity_keep_mask(v_ref, v_est)
        moved = velocity_keep_mask(v_ref, a * v_est + c)
        changed += int(not np.array_equal(base, moved))
    say(5, changed == 0, f"{changed} of 100 kept-sets changed under v -> a v + c")
    assert changed == 0


@criterion(5, "velocity filter is affine invariant with a strict threshold")
@pytest.mark.parametrize("delta, kept", [(-1e-6, True), (1e-6, False)])
def test_velocity_tau_boundary(delta, kept):
    # residual pattern orthogonal to both 1 and x, so the fit recovers (m0, b0) exactly
    x = np.array([1.0, 2.0, 3.0, 4.0]) * 20
    pattern = np.array([1.0, -1.0, -1.0, 1.0])
    v_ref = 0.008 * x + 0.1 + (0.1 + delta) * pattern
    mask = velocity_keep_mask(v_ref, x, tau=0.1)
    ok = bool(np.all(mask == kept))
    say(5, ok, f"residual 0.1{delta:+.0e}: kept={mask.tolist()}")
    assert np.all(mask == kept)


# 6 -------------------------------------------------------------------------------

@criterion(6, "default constants")
def test_constant_frame_duration():
    # hop 512 at 16 kHz -> 32 ms frames
    assert HOP_LENGTH == 512 and SAMPLE_RATE == 16000
    assert FrameGrid().frame_duration == 0.032
    say(6, True, "frame duration 0.032 s")


@criterion(6, "default constants")
def test_constant_mel_bins():
    assert N_MELS == 229
    assert log_mel(AudioBuffer(np.zeros(4096))).values.shape == (8, 229)
    say(6, True, "229 mel bins")


@criterion(6, "default constants")
def test_constant_fft_size():
    assert N_FFT == 2048
    assert stft_magnitude(AudioBuffer(np.zeros(4096))).shape[1] == 2048 // 2 + 1
    say(6, True, "2048-point FFT")


@criterion(6, "default constants")
def test_constant_onset_length():
    assert ONSET_LENGTH_S == 0.032
    grid = FrameGrid(n_frames=20)
    roll = make_onset_labels(NoteSequence((NoteEvent(60, 0.32, 0.5),)), grid).values
    assert roll[:, 39].sum() == 1
    say(6, True, "onset length 32 ms")


@criterion(6, "default constants")
def test_constant_weight_c():
    assert WEIGHT_C == 5.0
    w = make_labels(NoteSequence((NoteEvent(60, 0.0, 0.32),)), FrameGrid(n_frames=12)).weights
    assert w[0, 39] == 5.0 and w[1, 39] == 5.0 / 1 and w[2, 39] == 5.0 / 2
    say(6, True, "weight c = 5.0")


@criterion(6, "default constants")
def test_constant_thresholds():
    cfg = DecoderConfig()
    assert cfg.onset_threshold == 0.5 and cfg.frame_threshold == 0.5
    on = np.zeros((4, 88))
    on[0, 0] = 0.5
    assert len(decode(on, on)) == 1
    on[0, 0] = np.nextafter(0.5, 0)
    assert len(decode(on, on)) == 0
    say(6, True, "onset and frame thresholds 0.5")


@criterion(6, "default constants")
def test_constant_onset_tolerance():
    assert MatchingConfig().onset_tolerance_s == 0.05
    ref = NoteSequence((NoteEvent(60, 1.0, 2.0),))
    assert len(match_notes(ref, NoteSequence((NoteEvent(60, 1.05, 2.0),)))) == 1
    assert len(match_notes(ref, NoteSequence((NoteEvent(60, 1.051, 2.0),)))) == 0
    say(6, True, "onset tolerance 50 ms")


@criterion(6, "default constants")
def test_constant_offset_rule():
    cfg = MatchingConfig(require_offset=True)
    assert cfg.offset_ratio == 0.2 and cfg.offset_min_tolerance_s == 0.05
    long_ref = NoteSequence((NoteEvent(60, 0.0, 2.0),))  # 20% = 400 ms
    short_ref = NoteSequence((NoteEvent(60, 0.0, 0.1),))  # floor 50 ms
    assert len(match_notes(long_ref, NoteSequence((NoteEvent(60, 0.0, 2.4),)), cfg)) == 1
    assert len(match_notes(long_ref, NoteSequence((NoteEvent(60, 0.0, 2.41),)), cfg)) == 0
    assert len(match_notes(short_ref, NoteSequence((NoteEvent(60, 0.0, 0.15),)), cfg)) == 1
    assert len(match_notes(short_ref, NoteSequence((NoteEvent(60, 0.0, 0.16),)), cfg)) == 0
    say(6, True, "offset tolerance max(50 ms, 20% duration)")


@criterion(6, "default constants")
def test_constant_velocity_tau():
    assert MatchingConfig().velocity_tau == 0.1
    say(6, True, "velocity tau 0.1")


@criterion(6, "default constants")
def test_constant_velocity_mapping_endpoints():
    assert velocity_to_midi(0.0) == 10 and velocity_to_midi(1.0) == 90
    say(6, True, "velocity mapping 0 -> 10, 1 -> 90")


# 7 -------------------------------------------------------------------------------

def perturbed_estimate(ref, rng):
    notes = []
    for n in ref:
        if rng.random() < 0.1:
            continue
        on = max(0.0, n.onset_s + rng.normal(0, 0.03))
        off = max(on + 0.01, n.offset_s + rng.normal(0, 0.15))
        vel = int(np.clip(n.velocity + rng.normal(0, 15), 1, 127))
        notes.append(NoteEvent(n.pitch, on, off, vel))
    extra = random_sequence(rng, max_notes=4)
    return NoteSequence(tuple(notes) + extra.notes)


@criterion(7, "metric families are ordered")
def test_metric_family_monotonicity():
    rng = np.random.default_rng(707)
    violations = 0
    for _ in range(500):
        ref = random_sequence(rng, max_notes=20)
        est = perturbed_estimate(ref, rng)
        r = evaluate_piece(ref, est)
        if not r.note.f1 >= r.note_with_offset.f1 >= r.note_with_offset_velocity.f1:
            violations += 1
    say(7, violations == 0, f"{violations} ordering violations over 500 pairs")
    assert violations == 0


# 8 -------------------------------------------------------------------------------

@criterion(8, "file round trips and sustain vectors")
def test_midi_round_trip_tick_exact():
    rng = np.random.default_rng(808)
    worst = 0.0
    mismatched = 0
    for _ in range(100):
        seq = random_sequence(rng, same_pitch_gap=0.01)
        back = parse_midi(write_midi(seq))
        if len(back) != len(seq):
            mismatched += 1
            continue
        key = lambda n: (n.pitch, n.onset_s)
        for a, b in zip(sorted(seq, key=key), sorted(back, key=key)):
            if a.pitch != b.pitch or a.velocity != b.velocity:
                mismatched += 1
            worst = max(worst, abs(a.onset_s - b.onset_s), abs(a.offset_s - b.offset_s))
    ok = mismatched == 0 and worst <= TICK + 1e-12
    say(8, ok, f"MIDI: {mismatched} field mismatches, max time error {worst * 1000:.3f} ms (tick {TICK * 1000:.3f} ms)")
    assert mismatched == 0
    assert worst <= TICK + 1e-12


@criterion(8, "file round trips and sustain vectors")
def test_mat1_round_trip_bit_exact():
    rng = np.random.default_rng(809)
    for _ in range(50):
        rows, cols = int(rng.integers(0, 40)), int(rng.integers(1, 100))
        f = rng.standard_normal((rows, cols)).astype(np.float32)
        u = (rng.random((rows, cols)) < 0.5).astype(np.uint8)
        for m in (f, u):
            back = mat1.loads(mat1.dumps(m))
            assert back.shape == m.shape and back.dtype == m.dtype
            assert back.tobytes() == m.tobytes()
    say(8, True, "MAT1: 100 matrices bit-exact")


@criterion(8, "file round trips and sustain vectors")
@pytest.mark.parametrize("notes, pedal, expected", [
    ([(60, 1.0, 2.0)], [(1.5, True), (4.0, False)], [(60, 1.0, 4.0)]),
    ([(60, 1.0, 2.0), (60, 3.0, 3.5)], [(1.5, True), (4.0, False)], [(60, 1.0, 3.0), (60, 3.0, 4.0)]),
    ([(60, 1.0, 2.0), (62, 1.5, 2.5)], [], [(60, 1.0, 2.0), (62, 1.5, 2.5)]),
])
def test_sustain_vectors(notes, pedal, expected):
    seq = NoteSequence(tuple(NoteEvent(*n) for n in notes), 5.0)
    out = [(n.pitch, n.onset_s, n.offset_s) for n in apply_sustain(seq, pedal)]
    say(8, out == expected, f"sustain {notes} with {pedal} -> {out}")
    assert out == expected


# 9 -------------------------------------------------------------------------------

@criterion(9, "frontend sanity")
@pytest.mark.parametrize("freq", [440.0, 1000.0, 4000.0])
def test_pure_tone_argmax(freq):
    t = np.arange(SAMPLE_RATE) / SAMPLE_RATE
    mag = stft_magnitude(AudioBuffer(np.sin(2 * np.pi * freq * t)))
    # frames whose window lies fully inside the signal
    interior = mag[N_FFT // 2 // HOP_LENGTH: -(N_FFT // 2 // HOP_LENGTH)]
    bins = np.argmax(interior, axis=1)
    expected = round(freq * N_FFT / SAMPLE_RATE)
    ok = bool(np.all(bins == expected))
    say(9, ok, f"{freq:.0f} Hz -> bins {sorted(set(bins.tolist()))}, expected {expected}")
    assert np.all(bins == expected)


@criterion(9, "frontend sanity")
def test_silence_floor():
    values = log_mel(AudioBuffer(np.zeros(SAMPLE_RATE))).values
    ok = np.allclose(values, np.log(1e-5), rtol=0, atol=1e-12)
    say(9, ok, f"silence -> [{values.min():.6f}, {values.max():.6f}], floor {np.log(1e-5):.6f}")
    assert ok


@criterion(9, "frontend sanity")
@pytest.mark.parametrize("n", [1500, 2048, 3000, 4096])
def test_stft_energy_against_dft(n):
    x = np.random.default_rng(n).standard_normal(n)
    ours = np.sum(stft_magnitude(AudioBuffer(x)) ** 2)
    oracle = np.sum(direct_dft_frames(x) ** 2)
    rel = abs(ours - oracle) / oracle
    say(9, rel <= 0.05, f"{n} samples: energy relative difference {rel:.2e} (<= 5%)")
    assert rel <= 0.05
