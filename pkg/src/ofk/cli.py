"""``ofk`` command line: features, labels, decoding, losses, evaluation, splits."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import mat1
from .core import N_PITCHES, BinaryRoll, FrameGrid, NoteSequence
from .decoder import DecoderConfig, decode, decode_frames_only
from .frontend import AudioBuffer, find_splits, load_audio, log_mel, read_wav, to_float, write_wav
from .labels import LabelSet, make_labels
from .losses import total_loss
from .metrics import MatchingConfig, aggregate, evaluate_piece
from .midi_io import MidiParseError, load_midi, save_midi

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("ofk")

EXIT_ERROR = 1
EXIT_MISSING = 2
EXIT_SHAPE = 3
EXIT_NO_PAIRS = 4

LABEL_SUFFIXES = ("frames", "onsets", "weights", "velocities")
MIDI_EXTS = (".mid", ".midi")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def n_workers() -> int:
    env = os.environ.get("OFK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer OFK_THREADS=%r", env)
    return os.cpu_count() or 1


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise CliError(f"no such file: {path}", EXIT_MISSING)
    return path


def load_config(path) -> dict:
    """Read a TOML config; keys may sit at top level or under
    ``[decoder]`` / ``[matching]``."""
    with open(_require(path), "rb") as f:
        raw = tomllib.load(f)
    flat = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    for section in ("decoder", "matching"):
        flat.update(raw.get(section, {}))
    return flat


def _build(cls, config: dict, overrides: dict):
    names = {f.name for f in fields(cls)}
    values = {k: v for k, v in config.items() if k in names}
    values.update({k: v for k, v in overrides.items() if k in names and v is not None})
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid {cls.__name__}: {exc}") from exc


def _read_matrix(path) -> np.ndarray:
    try:
        return mat1.load(_require(path))
    except mat1.Mat1Error as exc:
        raise CliError(f"{path}: {exc}") from exc


def _read_midi(path) -> NoteSequence:
    try:
        return load_midi(_require(path))
    except MidiParseError as exc:
        raise CliError(f"{path}: {exc}") from exc


# --- frontend -------------------------------------------------------------

def _frontend_one(wav: Path, out: Path) -> None:
    try:
        audio = load_audio(wav)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if not len(audio.samples):
        raise CliError(f"{wav}: no audio samples")
    mat1.save(out, log_mel(audio).values, mat1.DTYPE_F32)


def cmd_frontend(args) -> int:
    src = _require(args.wav)
    out = Path(args.out)
    if src.is_dir():
        wavs = sorted(p for p in src.rglob("*") if p.suffix.lower() == ".wav")
        jobs = []
        for wav in wavs:
            target = out / wav.relative_to(src).with_suffix(".mat")
            target.parent.mkdir(parents=True, exist_ok=True)
            jobs.append((wav, target))
        with ThreadPoolExecutor(n_workers()) as pool:
            list(pool.map(lambda job: _frontend_one(*job), jobs))
    else:
        _frontend_one(src, out)
    return 0


# --- labels ---------------------------------------------------------------

def label_paths(prefix) -> dict[str, Path]:
    return {name: Path(f"{prefix}.{name}.mat") for name in LABEL_SUFFIXES}


def cmd_labels(args) -> int:
    seq = _read_midi(args.midi)
    duration = seq.duration_s if args.duration is None else args.duration
    grid = FrameGrid.covering(duration)
    labels = make_labels(seq, grid)
    paths = label_paths(args.out_prefix)
    mat1.save(paths["frames"], labels.frames.values, mat1.DTYPE_U8)
    mat1.save(paths["onsets"], labels.onsets.values, mat1.DTYPE_U8)
    mat1.save(paths["weights"], labels.weights, mat1.DTYPE_F32)
    mat1.save(paths["velocities"], labels.velocities, mat1.DTYPE_F32)
    return 0


def read_label_set(prefix) -> LabelSet:
    paths = label_paths(prefix)
    mats = {name: _read_matrix(p) for name, p in paths.items()}
    shapes = {m.shape for m in mats.values()}
    if len(shapes) != 1:
        raise CliError(f"label matrices differ in shape: {sorted(shapes)}", EXIT_SHAPE)
    grid = FrameGrid(n_frames=mats["frames"].shape[0])
    try:
        return LabelSet(
            frames=BinaryRoll(grid, mats["frames"]),
            onsets=BinaryRoll(grid, mats["onsets"]),
            weights=mats["weights"].astype(np.float64),
            velocities=mats["velocities"].astype(np.float64),
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_SHAPE) from exc


# --- decode ---------------------------------------------------------------

def _conformal(named: dict[str, np.ndarray]) -> None:
    shapes = {name: m.shape for name, m in named.items()}
    if len(set(shapes.values())) != 1:
        raise CliError(f"shape mismatch: {shapes}", EXIT_SHAPE)
    shape = next(iter(shapes.values()))
    if shape[1] != N_PITCHES:
        raise CliError(f"expected {N_PITCHES} pitch columns, got {shape[1]}", EXIT_SHAPE)


def cmd_decode(args) -> int:
    onset = _read_matrix(args.onset).astype(np.float64)
    frame = _read_matrix(args.frame).astype(np.float64)
    velocity = _read_matrix(args.velocity).astype(np.float64)
    _conformal({"onset": onset, "frame": frame, "velocity": velocity})
    cfg = _build(DecoderConfig, args.config, {
        "onset_threshold": args.onset_threshold,
        "frame_threshold": args.frame_threshold,
    })
    if args.no_onset_gate:
        seq = decode_frames_only(frame, cfg)
    else:
        seq = decode(onset, frame, velocity, cfg)
    save_midi(seq, args.out)
    log.info("wrote %d notes to %s", len(seq), args.out)
    return 0


# --- loss -----------------------------------------------------------------

def cmd_loss(args) -> int:
    labels = read_label_set(args.labels)
    onset = _read_matrix(args.onset).astype(np.float64)
    frame = _read_matrix(args.frame).astype(np.float64)
    velocity = _read_matrix(args.velocity).astype(np.float64)
    _conformal({"labels": labels.weights, "onset": onset, "frame": frame, "velocity": velocity})
    breakdown = total_loss(labels, onset, frame, velocity)
    print(json.dumps(breakdown.to_dict(), indent=2))
    return 0


# --- eval -----------------------------------------------------------------

def _midi_files(root: Path) -> dict[str, Path]:
    return {
        str(p.relative_to(root).with_suffix("")): p
        for p in sorted(root.rglob("*")) if p.suffix.lower() in MIDI_EXTS
    }


def pair_files(ref: Path, est: Path) -> list[tuple[str, Path, Path]]:
    if ref.is_file() and est.is_file():
        return [(ref.stem, ref, est)]
    if ref.is_dir() != est.is_dir():
        raise CliError("reference and estimate must both be files or both directories")
    refs, ests = _midi_files(ref), _midi_files(est)
    for name in sorted(set(refs) ^ set(ests)):
        side = "reference" if name in refs else "estimate"
        log.warning("skipping unpaired %s file: %s", side, name)
    return [(name, refs[name], ests[name]) for name in sorted(set(refs) & set(ests))]


def cmd_eval(args) -> int:
    pairs = pair_files(_require(args.ref), _require(args.est))
    if not pairs:
        raise CliError("no reference/estimate pairs found", EXIT_NO_PAIRS)
    cfg = _build(MatchingConfig, args.config, {
        "onset_tolerance_s": args.onset_tolerance,
        "velocity_tau": args.velocity_tau,
    })

    def run(pair):
        name, ref_path, est_path = pair
        return evaluate_piece(_read_midi(ref_path), _read_midi(est_path), cfg=cfg, piece=name)

    with ThreadPoolExecutor(n_workers()) as pool:
        reports = list(pool.map(run, pairs))
    result = {
        "schema_version": 1,
        "pieces": [r.to_dict() for r in reports],
        "aggregate": aggregate(reports).to_dict(),
    }
    text = json.dumps(result, indent=2, sort_keys=False) + "\n"
    if args.json:
        Path(args.json).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# --- split ----------------------------------------------------------------

def cmd_split(args) -> int:
    wav = _require(args.wav)
    try:
        rate, data = read_wav(wav)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    seq = _read_midi(args.midi)
    splits = find_splits(AudioBuffer(to_float(data), rate), seq)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bounds = [0] + splits + [len(data)]
    segments = []
    for i, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        name = f"{wav.stem}_{i:03d}.wav"
        write_wav(out / name, rate, data[a:b])
        segments.append({"file": name, "start_sample": a, "end_sample": b,
                         "start_s": a / rate, "end_s": b / rate})
    manifest = {
        "source": wav.name,
        "sample_rate": rate,
        "split_samples": splits,
        "split_times_s": [k / rate for k in splits],
        "segments": segments,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


# --- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofk", description=__doc__)
    parser.add_argument("--config", help="TOML file with DecoderConfig/MatchingConfig keys")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("frontend", help="log-mel spectrogram of a WAV file (or directory)")
    p.add_argument("wav")
    p.add_argument("out")
    p.set_defaults(func=cmd_frontend)

    p = sub.add_parser("labels", help="frame/onset/weight/velocity targets from MIDI")
    p.add_argument("midi")
    p.add_argument("out_prefix")
    p.add_argument("--duration", type=float, help="piece length in seconds (default: from MIDI)")
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("decode", help="posteriorgrams to MIDI")
    p.add_argument("onset")
    p.add_argument("frame")
    p.add_argument("velocity")
    p.add_argument("out")
    p.add_argument("--onset-threshold", type=float)
    p.add_argument("--frame-threshold", type=float)
    p.add_argument("--no-onset-gate", action="store_true", help="segment frames without onset gating")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("loss", help="loss breakdown of posteriorgrams against labels")
    p.add_argument("labels", help="prefix given to `ofk labels`")
    p.add_argument("onset")
    p.add_argument("frame")
    p.add_argument("velocity")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="score estimated MIDI against references")
    p.add_argument("ref")
    p.add_argument("est")
    p.add_argument("--json", help="write the report here instead of stdout")
    p.add_argument("--onset-tolerance", type=float)
    p.add_argument("--velocity-tau", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="cut audio into ~20 s segments between notes")
    p.add_argument("wav")
    p.add_argument("midi")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_split)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.config = load_config(args.config) if args.config else {}
        return args.func(args)
    except CliError as exc:
        print(f"ofk: error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"ofk: error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, OSError) as exc:
        print(f"ofk: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
