"""Frame and note-level precision/recall/F1, including the velocity-aware
note metric, and per-piece aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import BinaryRoll, FrameGrid, NoteSequence
from .kernels import max_bipartite_matching
from .labels import make_frame_labels

FAMILIES = ("frame", "note", "note_with_offset", "note_with_offset_velocity")
SCHEMA_VERSION = 1

# absorbs representation error when a time difference equals a tolerance
_TIME_SLACK = 1e-9


@dataclass(frozen=True)
class MatchingConfig:
    onset_tolerance_s: float = 0.05
    offset_ratio: float = 0.2
    offset_min_tolerance_s: float = 0.05
    velocity_tau: float = 0.1
    require_offset: bool = False
    require_velocity: bool = False

    def __post_init__(self):
        if self.onset_tolerance_s <= 0:
            raise ValueError("onset_tolerance_s must be positive")
        if not 0 < self.offset_ratio < 1:
            raise ValueError("offset_ratio must lie in (0, 1)")
        if self.offset_min_tolerance_s < 0:
            raise ValueError("offset_min_tolerance_s must be non-negative")
        if self.velocity_tau <= 0:
            raise ValueError("velocity_tau must be positive")
        if self.require_velocity and not self.require_offset:
            raise ValueError("require_velocity needs require_offset")


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_counts(cls, tp: int, n_est: int, n_ref: int) -> "Scores":
        precision = tp / n_est if n_est else 1.0
        recall = tp / n_ref if n_ref else 1.0
        return cls(precision, recall, f1_score(precision, recall), tp, n_est - tp, n_ref - tp)

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1))

    def as_prf(self) -> dict:
        return {"p": self.precision, "r": self.recall, "f1": self.f1}

    def as_counts(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class EvalReport:
    frame: Scores
    note: Scores
    note_with_offset: Scores
    note_with_offset_velocity: Scores
    piece: str = ""
    n_pieces: int = field(default=1, compare=False)

    def family(self, name: str) -> Scores:
        return getattr(self, name)

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "piece": self.piece}
        for name in FAMILIES:
            out[name] = self.family(name).as_prf()
        out["counts"] = {name: self.family(name).as_counts() for name in FAMILIES}
        return out


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _roll_values(x) -> np.ndarray:
    return x.values if isinstance(x, BinaryRoll) else np.asarray(x)


def frame_metrics(ref, est) -> Scores:
    """Cell-wise scores of two piano rolls; the shorter roll is zero-padded."""
    r = _roll_values(ref) != 0
    e = _roll_values(est) != 0
    if r.ndim != 2 or e.ndim != 2 or r.shape[1] != e.shape[1]:
        raise ValueError(f"pitch dimension mismatch: {r.shape} vs {e.shape}")
    n = max(r.shape[0], e.shape[0])
    r = np.pad(r, ((0, n - r.shape[0]), (0, 0)))
    e = np.pad(e, ((0, n - e.shape[0]), (0, 0)))
    tp = int(np.count_nonzero(r & e))
    return Scores.from_counts(tp, int(np.count_nonzero(e)), int(np.count_nonzero(r)))


def candidate_edges(ref: NoteSequence, est: NoteSequence, cfg: MatchingConfig):
    """CSR adjacency (ref -> est) of note pairs meeting the timing criteria."""
    rp, ron, roff, _ = ref.as_arrays()
    ep, eon, eoff, _ = est.as_arrays()
    ok = (rp[:, None] == ep[None, :])
    ok &= np.abs(ron[:, None] - eon[None, :]) <= cfg.onset_tolerance_s + _TIME_SLACK
    if cfg.require_offset:
        tol = np.maximum(cfg.offset_min_tolerance_s, cfg.offset_ratio * (roff - ron))
        ok &= np.abs(roff[:, None] - eoff[None, :]) <= tol[:, None] + _TIME_SLACK
    indptr = np.concatenate(([0], np.cumsum(ok.sum(axis=1)))).astype(np.int64)
    indices = np.nonzero(ok)[1].astype(np.int64)
    return indptr, indices


def match_notes(ref: NoteSequence, est: NoteSequence,
                cfg: MatchingConfig = MatchingConfig()) -> list[tuple[int, int]]:
    """Maximum-cardinality one-to-one matching of reference to estimated notes."""
    if not len(ref) or not len(est):
        return []
    indptr, indices = candidate_edges(ref, est, cfg)
    match = max_bipartite_matching(len(ref), len(est), indptr, indices)
    return [(i, int(j)) for i, j in enumerate(match) if j >= 0]


def fit_velocity_scale(v_est, v_ref) -> tuple[float, float]:
    """Least-squares ``(m, b)`` minimizing ``sum (v_ref - (m v_est + b))^2``.

    A constant ``v_est`` has no unique slope; ``m = 0`` and ``b`` the mean of
    ``v_ref`` is used then.
    """
    x = np.asarray(v_est, dtype=np.float64)
    y = np.asarray(v_ref, dtype=np.float64)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    var = np.mean(dx * dx)
    if var < 1e-12:
        return 0.0, float(ym)
    m = float(np.mean(dx * (y - ym)) / var)
    return m, float(ym - m * xm)


def velocity_keep_mask(v_ref, v_est, tau: float = 0.1) -> np.ndarray:
    """Which pairs survive after rescaling ``v_est`` onto ``v_ref``.

    ``v_ref`` should already be in [0, 1]; a pair is kept when the rescaled
    estimate lies strictly closer than ``tau``.
    """
    v_ref = np.asarray(v_ref, dtype=np.float64)
    v_est = np.asarray(v_est, dtype=np.float64)
    if v_ref.size == 0:
        return np.zeros(0, dtype=bool)
    m, b = fit_velocity_scale(v_est, v_ref)
    return np.abs(m * v_est + b - v_ref) < tau


def velocity_filter(ref: NoteSequence, est: NoteSequence, matches, tau: float = 0.1):
    """Drop matches whose velocities disagree after a global affine fit.

    Reference velocities are divided by the largest velocity in ``ref``;
    estimated velocities are used on their raw MIDI scale.
    """
    matches = list(matches)
    if not matches:
        return []
    vmax = max(n.velocity for n in ref.notes)
    v_ref = [ref[i].velocity / vmax for i, _ in matches]
    v_est = [est[j].velocity for _, j in matches]
    keep = velocity_keep_mask(v_ref, v_est, tau)
    return [m for m, k in zip(matches, keep) if k]


def note_scores(ref: NoteSequence, est: NoteSequence, cfg: MatchingConfig = MatchingConfig()) -> Scores:
    matches = match_notes(ref, est, cfg)
    if cfg.require_velocity:
        matches = velocity_filter(ref, est, matches, cfg.velocity_tau)
    return Scores.from_counts(len(matches), len(est), len(ref))


def evaluate_piece(ref: NoteSequence, est: NoteSequence, grid: FrameGrid | None = None,
                   cfg: MatchingConfig = MatchingConfig(), piece: str = "") -> EvalReport:
    """All four score families for one piece.

    Frame scores compare both sequences rasterized on ``grid`` (by default
    the 32 ms grid covering the longer sequence).
    """
    if grid is None:
        grid = FrameGrid.covering(max(ref.duration_s, est.duration_s))
    onset_only = replace(cfg, require_offset=False, require_velocity=False)
    with_offset = replace(cfg, require_offset=True, require_velocity=False)
    frame = frame_metrics(make_frame_labels(ref, grid), make_frame_labels(est, grid))

    offset_matches = match_notes(ref, est, with_offset)
    velocity_matches = velocity_filter(ref, est, offset_matches, cfg.velocity_tau)
    n_est, n_ref = len(est), len(ref)
    return EvalReport(
        frame=frame,
        note=note_scores(ref, est, onset_only),
        note_with_offset=Scores.from_counts(len(offset_matches), n_est, n_ref),
        note_with_offset_velocity=Scores.from_counts(len(velocity_matches), n_est, n_ref),
        piece=piece,
    )


def aggregate(reports, piece: str = "mean") -> EvalReport:
    """Mean of per-piece precision/recall/F1; counts are summed."""
    reports = list(reports)
    if not reports:
        raise ValueError("cannot aggregate an empty list of reports")
    fams = {}
    for name in FAMILIES:
        scores = [r.family(name) for r in reports]
        fams[name] = Scores(
            precision=float(np.mean([s.precision for s in scores])),
            recall=float(np.mean([s.recall for s in scores])),
            f1=float(np.mean([s.f1 for s in scores])),
            tp=sum(s.tp for s in scores),
            fp=sum(s.fp for s in scores),
            fn=sum(s.fn for s in scores),
        )
    return EvalReport(piece=piece, n_pieces=len(reports), **fams)
