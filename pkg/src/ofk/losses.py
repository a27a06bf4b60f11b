"""Onset, weighted-frame and velocity losses with analytic gradients.

All losses are per-example sums over (frame, pitch) cells.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import as_matrix, check_same_shape

EPS = 1e-7


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    onset: float
    frame: float
    velocity: float

    def to_dict(self) -> dict:
        return asdict(self)


def _clamp(p):
    return np.clip(p, EPS, 1.0 - EPS)


def cross_entropy(y, p):
    """Binary cross entropy ``-(y ln p + (1 - y) ln(1 - p))``, elementwise."""
    y = np.asarray(y, dtype=np.float64)
    p = _clamp(np.asarray(p, dtype=np.float64))
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def cross_entropy_grad(y, p):
    """d CE / d p; zero where the clamp is active."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    pc = _clamp(p)
    g = -y / pc + (1.0 - y) / (1.0 - pc)
    return np.where((p >= EPS) & (p <= 1.0 - EPS), g, 0.0)


def _pair(labels, probs, names):
    y = as_matrix(labels, names[0])
    p = as_matrix(probs, names[1])
    check_same_shape(y, p, names=names)
    return y, p


def onset_loss(onset_labels, onset_probs) -> float:
    y, p = _pair(onset_labels, onset_probs, ("onset labels", "onset probabilities"))
    return float(np.sum(cross_entropy(y, p)))


def onset_loss_grad(onset_labels, onset_probs) -> np.ndarray:
    y, p = _pair(onset_labels, onset_probs, ("onset labels", "onset probabilities"))
    return cross_entropy_grad(y, p)


def frame_loss(frame_labels, frame_probs) -> float:
    """Unweighted frame cross entropy."""
    y, p = _pair(frame_labels, frame_probs, ("frame labels", "frame probabilities"))
    return float(np.sum(cross_entropy(y, p)))


def weighted_frame_loss(frame_labels, frame_probs, weights) -> float:
    y, p = _pair(frame_labels, frame_probs, ("frame labels", "frame probabilities"))
    w = as_matrix(weights, "weights")
    check_same_shape(y, w, names=("frame labels", "weights"))
    return float(np.sum(w * cross_entropy(y, p)))


def weighted_frame_loss_grad(frame_labels, frame_probs, weights) -> np.ndarray:
    y, p = _pair(frame_labels, frame_probs, ("frame labels", "frame probabilities"))
    w = as_matrix(weights, "weights")
    check_same_shape(y, w, names=("frame labels", "weights"))
    return w * cross_entropy_grad(y, p)


def _velocity_inputs(onset_labels, v_label, v_pred):
    mask = as_matrix(onset_labels, "onset labels")
    target = as_matrix(v_label, "velocity labels")
    pred = as_matrix(v_pred, "velocity predictions")
    check_same_shape(mask, target, pred, names=("onset labels", "velocity labels", "velocity predictions"))
    return mask, target, pred


def velocity_loss(onset_labels, v_label, v_pred) -> float:
    """Squared velocity error counted only on onset cells."""
    mask, target, pred = _velocity_inputs(onset_labels, v_label, v_pred)
    diff = np.where(mask != 0, target - pred, 0.0)
    return float(np.sum(diff * diff))


def velocity_loss_grad(onset_labels, v_label, v_pred) -> np.ndarray:
    mask, target, pred = _velocity_inputs(onset_labels, v_label, v_pred)
    return np.where(mask != 0, 2.0 * (pred - target), 0.0)


def total_loss(labels, onset_probs, frame_probs, v_pred) -> LossBreakdown:
    """Combined objective; the velocity term is reported but not summed in."""
    onset = onset_loss(labels.onsets, onset_probs)
    frame = weighted_frame_loss(labels.frames, frame_probs, labels.weights)
    velocity = velocity_loss(labels.onsets, labels.velocities, v_pred)
    return LossBreakdown(total=onset + frame, onset=onset, frame=frame, velocity=velocity)
