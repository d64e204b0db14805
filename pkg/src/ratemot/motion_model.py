"""Constant-velocity Kalman filtering for box trajectories.

State is the 8-vector (cx, cy, a, h, vcx, vcy, va, vh) where ``a`` is the
width/height aspect ratio. One filter step corresponds to one frame of the
video being tracked, whatever its frame rate. Noise scales are proportional
to the box height, the usual convention for pedestrian-scale tracking.

Batched helpers operate on stacked means (n, 8) and covariances (n, 8, 8) so
a tracker can advance every live trajectory with a few array ops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_POS_WEIGHT = 1.0 / 20.0
_VEL_WEIGHT = 1.0 / 160.0
_MIN_SIZE = 1e-6

_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.eye(4, 8)


@dataclass
class KalmanState:
    mean: np.ndarray  # (8,)
    cov: np.ndarray   # (8, 8)


def _to_xyah(box: np.ndarray) -> np.ndarray:
    box = np.asarray(box, dtype=np.float64)
    out = np.empty(box.shape, dtype=np.float64)
    out[..., 0] = box[..., 0] + box[..., 2] / 2.0
    out[..., 1] = box[..., 1] + box[..., 3] / 2.0
    out[..., 2] = box[..., 2] / np.maximum(box[..., 3], _MIN_SIZE)
    out[..., 3] = box[..., 3]
    return out


def _to_xywh(xyah: np.ndarray) -> np.ndarray:
    xyah = np.asarray(xyah, dtype=np.float64)
    out = np.empty(xyah.shape, dtype=np.float64)
    w = xyah[..., 2] * xyah[..., 3]
    out[..., 0] = xyah[..., 0] - w / 2.0
    out[..., 1] = xyah[..., 1] - xyah[..., 3] / 2.0
    out[..., 2] = w
    out[..., 3] = xyah[..., 3]
    return out


def state_box(mean: np.ndarray) -> np.ndarray:
    """Convert state mean(s) to (x, y, w, h) box form."""
    return _to_xywh(np.asarray(mean, dtype=np.float64)[..., :4])


def batch_init(boxes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Initialize stacked states from measured boxes (n, 4)."""
    boxes = np.atleast_2d(np.asarray(boxes, dtype=np.float64))
    n = boxes.shape[0]
    means = np.zeros((n, 8), dtype=np.float64)
    means[:, :4] = _to_xyah(boxes)
    h = means[:, 3]
    std = np.empty((n, 8), dtype=np.float64)
    std[:, 0] = std[:, 1] = std[:, 3] = 2.0 * _POS_WEIGHT * h
    std[:, 2] = 1e-2
    std[:, 4] = std[:, 5] = std[:, 7] = 10.0 * _VEL_WEIGHT * h
    std[:, 6] = 1e-5
    covs = np.zeros((n, 8, 8), dtype=np.float64)
    idx = np.arange(8)
    covs[:, idx, idx] = std**2
    return means, covs


def predict_means(means: np.ndarray) -> np.ndarray:
    """Mean-only one-frame prediction (no covariance propagation)."""
    return means @ _F.T


def batch_predict(
    means: np.ndarray, covs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Advance stacked states one frame; returns new (means, covs)."""
    h = means[:, 3]
    std = np.empty_like(means)
    std[:, 0] = std[:, 1] = std[:, 3] = _POS_WEIGHT * h
    std[:, 2] = 1e-2
    std[:, 4] = std[:, 5] = std[:, 7] = _VEL_WEIGHT * h
    std[:, 6] = 1e-5
    new_means = means @ _F.T
    new_covs = np.einsum("ij,njk,lk->nil", _F, covs, _F)
    idx = np.arange(8)
    new_covs[:, idx, idx] += std**2
    new_covs = (new_covs + np.swapaxes(new_covs, 1, 2)) / 2.0
    return new_means, new_covs


def batch_update(
    means: np.ndarray, covs: np.ndarray, boxes: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Condition stacked states on measured boxes (n, 4)."""
    boxes = np.atleast_2d(np.asarray(boxes, dtype=np.float64))
    z = _to_xyah(boxes)
    h = means[:, 3]
    std = np.empty((means.shape[0], 4), dtype=np.float64)
    std[:, 0] = std[:, 1] = std[:, 3] = _POS_WEIGHT * h
    std[:, 2] = 1e-1
    r = std**2

    p_ht = covs[:, :, :4]                      # P H^T, since H selects dims 0..3
    s = covs[:, :4, :4].copy()                 # H P H^T + R
    idx = np.arange(4)
    s[:, idx, idx] += r
    gain = np.linalg.solve(np.swapaxes(s, 1, 2), np.swapaxes(p_ht, 1, 2))
    gain = np.swapaxes(gain, 1, 2)             # (n, 8, 4)
    innovation = z - means[:, :4]
    new_means = means + np.einsum("nij,nj->ni", gain, innovation)
    new_covs = covs - np.einsum("nij,njk->nik", gain, covs[:, :4, :])
    new_covs = (new_covs + np.swapaxes(new_covs, 1, 2)) / 2.0
    new_means[:, 3] = np.maximum(new_means[:, 3], _MIN_SIZE)
    new_means[:, 2] = np.maximum(new_means[:, 2], _MIN_SIZE)
    return new_means, new_covs


def kf_init(box) -> KalmanState:
    """Create a state from a first measurement; velocities start at zero."""
    if hasattr(box, "as_tuple"):
        box = box.as_tuple()
    means, covs = batch_init(np.asarray(box, dtype=np.float64)[None, :])
    return KalmanState(means[0], covs[0])


def kf_predict(state: KalmanState) -> tuple[KalmanState, np.ndarray]:
    """Advance one frame; returns the new state and the box-space offset.

    The offset is (dx, dy, dw, dh): the predicted box minus the box implied
    by the state before prediction. A zero-velocity state has a zero offset.
    """
    before = state_box(state.mean)
    means, covs = batch_predict(state.mean[None, :], state.cov[None, :, :])
    after = state_box(means[0])
    return KalmanState(means[0], covs[0]), after - before


def kf_update(state: KalmanState, box) -> KalmanState:
    """Condition the state on a measured box."""
    if hasattr(box, "as_tuple"):
        box = box.as_tuple()
    means, covs = batch_update(
        state.mean[None, :], state.cov[None, :, :], np.asarray(box, dtype=np.float64)[None, :]
    )
    return KalmanState(means[0], covs[0])
