"""Affinity features and pattern fusion for association.

The association step scores candidate pairs between tracked targets and new
detections. Each pair is described by four features: normalized center
distance, box IoU, embedding cosine similarity, and the target's last match
stage encoded as 0 (stage one) or 1 (stage two).

For training, detections of a frame are first matched against that frame's
tracking patterns (the per-target records an online tracker would hold) and
fused: a matched detection is advanced by the pattern's motion offset and
keeps its own embedding; an unmatched pattern contributes its propagated box
and cached embedding; unmatched detections are dropped, mirroring how a
tracker's score gate and confidence filter hide them at inference time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# geometry


def _box_array(box) -> np.ndarray:
    if hasattr(box, "as_tuple"):
        box = box.as_tuple()
    return np.asarray(box, dtype=np.float64)


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    return float(iou_matrix(_box_array(a)[None, :], _box_array(b)[None, :])[0, 0])


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between box rows of a (n, 4) and b (m, 4)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ax1, ay1 = a[:, 0], a[:, 1]
    ax2, ay2 = a[:, 0] + np.maximum(a[:, 2], 0.0), a[:, 1] + np.maximum(a[:, 3], 0.0)
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = b[:, 0] + np.maximum(b[:, 2], 0.0), b[:, 1] + np.maximum(b[:, 3], 0.0)
    ix = np.clip(
        np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(ax1[:, None], bx1[None, :]),
        0.0,
        None,
    )
    iy = np.clip(
        np.minimum(ay2[:, None], by2[None, :]) - np.maximum(ay1[:, None], by1[None, :]),
        0.0,
        None,
    )
    inter = ix * iy
    area_a = np.maximum(ax2 - ax1, 0.0) * np.maximum(ay2 - ay1, 0.0)
    area_b = np.maximum(bx2 - bx1, 0.0) * np.maximum(by2 - by1, 0.0)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def normalized_distance(a, b, width: float, height: float) -> float:
    """Center distance with each axis normalized by the image size.

    Ranges over [0, sqrt(2)] for boxes whose centers stay inside the image.
    """
    return float(
        normalized_distance_matrix(
            _box_array(a)[None, :], _box_array(b)[None, :], width, height
        )[0, 0]
    )


def normalized_distance_matrix(
    a: np.ndarray, b: np.ndarray, width: float, height: float
) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    acx = (a[:, 0] + a[:, 2] / 2.0) / float(width)
    acy = (a[:, 1] + a[:, 3] / 2.0) / float(height)
    bcx = (b[:, 0] + b[:, 2] / 2.0) / float(width)
    bcy = (b[:, 1] + b[:, 3] / 2.0) / float(height)
    dx = acx[:, None] - bcx[None, :]
    dy = acy[:, None] - bcy[None, :]
    return np.sqrt(dx * dx + dy * dy)


# ---------------------------------------------------------------------------
# patterns


@dataclass
class PatternSlice:
    """Per-frame tracking records for a set of live targets, as arrays.

    `motion` is the offset from the last associated box to the box the
    target's motion model predicts for the next processed frame, so
    ``boxes + motion`` is where each target is expected to appear next.
    """

    boxes: np.ndarray                 # (m, 4) last associated box
    motion: np.ndarray                # (m, 4) offset to the predicted box
    embeddings: np.ndarray            # (m, d) cached appearance
    levels: np.ndarray                # (m,) 1 or 2, stage of last match
    trajectory_ids: np.ndarray        # (m,)
    oracle_ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.oracle_ids is None:
            self.oracle_ids = np.full(self.boxes.shape[0], -1, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.boxes.shape[0])

    @property
    def predicted_boxes(self) -> np.ndarray:
        return self.boxes + self.motion

    @classmethod
    def empty(cls, d_embed: int) -> "PatternSlice":
        return cls(
            boxes=np.zeros((0, 4)),
            motion=np.zeros((0, 4)),
            embeddings=np.zeros((0, d_embed)),
            levels=np.zeros(0, dtype=np.int64),
            trajectory_ids=np.zeros(0, dtype=np.int64),
            oracle_ids=np.zeros(0, dtype=np.int64),
        )


@dataclass(frozen=True)
class TrackingPattern:
    """Single-target view of a pattern row (convenience for inspection)."""

    box: tuple[float, float, float, float]
    motion: tuple[float, float, float, float]
    embedding: np.ndarray
    level: int
    frame: int
    k: int
    trajectory_id: int
    oracle_id: int = -1


def patterns_of(slice_: PatternSlice, frame: int, k: int) -> list[TrackingPattern]:
    return [
        TrackingPattern(
            box=tuple(slice_.boxes[i]),
            motion=tuple(slice_.motion[i]),
            embedding=slice_.embeddings[i],
            level=int(slice_.levels[i]),
            frame=frame,
            k=k,
            trajectory_id=int(slice_.trajectory_ids[i]),
            oracle_id=int(slice_.oracle_ids[i]),
        )
        for i in range(len(slice_))
    ]


# ---------------------------------------------------------------------------
# fusion


@dataclass
class FusedSet:
    """Training-side stand-in for "the targets a tracker would carry".

    Rows come either from a detection matched to a pattern (box advanced by
    the pattern's motion, detection's own embedding) or from an unmatched
    pattern (propagated box, cached embedding).
    """

    boxes: np.ndarray         # (m, 4) propagated to the next frame
    embeddings: np.ndarray    # (m, d)
    levels: np.ndarray        # (m,)
    oracle_ids: np.ndarray    # (m,) -1 marks an unknown/false identity
    from_detection: np.ndarray  # (m,) bool

    def __len__(self) -> int:
        return int(self.boxes.shape[0])


def match_and_fuse(
    det_boxes: np.ndarray,
    det_embeddings: np.ndarray,
    det_oracle_ids: np.ndarray,
    patterns: PatternSlice,
    iou_threshold: float = 0.7,
) -> FusedSet:
    """Match detections to same-frame patterns by IoU and fuse the two sets.

    A detection matches its highest-IoU pattern when that IoU exceeds the
    threshold and the pattern is still free; ties are claimed in descending
    IoU order so the pairing is one-to-one. Unmatched detections are
    discarded; unmatched patterns survive with their cached appearance.
    """
    det_boxes = np.asarray(det_boxes, dtype=np.float64).reshape(-1, 4)
    n_det = det_boxes.shape[0]
    m_pat = len(patterns)
    det_embeddings = np.asarray(det_embeddings, dtype=np.float64)
    if det_embeddings.ndim == 2:
        d = det_embeddings.shape[1]
    else:
        d = patterns.embeddings.shape[1]
    det_embeddings = det_embeddings.reshape(n_det, d)
    det_oracle_ids = np.asarray(det_oracle_ids, dtype=np.int64).reshape(n_det)

    matched_det: list[int] = []
    matched_pat: list[int] = []
    if n_det and m_pat:
        overlap = iou_matrix(det_boxes, patterns.boxes)
        best_pat = overlap.argmax(axis=1)
        best_iou = overlap[np.arange(n_det), best_pat]
        order = np.argsort(-best_iou, kind="stable")
        claimed = np.zeros(m_pat, dtype=bool)
        for det_idx in order:
            if best_iou[det_idx] <= iou_threshold:
                break
            pat_idx = int(best_pat[det_idx])
            if claimed[pat_idx]:
                continue
            claimed[pat_idx] = True
            matched_det.append(int(det_idx))
            matched_pat.append(pat_idx)

    matched_det_arr = np.asarray(matched_det, dtype=np.int64)
    matched_pat_arr = np.asarray(matched_pat, dtype=np.int64)
    free_pat = np.setdiff1d(np.arange(m_pat), matched_pat_arr, assume_unique=False)

    n_fused = matched_det_arr.size + free_pat.size
    boxes = np.empty((n_fused, 4), dtype=np.float64)
    embeds = np.empty((n_fused, d), dtype=np.float64)
    levels = np.empty(n_fused, dtype=np.int64)
    oracle = np.empty(n_fused, dtype=np.int64)
    from_det = np.zeros(n_fused, dtype=bool)

    m = matched_det_arr.size
    if m:
        boxes[:m] = det_boxes[matched_det_arr] + patterns.motion[matched_pat_arr]
        embeds[:m] = det_embeddings[matched_det_arr]
        levels[:m] = patterns.levels[matched_pat_arr]
        oracle[:m] = det_oracle_ids[matched_det_arr]
        from_det[:m] = True
    if free_pat.size:
        boxes[m:] = patterns.predicted_boxes[free_pat]
        embeds[m:] = patterns.embeddings[free_pat]
        levels[m:] = patterns.levels[free_pat]
        oracle[m:] = patterns.oracle_ids[free_pat]
    return FusedSet(
        boxes=boxes,
        embeddings=embeds,
        levels=levels,
        oracle_ids=oracle,
        from_detection=from_det,
    )


# ---------------------------------------------------------------------------
# affinity features


def _pair_features(
    src_boxes: np.ndarray,
    src_embeds: np.ndarray,
    src_levels: np.ndarray,
    det_boxes: np.ndarray,
    det_embeds: np.ndarray,
    width: float,
    height: float,
) -> np.ndarray:
    m = src_boxes.shape[0]
    n = det_boxes.shape[0]
    feats = np.empty((m, n, 4), dtype=np.float64)
    feats[:, :, 0] = normalized_distance_matrix(src_boxes, det_boxes, width, height)
    feats[:, :, 1] = iou_matrix(src_boxes, det_boxes)
    feats[:, :, 2] = src_embeds @ det_embeds.T
    feats[:, :, 3] = (src_levels.astype(np.float64) - 1.0)[:, None]
    return feats


def affinity_train(
    fused: FusedSet,
    det_boxes: np.ndarray,
    det_embeddings: np.ndarray,
    det_oracle_ids: np.ndarray,
    width: float,
    height: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Features, labels and a validity mask for fused-set x detection pairs.

    Labels are 1 for identical true identities, 0 when they differ or when
    exactly one side is false; pairs where both sides are false carry no
    signal and are masked out.
    """
    det_boxes = np.asarray(det_boxes, dtype=np.float64).reshape(-1, 4)
    n = det_boxes.shape[0]
    det_embeddings = np.asarray(det_embeddings, dtype=np.float64).reshape(
        n, fused.embeddings.shape[1]
    )
    det_oracle_ids = np.asarray(det_oracle_ids, dtype=np.int64).reshape(n)

    feats = _pair_features(
        fused.boxes, fused.embeddings, fused.levels, det_boxes, det_embeddings, width, height
    )
    src = fused.oracle_ids[:, None]
    dst = det_oracle_ids[None, :]
    labels = ((src >= 0) & (src == dst)).astype(np.float64)
    mask = ~((src < 0) & (dst < 0))
    return feats, labels, mask


def affinity_infer(
    patterns: PatternSlice,
    det_boxes: np.ndarray,
    det_embeddings: np.ndarray,
    width: float,
    height: float,
) -> np.ndarray:
    """Features for live-target x detection pairs at inference time."""
    det_boxes = np.asarray(det_boxes, dtype=np.float64).reshape(-1, 4)
    det_embeddings = np.asarray(det_embeddings, dtype=np.float64)
    if det_embeddings.ndim != 2:
        d = patterns.embeddings.shape[1]
        det_embeddings = det_embeddings.reshape(det_boxes.shape[0], d)
    return _pair_features(
        patterns.predicted_boxes,
        patterns.embeddings,
        patterns.levels,
        det_boxes,
        det_embeddings,
        width,
        height,
    )
