"""Tracking metrics and their frame-rate-agnostic aggregation.

Per-video accumulators for the three standard metric families:

* CLEAR: per-frame matching with a continuity preference, counting false
  positives, misses and identity switches; MOTA = 1 - errors / gt.
* IDF1: a single trajectory-level bipartite matching maximizing the frames
  on which a ground-truth/prediction pair overlaps.
* HOTA: per-frame matching swept over an IoU threshold grid; the detection
  and association terms are combined per threshold and averaged.

Counts pool across videos by summation, so a metric "at sampling factor k"
is computed over all decomposed videos of all sequences at that factor. The
aggregate layer averages the pooled per-factor scores and reports the
largest relative drop across factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import iou_matrix, normalized_distance_matrix
from .framerate_sim import ResampledSequence, resample
from .mot_io import Sequence, TrackResult

HOTA_ALPHAS = np.round(np.arange(0.05, 0.951, 0.05), 2)


# ---------------------------------------------------------------------------
# array plumbing


class FrameIndex:
    """Per-frame views over flat (frames, ids, boxes) arrays."""

    def __init__(self, frames: np.ndarray, ids: np.ndarray, boxes: np.ndarray):
        frames = np.asarray(frames, dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
        order = np.lexsort((ids, frames))
        self.frames = frames[order]
        self.ids = ids[order]
        self.boxes = boxes[order]
        self.unique_frames, self._starts = np.unique(self.frames, return_index=True)
        self._ends = np.append(self._starts[1:], self.frames.size)
        self._lookup = {int(f): i for i, f in enumerate(self.unique_frames)}

    def get(self, frame: int) -> tuple[np.ndarray, np.ndarray]:
        slot = self._lookup.get(int(frame))
        if slot is None:
            return (
                np.empty(0, dtype=np.int64),
                np.empty((0, 4), dtype=np.float64),
            )
        lo, hi = self._starts[slot], self._ends[slot]
        return self.ids[lo:hi], self.boxes[lo:hi]


def result_arrays(result: TrackResult) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(result.rows)
    frames = np.empty(n, dtype=np.int64)
    ids = np.empty(n, dtype=np.int64)
    boxes = np.empty((n, 4), dtype=np.float64)
    for i, (frame, identity, box, _conf) in enumerate(result.rows):
        frames[i] = frame
        ids[i] = identity
        boxes[i] = box.as_tuple()
    return frames, ids, boxes


def video_gt_index(video: ResampledSequence) -> FrameIndex:
    return FrameIndex(video.gt_frames, video.gt_ids, video.gt_boxes)


def _max_overlap_matching(overlap: np.ndarray, allowed: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-cardinality matching over allowed pairs, then maximum overlap."""
    if not allowed.any():
        return []
    row_load = allowed.sum(axis=1)
    col_load = allowed.sum(axis=0)
    if row_load.max(initial=0) <= 1 and col_load.max(initial=0) <= 1:
        rows, cols = np.nonzero(allowed)
        return list(zip(rows.tolist(), cols.tolist()))
    big = 4.0 * max(overlap.shape)
    costs = np.where(allowed, -overlap, big)
    rows, cols = linear_sum_assignment(costs)
    return [
        (int(r), int(c)) for r, c in zip(rows, cols) if allowed[r, c]
    ]


# ---------------------------------------------------------------------------
# CLEAR


@dataclass
class ClearCounts:
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    num_gt: int = 0

    def merge(self, other: "ClearCounts") -> None:
        self.fp += other.fp
        self.fn += other.fn
        self.idsw += other.idsw
        self.num_gt += other.num_gt

    @property
    def mota(self) -> float:
        if self.num_gt == 0:
            raise ValueError("MOTA undefined: no ground-truth boxes")
        return 1.0 - (self.fp + self.fn + self.idsw) / self.num_gt


def clear_mot(gt: FrameIndex, pred: FrameIndex, iou_threshold: float = 0.5) -> ClearCounts:
    """CLEAR counts with previous-frame continuity.

    Matches from the previous frame are kept while they still overlap; the
    rest are matched to maximize overlap. An identity switch is counted when
    a ground-truth object's matched prediction differs from the last
    prediction it was ever matched to.
    """
    counts = ClearCounts()
    prev_pairs: dict[int, int] = {}
    last_pred: dict[int, int] = {}
    all_frames = np.union1d(gt.unique_frames, pred.unique_frames)
    for frame in all_frames:
        gt_ids, gt_boxes = gt.get(int(frame))
        pr_ids, pr_boxes = pred.get(int(frame))
        counts.num_gt += gt_ids.size
        if gt_ids.size == 0 or pr_ids.size == 0:
            counts.fp += pr_ids.size
            counts.fn += gt_ids.size
            prev_pairs = {}
            continue
        overlap = iou_matrix(gt_boxes, pr_boxes)

        pr_slot = {int(p): i for i, p in enumerate(pr_ids)}
        matched_rows: list[int] = []
        matched_cols: list[int] = []
        for row, g in enumerate(gt_ids):
            p = prev_pairs.get(int(g))
            if p is None:
                continue
            col = pr_slot.get(p)
            if col is not None and overlap[row, col] >= iou_threshold:
                matched_rows.append(row)
                matched_cols.append(col)

        free_rows = np.setdiff1d(np.arange(gt_ids.size), matched_rows)
        free_cols = np.setdiff1d(np.arange(pr_ids.size), matched_cols)
        if free_rows.size and free_cols.size:
            sub = overlap[np.ix_(free_rows, free_cols)]
            pairs = _max_overlap_matching(sub, sub >= iou_threshold)
            for r, c in pairs:
                matched_rows.append(int(free_rows[r]))
                matched_cols.append(int(free_cols[c]))

        n_match = len(matched_rows)
        counts.fp += pr_ids.size - n_match
        counts.fn += gt_ids.size - n_match
        prev_pairs = {}
        for row, col in zip(matched_rows, matched_cols):
            g = int(gt_ids[row])
            p = int(pr_ids[col])
            if g in last_pred and last_pred[g] != p:
                counts.idsw += 1
            last_pred[g] = p
            prev_pairs[g] = p
    return counts


# ---------------------------------------------------------------------------
# IDF1


@dataclass
class Idf1Counts:
    idtp: int = 0
    num_gt: int = 0
    num_pred: int = 0

    def merge(self, other: "Idf1Counts") -> None:
        self.idtp += other.idtp
        self.num_gt += other.num_gt
        self.num_pred += other.num_pred

    @property
    def idf1(self) -> float:
        total = self.num_gt + self.num_pred
        if total == 0:
            return 1.0
        return 2.0 * self.idtp / total


def idf1(gt: FrameIndex, pred: FrameIndex, iou_threshold: float = 0.5) -> Idf1Counts:
    """Trajectory-level identity matching: one global assignment per video."""
    counts = Idf1Counts(num_gt=int(gt.frames.size), num_pred=int(pred.frames.size))
    gids = np.unique(gt.ids)
    pids = np.unique(pred.ids)
    if gids.size == 0 or pids.size == 0:
        return counts
    overlap_frames = np.intersect1d(gt.unique_frames, pred.unique_frames)
    pair_count = np.zeros((gids.size, pids.size), dtype=np.int64)
    for frame in overlap_frames:
        gt_ids, gt_boxes = gt.get(int(frame))
        pr_ids, pr_boxes = pred.get(int(frame))
        hits = iou_matrix(gt_boxes, pr_boxes) >= iou_threshold
        if not hits.any():
            continue
        rows, cols = np.nonzero(hits)
        g_idx = np.searchsorted(gids, gt_ids[rows])
        p_idx = np.searchsorted(pids, pr_ids[cols])
        np.add.at(pair_count, (g_idx, p_idx), 1)
    rows, cols = linear_sum_assignment(-pair_count.astype(np.float64))
    counts.idtp = int(pair_count[rows, cols].sum())
    return counts


# ---------------------------------------------------------------------------
# HOTA


@dataclass
class HotaCounts:
    alphas: np.ndarray = field(default_factory=lambda: HOTA_ALPHAS.copy())
    tp: np.ndarray = field(default=None)     # type: ignore[assignment]
    fp: np.ndarray = field(default=None)     # type: ignore[assignment]
    fn: np.ndarray = field(default=None)     # type: ignore[assignment]
    assoc: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        n = self.alphas.size
        if self.tp is None:
            self.tp = np.zeros(n)
        if self.fp is None:
            self.fp = np.zeros(n)
        if self.fn is None:
            self.fn = np.zeros(n)
        if self.assoc is None:
            self.assoc = np.zeros(n)

    def merge(self, other: "HotaCounts") -> None:
        if not np.array_equal(self.alphas, other.alphas):
            raise ValueError("cannot merge HOTA counts over different grids")
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.assoc += other.assoc

    def det_a(self) -> np.ndarray:
        denom = self.tp + self.fp + self.fn
        out = np.ones_like(self.tp)
        np.divide(self.tp, denom, out=out, where=denom > 0)
        return out

    def ass_a(self) -> np.ndarray:
        out = np.ones_like(self.tp)
        empty = (self.tp + self.fp + self.fn) == 0
        np.divide(self.assoc, self.tp, out=out, where=self.tp > 0)
        out[(self.tp == 0) & ~empty] = 0.0
        return out

    @property
    def hota(self) -> float:
        return float(np.sqrt(self.det_a() * self.ass_a()).mean())


def hota(gt: FrameIndex, pred: FrameIndex, alphas: np.ndarray | None = None) -> HotaCounts:
    """Sweep the IoU threshold grid, matching each frame independently."""
    if alphas is None:
        alphas = HOTA_ALPHAS
    counts = HotaCounts(alphas=np.asarray(alphas, dtype=np.float64))
    n_alpha = counts.alphas.size

    gids = np.unique(gt.ids)
    pids = np.unique(pred.ids)
    gt_total = np.zeros(gids.size, dtype=np.int64)
    np.add.at(gt_total, np.searchsorted(gids, gt.ids), 1)
    pred_total = np.zeros(pids.size, dtype=np.int64)
    np.add.at(pred_total, np.searchsorted(pids, pred.ids), 1)

    pair_counts: list[dict[tuple[int, int], int]] = [dict() for _ in range(n_alpha)]
    all_frames = np.union1d(gt.unique_frames, pred.unique_frames)
    for frame in all_frames:
        gt_ids, gt_boxes = gt.get(int(frame))
        pr_ids, pr_boxes = pred.get(int(frame))
        counts.fn += gt_ids.size
        counts.fp += pr_ids.size
        if gt_ids.size == 0 or pr_ids.size == 0:
            continue
        overlap = iou_matrix(gt_boxes, pr_boxes)
        prev_allowed: np.ndarray | None = None
        pairs: list[tuple[int, int]] = []
        for a_idx in range(n_alpha):
            allowed = overlap >= counts.alphas[a_idx]
            if prev_allowed is None or not np.array_equal(allowed, prev_allowed):
                pairs = _max_overlap_matching(overlap, allowed)
                prev_allowed = allowed
            if not pairs:
                continue
            counts.tp[a_idx] += len(pairs)
            counts.fp[a_idx] -= len(pairs)
            counts.fn[a_idx] -= len(pairs)
            bucket = pair_counts[a_idx]
            for r, c in pairs:
                key = (int(gt_ids[r]), int(pr_ids[c]))
                bucket[key] = bucket.get(key, 0) + 1

    for a_idx in range(n_alpha):
        total = 0.0
        for (g, p), cnt in pair_counts[a_idx].items():
            g_total = gt_total[np.searchsorted(gids, g)]
            p_total = pred_total[np.searchsorted(pids, p)]
            total += cnt * (cnt / (g_total + p_total - cnt))
        counts.assoc[a_idx] = total
    return counts


# ---------------------------------------------------------------------------
# per-video evaluation and pooling


@dataclass
class VideoEval:
    clear: ClearCounts
    ident: Idf1Counts
    hota: HotaCounts

    def merge(self, other: "VideoEval") -> None:
        self.clear.merge(other.clear)
        self.ident.merge(other.ident)
        self.hota.merge(other.hota)

    def scores(self) -> dict[str, float]:
        empty = self.clear.num_gt == 0 and self.ident.num_pred == 0
        return {
            "mota": 1.0 if empty else self.clear.mota,
            "idf1": self.ident.idf1,
            "hota": self.hota.hota,
            "deta": float(self.hota.det_a().mean()),
            "assa": float(self.hota.ass_a().mean()),
            "fp": float(self.clear.fp),
            "fn": float(self.clear.fn),
            "idsw": float(self.clear.idsw),
        }


def evaluate_video(
    gt: FrameIndex, pred: FrameIndex, iou_threshold: float = 0.5
) -> VideoEval:
    return VideoEval(
        clear=clear_mot(gt, pred, iou_threshold),
        ident=idf1(gt, pred, iou_threshold),
        hota=hota(gt, pred),
    )


def merge_evals(evals: list[VideoEval]) -> VideoEval:
    if not evals:
        raise ValueError("nothing to merge")
    out = VideoEval(
        clear=ClearCounts(),
        ident=Idf1Counts(),
        hota=HotaCounts(alphas=evals[0].hota.alphas.copy()),
    )
    for ev in evals:
        out.merge(ev)
    return out


@dataclass
class AggregateResult:
    """Frame-rate-agnostic summary over a sampling-factor set."""

    per_k: dict[int, dict[str, float]]
    mhota: float
    mmota: float
    midf1: float
    vr: float

    def as_dict(self) -> dict[str, object]:
        return {
            "mHOTA": self.mhota,
            "mMOTA": self.mmota,
            "mIDF1": self.midf1,
            "VR": self.vr,
            "per_k": {str(k): v for k, v in sorted(self.per_k.items())},
        }


def aggregate(per_k_evals: dict[int, VideoEval]) -> AggregateResult:
    """Average pooled per-factor scores; VR is the largest relative HOTA drop."""
    if not per_k_evals:
        raise ValueError("no per-factor results to aggregate")
    per_k: dict[int, dict[str, float]] = {}
    for k in sorted(per_k_evals):
        per_k[k] = per_k_evals[k].scores()
    hotas = np.array([per_k[k]["hota"] for k in sorted(per_k)])
    highest = float(hotas.max())
    lowest = float(hotas.min())
    if highest == 0.0:
        raise ValueError("VR undefined: best per-factor HOTA is zero")
    return AggregateResult(
        per_k=per_k,
        mhota=float(np.mean([v["hota"] for v in per_k.values()])),
        mmota=float(np.mean([v["mota"] for v in per_k.values()])),
        midf1=float(np.mean([v["idf1"] for v in per_k.values()])),
        vr=(highest - lowest) / highest,
    )


# ---------------------------------------------------------------------------
# candidate analysis


def candidate_curve(
    sequences: Sequence | list[Sequence],
    k_set: tuple[int, ...],
    r_set: tuple[float, ...],
) -> list[tuple[int, float, float]]:
    """Mean number of next-frame boxes within r times the true displacement.

    For every identity present in two consecutive frames of a decomposed
    video (with a positive true displacement d*), count the boxes of the
    later frame whose normalized distance from the identity's earlier box is
    at most r * d*. The count includes the true continuation, so values start
    at 1 and grow as the sampling factor stretches the gaps.
    """
    if isinstance(sequences, Sequence):
        sequences = [sequences]
    r_values = np.asarray(sorted(float(r) for r in r_set), dtype=np.float64)
    sums = {k: np.zeros(r_values.size) for k in k_set}
    hits = {k: 0 for k in k_set}
    for seq in sequences:
        for k in sorted(set(k_set)):
            for video in resample(seq, k):
                index = video_gt_index(video)
                for j in range(1, video.length):
                    ids_a, boxes_a = index.get(j)
                    ids_b, boxes_b = index.get(j + 1)
                    if ids_a.size == 0 or ids_b.size == 0:
                        continue
                    common, ia, ib = np.intersect1d(ids_a, ids_b, return_indices=True)
                    if common.size == 0:
                        continue
                    dists = normalized_distance_matrix(
                        boxes_a[ia], boxes_b, seq.width, seq.height
                    )
                    d_star = dists[np.arange(common.size), ib]
                    moving = d_star > 0
                    if not moving.any():
                        continue
                    within = (
                        dists[moving][:, None, :]
                        <= (r_values[None, :, None] * d_star[moving][:, None, None])
                    )
                    sums[k] += within.sum(axis=(0, 2))
                    hits[k] += int(moving.sum())
    rows: list[tuple[int, float, float]] = []
    for k in sorted(set(k_set)):
        for r_idx, r in enumerate(r_values):
            mean = sums[k][r_idx] / hits[k] if hits[k] else float("nan")
            rows.append((k, float(r), float(mean)))
    return rows
