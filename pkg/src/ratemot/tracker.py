"""Two-stage online tracker.

Per frame: detections are filtered at a low confidence bound and split at a
high bound. Every live trajectory is advanced by its Kalman filter, then
high-confidence detections are associated first (stage one) and leftovers of
both sides meet the low-confidence detections in stage two. An association
requires the scorer's value to clear a strict gate. Matched trajectories are
corrected, re-embedded (exponential moving average of unit appearance
vectors) and stamped with the stage index; unmatched trajectories survive a
bounded number of frames; unmatched high-confidence detections found new
trajectories, while low-confidence ones never do.

Trajectory state is kept in stacked arrays so each frame advances with a
handful of vectorized operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import assignment
from .association import PatternSlice, affinity_infer
from .faam import encode_ibdv, encode_known
from .framerate_sim import ResampledSequence
from .mot_io import BoundingBox, TrackResult
from .motion_model import batch_init, batch_predict, batch_update, predict_means, state_box
from .synth_detector import FrameDetections


@dataclass
class TrackerConfig:
    conf_low: float = 0.1       # detections below this never take part
    conf_high: float = 0.6      # stage-one threshold and track-birth bound
    score_gate: float = 0.1     # association needs a score strictly above
    max_missing: int = 30       # frames a trajectory may stay unmatched
    iou_pattern_threshold: float = 0.7  # detection/pattern fusion gate (training)
    ema: float = 0.9            # appearance cache keeps this share per update
    mode: str = "known"         # "known", "unknown" or "blind" frame rate
    ibdv_criterion: str = "dist"
    rate_dim: int = 128
    rate_scale: float = 6.0
    seed: int = 0               # stream for the random pairing criterion


@dataclass
class Trajectory:
    """Inspection view of one live track."""

    trajectory_id: int
    mean: np.ndarray
    cov: np.ndarray
    last_box: np.ndarray
    embedding: np.ndarray
    level: int
    missing: int
    oracle_id: int


@dataclass
class _TrackState:
    """Stacked live-trajectory arrays."""

    d_embed: int
    means: np.ndarray = field(default=None)        # type: ignore[assignment]
    covs: np.ndarray = field(default=None)         # type: ignore[assignment]
    last_boxes: np.ndarray = field(default=None)   # type: ignore[assignment]
    embeddings: np.ndarray = field(default=None)   # type: ignore[assignment]
    levels: np.ndarray = field(default=None)       # type: ignore[assignment]
    missing: np.ndarray = field(default=None)      # type: ignore[assignment]
    tids: np.ndarray = field(default=None)         # type: ignore[assignment]
    oracle: np.ndarray = field(default=None)       # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.means = np.zeros((0, 8))
        self.covs = np.zeros((0, 8, 8))
        self.last_boxes = np.zeros((0, 4))
        self.embeddings = np.zeros((0, self.d_embed))
        self.levels = np.zeros(0, dtype=np.int64)
        self.missing = np.zeros(0, dtype=np.int64)
        self.tids = np.zeros(0, dtype=np.int64)
        self.oracle = np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.means.shape[0])

    def keep(self, mask: np.ndarray) -> None:
        self.means = self.means[mask]
        self.covs = self.covs[mask]
        self.last_boxes = self.last_boxes[mask]
        self.embeddings = self.embeddings[mask]
        self.levels = self.levels[mask]
        self.missing = self.missing[mask]
        self.tids = self.tids[mask]
        self.oracle = self.oracle[mask]

    def add(
        self,
        boxes: np.ndarray,
        embeddings: np.ndarray,
        oracle_ids: np.ndarray,
        first_tid: int,
    ) -> int:
        n = boxes.shape[0]
        if n == 0:
            return first_tid
        means, covs = batch_init(boxes)
        self.means = np.concatenate([self.means, means])
        self.covs = np.concatenate([self.covs, covs])
        self.last_boxes = np.concatenate([self.last_boxes, boxes])
        self.embeddings = np.concatenate([self.embeddings, embeddings])
        self.levels = np.concatenate([self.levels, np.ones(n, dtype=np.int64)])
        self.missing = np.concatenate([self.missing, np.zeros(n, dtype=np.int64)])
        self.tids = np.concatenate(
            [self.tids, np.arange(first_tid, first_tid + n, dtype=np.int64)]
        )
        self.oracle = np.concatenate([self.oracle, oracle_ids])
        return first_tid + n

    def trajectory(self, index: int) -> Trajectory:
        return Trajectory(
            trajectory_id=int(self.tids[index]),
            mean=self.means[index].copy(),
            cov=self.covs[index].copy(),
            last_box=self.last_boxes[index].copy(),
            embedding=self.embeddings[index].copy(),
            level=int(self.levels[index]),
            missing=int(self.missing[index]),
            oracle_id=int(self.oracle[index]),
        )


def stage_match(
    patterns: PatternSlice,
    det_boxes: np.ndarray,
    det_embeddings: np.ndarray,
    model,
    rate: np.ndarray,
    width: float,
    height: float,
    score_gate: float = 0.1,
) -> tuple[list[tuple[int, int]], np.ndarray, np.ndarray]:
    """Associate live targets with detections under one scorer.

    Returns matched (target, detection) index pairs plus the leftover index
    arrays of both sides. A pair can only match if its score is strictly
    above ``score_gate``.
    """
    m = len(patterns)
    det_boxes = np.asarray(det_boxes, dtype=np.float64).reshape(-1, 4)
    n = det_boxes.shape[0]
    if m == 0 or n == 0:
        return [], np.arange(m), np.arange(n)
    feats = affinity_infer(patterns, det_boxes, det_embeddings, width, height)
    scores = model.score(feats, rate)
    costs = np.where(scores > score_gate, -scores, assignment.FORBIDDEN)
    pairs = assignment.solve(costs)
    matched_src = {r for r, _ in pairs}
    matched_det = {c for _, c in pairs}
    un_src = np.array([i for i in range(m) if i not in matched_src], dtype=np.int64)
    un_det = np.array([j for j in range(n) if j not in matched_det], dtype=np.int64)
    return pairs, un_src, un_det


def _normalize(vecs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vecs, axis=-1, keepdims=True)
    return vecs / np.where(norms > 0, norms, 1.0)


def track_sequence(
    video: ResampledSequence,
    detections: Callable[[int], FrameDetections],
    model,
    config: TrackerConfig,
    d_embed: int,
    collect_patterns: bool = False,
    pattern_frames: set[int] | None = None,
) -> tuple[TrackResult, dict[int, PatternSlice]]:
    """Track one video; ``detections`` maps original frame ids to detections.

    When ``collect_patterns`` is set, the per-frame pattern records (what a
    training pass samples) are returned for every frame in
    ``pattern_frames`` (all frames when None). Pattern rows describe the
    state after the frame was fully processed, with the motion offset
    pointing at the next frame's predicted box.
    """
    state = _TrackState(d_embed=d_embed)
    result = TrackResult()
    patterns: dict[int, PatternSlice] = {}
    next_tid = 1
    prev_boxes = np.zeros((0, 4))
    prev_embeds = np.zeros((0, d_embed))

    known_rate = encode_known(video.fps, config.rate_dim, config.rate_scale)
    # "blind" feeds the capture-rate encoding whatever the video's actual
    # rate is, which starves the scorer of rate information entirely. It
    # exists as the rate-unaware ablation.
    blind_rate = encode_known(
        video.fps * video.k, config.rate_dim, config.rate_scale
    )
    ibdv_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, video.k, video.offset])
    )

    for j in range(1, video.length + 1):
        dets = detections(int(video.frame_map[j - 1]))
        keep = dets.confs >= config.conf_low
        boxes = dets.boxes[keep]
        confs = dets.confs[keep]
        embeds = dets.embeddings[keep]
        oracle = dets.oracle_ids[keep]

        if config.mode == "known":
            rate = known_rate
        elif config.mode == "blind":
            rate = blind_rate
        else:
            rate = encode_ibdv(
                prev_boxes,
                prev_embeds,
                boxes,
                embeds,
                video.width,
                video.height,
                criterion=config.ibdv_criterion,
                length=config.rate_dim,
                rng=ibdv_rng,
            )

        if len(state):
            state.means, state.covs = batch_predict(state.means, state.covs)
        pred_boxes = state_box(state.means)

        high = confs >= config.conf_high
        high_idx = np.flatnonzero(high)
        low_idx = np.flatnonzero(~high)

        live_slice = PatternSlice(
            boxes=state.last_boxes,
            motion=pred_boxes - state.last_boxes,
            embeddings=state.embeddings,
            levels=state.levels,
            trajectory_ids=state.tids,
        )

        pairs1, un_src1, un_det1 = stage_match(
            live_slice,
            boxes[high_idx],
            embeds[high_idx],
            model,
            rate,
            video.width,
            video.height,
            config.score_gate,
        )

        second_slice = PatternSlice(
            boxes=state.last_boxes[un_src1],
            motion=pred_boxes[un_src1] - state.last_boxes[un_src1],
            embeddings=state.embeddings[un_src1],
            levels=state.levels[un_src1],
            trajectory_ids=state.tids[un_src1],
        )
        pairs2, un_src2, _ = stage_match(
            second_slice,
            boxes[low_idx],
            embeds[low_idx],
            model,
            rate,
            video.width,
            video.height,
            config.score_gate,
        )

        # Resolve stage-local indices back to state/detection indices.
        matched_state = [r for r, _ in pairs1] + [int(un_src1[r]) for r, _ in pairs2]
        matched_det = [int(high_idx[c]) for _, c in pairs1] + [
            int(low_idx[c]) for _, c in pairs2
        ]
        stage_of = np.concatenate(
            [np.ones(len(pairs1), dtype=np.int64), np.full(len(pairs2), 2, dtype=np.int64)]
        )

        if matched_state:
            sel = np.asarray(matched_state, dtype=np.int64)
            det_sel = np.asarray(matched_det, dtype=np.int64)
            new_means, new_covs = batch_update(
                state.means[sel], state.covs[sel], boxes[det_sel]
            )
            state.means[sel] = new_means
            state.covs[sel] = new_covs
            state.last_boxes[sel] = boxes[det_sel]
            state.embeddings[sel] = _normalize(
                config.ema * state.embeddings[sel] + (1.0 - config.ema) * embeds[det_sel]
            )
            state.levels[sel] = stage_of
            state.missing[sel] = 0
            state.oracle[sel] = oracle[det_sel]
            for s_idx, d_idx in zip(sel, det_sel):
                result.add(
                    j,
                    int(state.tids[s_idx]),
                    BoundingBox(*boxes[d_idx]),
                    float(confs[d_idx]),
                )

        # Unmatched trajectories age; overdue ones are dropped.
        unmatched_state = np.asarray(
            [int(un_src1[i]) for i in un_src2], dtype=np.int64
        )
        if unmatched_state.size:
            state.missing[unmatched_state] += 1
        alive = np.ones(len(state), dtype=bool)
        alive[state.missing > config.max_missing] = False
        state.keep(alive)

        # Leftover high-confidence detections found new trajectories.
        birth_idx = np.asarray([int(high_idx[c]) for c in un_det1], dtype=np.int64)
        if birth_idx.size:
            first = next_tid
            next_tid = state.add(
                boxes[birth_idx],
                _normalize(embeds[birth_idx]),
                oracle[birth_idx],
                next_tid,
            )
            for offset, d_idx in enumerate(birth_idx):
                result.add(
                    j,
                    first + offset,
                    BoundingBox(*boxes[d_idx]),
                    float(confs[d_idx]),
                )

        if collect_patterns and (pattern_frames is None or j in pattern_frames):
            if len(state):
                next_boxes = state_box(predict_means(state.means))
            else:
                next_boxes = np.zeros((0, 4))
            patterns[j] = PatternSlice(
                boxes=state.last_boxes.copy(),
                motion=next_boxes - state.last_boxes,
                embeddings=state.embeddings.copy(),
                levels=state.levels.copy(),
                trajectory_ids=state.tids.copy(),
                oracle_ids=state.oracle.copy(),
            )

        prev_boxes = boxes
        prev_embeds = embeds

    result.rows.sort(key=lambda r: (r[0], r[1]))
    return result, patterns
