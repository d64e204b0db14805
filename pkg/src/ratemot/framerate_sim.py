"""Multi-frame-rate benchmark construction.

A source video at F fps is decomposed with a sampling factor k into k
lower-rate videos: output video i (1-based) takes original frames i, i+k,
i+2k, ... so its effective rate is F/k. Ground truth is carried along with
frames renumbered consecutively. A dynamic variant assigns frames to the k
videos at random instead, producing irregular frame gaps.

Resampled annotations are kept as flat numpy arrays (frame, identity, box
rows) because downstream tracking and scoring pool hundreds of thousands of
rows; `gt_entries` materializes the dataclass view on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mot_io import BoundingBox, GtEntry, Sequence

DEFAULT_K_SET = (1, 2, 4, 8, 16, 25, 36, 50)


def gt_arrays(seq: Sequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten a sequence's ground truth to (frames, ids, boxes) arrays."""
    n = len(seq.gt)
    frames = np.empty(n, dtype=np.int64)
    ids = np.empty(n, dtype=np.int64)
    boxes = np.empty((n, 4), dtype=np.float64)
    for row, entry in enumerate(seq.gt):
        frames[row] = entry.frame
        ids[row] = entry.identity
        boxes[row] = entry.box.as_tuple()
    order = np.lexsort((ids, frames))
    return frames[order], ids[order], boxes[order]


@dataclass
class ResampledSequence:
    """One output video of a decomposition, with remapped ground truth."""

    name: str
    parent: str
    k: int
    offset: int
    fps: float
    width: int
    height: int
    length: int
    frame_map: np.ndarray                       # (length,) original frame ids
    gt_frames: np.ndarray = field(repr=False)   # renumbered 1..length
    gt_ids: np.ndarray = field(repr=False)
    gt_boxes: np.ndarray = field(repr=False)

    def identity_count(self) -> int:
        return int(np.unique(self.gt_ids).size)

    def gt_entries(self) -> list[GtEntry]:
        return [
            GtEntry(int(f), int(i), BoundingBox(*b))
            for f, i, b in zip(self.gt_frames, self.gt_ids, self.gt_boxes)
        ]


def _remap_gt(
    frames: np.ndarray,
    ids: np.ndarray,
    boxes: np.ndarray,
    chosen: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mask = np.isin(frames, chosen)
    new_frames = np.searchsorted(chosen, frames[mask]) + 1
    return new_frames, ids[mask], boxes[mask]


def resample(seq: Sequence, k: int) -> list[ResampledSequence]:
    """Decompose a sequence into k videos by regular frame striding."""
    if k < 1 or k > seq.length:
        raise ValueError(f"sampling factor {k} outside 1..{seq.length}")
    frames, ids, boxes = gt_arrays(seq)
    videos = []
    for offset in range(1, k + 1):
        frame_map = np.arange(offset, seq.length + 1, k, dtype=np.int64)
        gt_f, gt_i, gt_b = _remap_gt(frames, ids, boxes, frame_map)
        videos.append(
            ResampledSequence(
                name=f"{seq.name}-k{k:02d}-o{offset:02d}",
                parent=seq.name,
                k=k,
                offset=offset,
                fps=seq.fps / k,
                width=seq.width,
                height=seq.height,
                length=int(frame_map.size),
                frame_map=frame_map,
                gt_frames=gt_f,
                gt_ids=gt_i,
                gt_boxes=gt_b,
            )
        )
    return videos


def dynamic_resample(seq: Sequence, k: int, seed: int = 0) -> list[ResampledSequence]:
    """Decompose by random frame assignment instead of regular striding.

    Frames are drawn uniformly without replacement in batches sized
    pool // (k - t) at step t, so video lengths stay within one frame of
    each other while the within-video frame gaps become irregular.
    """
    if k < 1 or k > seq.length:
        raise ValueError(f"sampling factor {k} outside 1..{seq.length}")
    frames, ids, boxes = gt_arrays(seq)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    pool = np.arange(1, seq.length + 1, dtype=np.int64)
    videos = []
    for step in range(k):
        take = pool.size // (k - step)
        picked = rng.choice(pool.size, size=take, replace=False)
        chosen = np.sort(pool[picked])
        keep = np.ones(pool.size, dtype=bool)
        keep[picked] = False
        pool = pool[keep]
        gt_f, gt_i, gt_b = _remap_gt(frames, ids, boxes, chosen)
        videos.append(
            ResampledSequence(
                name=f"{seq.name}-dyn{k:02d}-o{step + 1:02d}",
                parent=seq.name,
                k=k,
                offset=step + 1,
                fps=seq.fps / k,
                width=seq.width,
                height=seq.height,
                length=int(chosen.size),
                frame_map=chosen,
                gt_frames=gt_f,
                gt_ids=gt_i,
                gt_boxes=gt_b,
            )
        )
    return videos


@dataclass
class GapStats:
    """Frame-gap statistics pooled over a set of videos."""

    mean_frames: float
    median_frames: float
    mean_ms: float
    median_ms: float

    def as_dict(self) -> dict[str, float]:
        return {
            "mean_frames": self.mean_frames,
            "median_frames": self.median_frames,
            "mean_ms": self.mean_ms,
            "median_ms": self.median_ms,
        }


def gap_stats(videos: list[ResampledSequence], parent_fps: float) -> GapStats:
    """Mean and median gap between consecutive kept frames, in frames and ms."""
    gaps = [np.diff(v.frame_map) for v in videos if v.frame_map.size >= 2]
    if not gaps:
        raise ValueError("no video has two or more frames; gaps undefined")
    pooled = np.concatenate(gaps).astype(np.float64)
    ms = 1000.0 / parent_fps
    return GapStats(
        mean_frames=float(pooled.mean()),
        median_frames=float(np.median(pooled)),
        mean_ms=float(pooled.mean() * ms),
        median_ms=float(np.median(pooled) * ms),
    )


def mean_video_length(videos: list[ResampledSequence]) -> int:
    """Mean video length rounded half-up to a whole frame count."""
    lengths = np.array([v.length for v in videos], dtype=np.float64)
    return int(np.floor(lengths.mean() + 0.5))


@dataclass
class Benchmark:
    """All resampled videos of a sequence set over a sampling-factor set."""

    sequences: list[Sequence]
    k_set: tuple[int, ...]
    videos: dict[tuple[str, int], list[ResampledSequence]]

    def sequence_names(self) -> list[str]:
        return [seq.name for seq in self.sequences]

    def videos_at(self, k: int) -> list[ResampledSequence]:
        out: list[ResampledSequence] = []
        for seq in self.sequences:
            out.extend(self.videos[(seq.name, k)])
        return out

    def all_videos(self) -> list[ResampledSequence]:
        out: list[ResampledSequence] = []
        for k in self.k_set:
            out.extend(self.videos_at(k))
        return out


def build_benchmark(
    sequences: list[Sequence], k_set: tuple[int, ...] = DEFAULT_K_SET
) -> Benchmark:
    """Regular decomposition of every sequence at every factor in k_set."""
    k_set = tuple(sorted(set(int(k) for k in k_set)))
    videos: dict[tuple[str, int], list[ResampledSequence]] = {}
    for seq in sequences:
        for k in k_set:
            videos[(seq.name, k)] = resample(seq, k)
    return Benchmark(sequences=list(sequences), k_set=k_set, videos=videos)


def build_dynamic_benchmark(
    sequences: list[Sequence], k_set: tuple[int, ...], seed: int = 0
) -> Benchmark:
    """Dynamic decomposition; the random stream is derived per (sequence, k)."""
    k_set = tuple(sorted(set(int(k) for k in k_set)))
    videos: dict[tuple[str, int], list[ResampledSequence]] = {}
    for seq_index, seq in enumerate(sequences):
        for k in k_set:
            sub_seed = np.random.SeedSequence([seed, seq_index, k]).generate_state(1)[0]
            videos[(seq.name, k)] = dynamic_resample(seq, k, seed=int(sub_seed))
    return Benchmark(sequences=list(sequences), k_set=k_set, videos=videos)
