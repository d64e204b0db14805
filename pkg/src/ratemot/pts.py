"""Periodic training of the association network against its own tracker.

The association scorer is trained in periods. Each period first replays the
tracker (with the previous period's scorer; a fixed IoU/similarity blend
before any training) over resampled videos and records the per-frame
tracking patterns. Training steps then sample a sampling factor, a video
and a consecutive frame pair, fuse the earlier frame's detections with the
recorded patterns, and regress the fused-set / next-frame-detection pair
scores toward their true-identity labels. Because the patterns come from
the tracker itself, the training-time inputs drift toward what the scorer
sees online, and the periodic refresh keeps the two in step.

Pattern stores are regenerated wholesale at the start of every period and
are immutable while the period trains. A store can be written to a binary
cache (``FRAPTS01``) and read back bit-identically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .association import (
    FusedSet,
    PatternSlice,
    TrackingPattern,
    affinity_train,
    match_and_fuse,
    patterns_of,
)
from .faam import (
    FaamModel,
    FaamParams,
    TrainConfig,
    TrivialModel,
    encode_ibdv,
    encode_known,
    init_params,
    train_step,
)
from .framerate_sim import DEFAULT_K_SET, Benchmark, ResampledSequence
from .synth_detector import DetectionSource, NoiseModel
from .tracker import TrackerConfig, track_sequence

STORE_MAGIC = b"FRAPTS01"

# Fixed stream tags so the sampling, training-side pairing and pattern
# machinery never share a random stream.
_PAIR_STREAM = 11
_IBDV_STREAM = 13


@dataclass
class PtsConfig:
    """Scheduling side of periodic training."""

    periods: int = 3
    k_set: tuple[int, ...] = DEFAULT_K_SET
    seed: int = 0
    d_embed: int = 64
    mode: str = "known"             # rate source: "known", "unknown" or "blind"
    ibdv_criterion: str = "dist"
    rate_dim: int = 128
    rate_scale: float = 6.0
    use_patterns: bool = True       # False trains on raw detection pairs

    def __post_init__(self) -> None:
        if self.periods < 0:
            raise ValueError("periods must be non-negative")
        if not self.k_set:
            raise ValueError("k_set must not be empty")


# ---------------------------------------------------------------------------
# pattern store


StoreKey = tuple[str, int, int, int]   # (sequence, k, video offset, frame)


@dataclass
class PatternStore:
    """Per-frame pattern rows, keyed by (sequence, k, video offset, frame)."""

    slices: dict[StoreKey, PatternSlice] = field(default_factory=dict)
    d_embed: int = 0

    def __len__(self) -> int:
        return len(self.slices)

    def n_rows(self) -> int:
        return sum(len(s) for s in self.slices.values())

    def slice_at(
        self, sequence: str, k: int, offset: int, frame: int
    ) -> PatternSlice | None:
        return self.slices.get((sequence, int(k), int(offset), int(frame)))

    def patterns(
        self, sequence: str, k: int, offset: int, frame: int
    ) -> list[TrackingPattern]:
        slice_ = self.slice_at(sequence, k, offset, frame)
        if slice_ is None:
            return []
        return patterns_of(slice_, frame, k)


def save_store(path: Path | str, store: PatternStore) -> None:
    """Write the store as magic, header and per-key little-endian arrays."""
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<II", store.d_embed, len(store.slices)))
        for key in sorted(store.slices):
            name, k, offset, frame = key
            slice_ = store.slices[key]
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<IIII", k, offset, frame, len(slice_)))
            fh.write(np.ascontiguousarray(slice_.boxes, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(slice_.motion, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(slice_.embeddings, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(slice_.levels, dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(slice_.trajectory_ids, dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(slice_.oracle_ids, dtype="<i8").tobytes())


def load_store(path: Path | str) -> PatternStore:
    data = Path(path).read_bytes()
    if data[:8] != STORE_MAGIC:
        raise ValueError(f"{path}: bad pattern store magic {data[:8]!r}")
    d_embed, n_keys = struct.unpack_from("<II", data, 8)
    offset = 16
    slices: dict[StoreKey, PatternSlice] = {}

    def take(dtype: str, count: int, shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        offset += arr.itemsize * count
        return arr.reshape(shape).copy()

    for _ in range(n_keys):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        k, vid_offset, frame, m = struct.unpack_from("<IIII", data, offset)
        offset += 16
        slices[(name, k, vid_offset, frame)] = PatternSlice(
            boxes=take("<f8", m * 4, (m, 4)),
            motion=take("<f8", m * 4, (m, 4)),
            embeddings=take("<f8", m * d_embed, (m, d_embed)),
            levels=take("<i8", m, (m,)).astype(np.int64),
            trajectory_ids=take("<i8", m, (m,)).astype(np.int64),
            oracle_ids=take("<i8", m, (m,)).astype(np.int64),
        )
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes in pattern store")
    return PatternStore(slices=slices, d_embed=int(d_embed))


# ---------------------------------------------------------------------------
# pattern generation


def generate_patterns(
    model,
    benchmark: Benchmark,
    detections: DetectionSource,
    tracker_config: TrackerConfig,
    restrict: dict[tuple[str, int, int], set[int]] | None = None,
) -> PatternStore:
    """Track every benchmark video and record its per-frame patterns.

    ``restrict`` limits the run to the given (sequence, k, offset) videos
    and keeps only the listed frames; the tracker still processes each
    selected video from the start, so restricted and full stores agree on
    every key they share.
    """
    store = PatternStore(d_embed=detections.d_embed)
    for seq in benchmark.sequences:
        for k in benchmark.k_set:
            for video in benchmark.videos[(seq.name, k)]:
                vid_key = (seq.name, k, video.offset)
                frames: set[int] | None = None
                if restrict is not None:
                    frames = restrict.get(vid_key)
                    if not frames:
                        continue
                _, slices = track_sequence(
                    video,
                    lambda f, name=seq.name: detections.frame(name, f),
                    model,
                    tracker_config,
                    detections.d_embed,
                    collect_patterns=True,
                    pattern_frames=frames,
                )
                for frame, slice_ in slices.items():
                    store.slices[(seq.name, k, video.offset, frame)] = slice_
    return store


# ---------------------------------------------------------------------------
# the period loop


@dataclass
class PeriodLog:
    """What one training period did."""

    period: int
    losses: list[float]
    skipped: int
    pattern_rows: int

    @property
    def steps(self) -> int:
        return len(self.losses)

    def as_dict(self) -> dict[str, object]:
        return {
            "period": self.period,
            "steps": self.steps,
            "skipped": self.skipped,
            "pattern_rows": self.pattern_rows,
            "mean_loss": float(np.mean(self.losses)) if self.losses else None,
            "losses": [float(v) for v in self.losses],
        }


@dataclass
class PairDraw:
    video: ResampledSequence | None
    seq_name: str = ""
    frame: int = 0               # pattern frame; detections come from frame+1

    @property
    def valid(self) -> bool:
        return self.video is not None


def sample_pairs(
    benchmark: Benchmark,
    k_set: tuple[int, ...],
    steps: int,
    rng: np.random.Generator,
) -> list[PairDraw]:
    """Draw (video, frame pair) tuples; undrawable combinations stay invalid."""
    k_values = sorted(set(int(k) for k in k_set))
    draws: list[PairDraw] = []
    for _ in range(steps):
        k = k_values[int(rng.integers(len(k_values)))]
        seq = benchmark.sequences[int(rng.integers(len(benchmark.sequences)))]
        videos = benchmark.videos.get((seq.name, k), [])
        if not videos:
            draws.append(PairDraw(video=None))
            continue
        video = videos[int(rng.integers(len(videos)))]
        if video.length < 2:
            draws.append(PairDraw(video=None))
            continue
        frame = int(rng.integers(1, video.length))
        draws.append(PairDraw(video=video, seq_name=seq.name, frame=frame))
    return draws


def detections_as_fused(dets, conf_high: float = 0.6) -> FusedSet:
    """Treat a frame's detections as the association source set directly.

    Levels mirror the tracker's convention: a source backed by a confident
    detection is level 1, a weak one level 2. Raw-pair training has to
    populate both values or the level input stays constant and the network
    reacts unpredictably to level-2 sources at tracking time.
    """
    n = len(dets)
    levels = np.where(dets.confs >= conf_high, 1, 2).astype(np.int64)
    return FusedSet(
        boxes=dets.boxes.copy(),
        embeddings=dets.embeddings.copy(),
        levels=levels,
        oracle_ids=dets.oracle_ids.copy(),
        from_detection=np.ones(n, dtype=bool),
    )


def run_pts(
    pts_config: PtsConfig,
    benchmark: Benchmark,
    noise: NoiseModel,
    train_config: TrainConfig,
    tracker_config: TrackerConfig | None = None,
    detections: DetectionSource | None = None,
    params: FaamParams | None = None,
) -> tuple[FaamParams, list[PeriodLog]]:
    """Run the full periodic schedule and return the trained parameters.

    Zero periods return the freshly initialized parameters untouched. Each
    period's training pairs are drawn up front so the pattern pass only
    tracks the videos that period will actually sample; a pair whose store
    entry is missing or carries no usable label is skipped and counted in
    the period log.

    With ``use_patterns`` off, the tracker is never run: the earlier frame's
    raw detections stand in for the fused set. That variant is the
    no-pattern baseline and spends the same total step budget.
    """
    if params is None:
        params = init_params(
            seed=train_config.seed,
            feat_dim=4,
            rate_dim=pts_config.rate_dim,
        )
    logs: list[PeriodLog] = []
    if pts_config.periods == 0:
        return params, logs

    if detections is None:
        detections = DetectionSource(
            benchmark.sequences, noise, d_embed=pts_config.d_embed, seed=pts_config.seed
        )
    if tracker_config is None:
        tracker_config = TrackerConfig(
            mode=pts_config.mode,
            ibdv_criterion=pts_config.ibdv_criterion,
            rate_dim=pts_config.rate_dim,
            rate_scale=pts_config.rate_scale,
            seed=pts_config.seed,
        )

    for period in range(1, pts_config.periods + 1):
        pair_rng = np.random.default_rng(
            np.random.SeedSequence([pts_config.seed, _PAIR_STREAM, period])
        )
        ibdv_rng = np.random.default_rng(
            np.random.SeedSequence([pts_config.seed, _IBDV_STREAM, period])
        )
        draws = sample_pairs(benchmark, pts_config.k_set, train_config.steps, pair_rng)

        store = PatternStore(d_embed=pts_config.d_embed)
        if pts_config.use_patterns:
            needed: dict[tuple[str, int, int], set[int]] = {}
            for draw in draws:
                if draw.valid:
                    vid_key = (draw.seq_name, draw.video.k, draw.video.offset)
                    needed.setdefault(vid_key, set()).add(draw.frame)
            prev_model = TrivialModel() if period == 1 else FaamModel(params)
            store = generate_patterns(
                prev_model, benchmark, detections, tracker_config, restrict=needed
            )

        losses: list[float] = []
        skipped = 0
        for draw in draws:
            if not draw.valid:
                skipped += 1
                continue
            video = draw.video
            dets_here = detections.frame(draw.seq_name, int(video.frame_map[draw.frame - 1]))
            dets_next = detections.frame(draw.seq_name, int(video.frame_map[draw.frame]))

            if pts_config.use_patterns:
                slice_ = store.slice_at(draw.seq_name, video.k, video.offset, draw.frame)
                if slice_ is None:
                    skipped += 1
                    continue
                fused = match_and_fuse(
                    dets_here.boxes,
                    dets_here.embeddings,
                    dets_here.oracle_ids,
                    slice_,
                    iou_threshold=tracker_config.iou_pattern_threshold,
                )
            else:
                fused = detections_as_fused(dets_here, tracker_config.conf_high)

            feats, labels, mask = affinity_train(
                fused,
                dets_next.boxes,
                dets_next.embeddings,
                dets_next.oracle_ids,
                video.width,
                video.height,
            )
            if feats.size == 0 or not mask.any():
                skipped += 1
                continue

            if pts_config.mode == "known":
                rate = encode_known(video.fps, pts_config.rate_dim, pts_config.rate_scale)
            elif pts_config.mode == "blind":
                rate = encode_known(
                    video.fps * video.k, pts_config.rate_dim, pts_config.rate_scale
                )
            else:
                rate = encode_ibdv(
                    dets_here.boxes,
                    dets_here.embeddings,
                    dets_next.boxes,
                    dets_next.embeddings,
                    video.width,
                    video.height,
                    criterion=pts_config.ibdv_criterion,
                    length=pts_config.rate_dim,
                    rng=ibdv_rng,
                )

            loss = train_step(
                params, feats, rate, labels, mask,
                learn_rate=train_config.learn_rate,
                beta=train_config.beta,
            )
            losses.append(loss)

        logs.append(
            PeriodLog(
                period=period,
                losses=losses,
                skipped=skipped,
                pattern_rows=store.n_rows(),
            )
        )
    return params, logs
