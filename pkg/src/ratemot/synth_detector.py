"""Synthetic detection oracle.

Stands in for a detector plus appearance-embedding extractor: ground-truth
boxes are jittered, dropped and augmented with false positives, and each
detection carries a unit-norm embedding derived from a per-identity bank
vector. Every frame draws from its own seeded random stream so any subset of
frames can be regenerated bit-identically in any order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .framerate_sim import gt_arrays
from .mot_io import Sequence

EMBED_MAGIC = b"FRAEMB01"


@dataclass
class NoiseModel:
    """Detector corruption parameters; all-zero settings reproduce the truth."""

    center_jitter: float = 0.0   # center offset std, relative to box size
    size_jitter: float = 0.0     # log-normal size factor std
    miss_prob: float = 0.0       # chance of dropping a true box
    fp_rate: float = 0.0         # Poisson rate of false boxes per frame
    conf_true: tuple[float, float] = (0.9, 0.0)    # (mean, std)
    conf_false: tuple[float, float] = (0.3, 0.0)   # (mean, std)
    embed_noise: float = 0.0     # embedding perturbation std


@dataclass
class IdentityBank:
    """Unit embedding vector per identity."""

    ids: np.ndarray       # sorted (n,)
    vectors: np.ndarray   # (n, d), rows unit norm

    @property
    def d_embed(self) -> int:
        return int(self.vectors.shape[1])

    def vectors_for(self, ids: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.ids, ids)
        if idx.size and (
            (idx >= self.ids.size).any() or (self.ids[np.minimum(idx, self.ids.size - 1)] != ids).any()
        ):
            raise KeyError("identity missing from bank")
        return self.vectors[idx]


def make_identity_bank(identities, d_embed: int, seed: int = 0) -> IdentityBank:
    """Draw one unit vector per identity from a seeded Gaussian."""
    if d_embed < 2:
        raise ValueError(f"d_embed must be at least 2, got {d_embed}")
    ids = np.unique(np.asarray(list(identities), dtype=np.int64))
    if ids.size == 0:
        raise ValueError("need at least one identity")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    vectors = rng.normal(size=(ids.size, d_embed))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    return IdentityBank(ids=ids, vectors=vectors)


@dataclass
class FrameDetections:
    """Detections of one frame; oracle_ids holds -1 for false positives."""

    boxes: np.ndarray       # (n, 4) x, y, w, h
    confs: np.ndarray       # (n,)
    embeddings: np.ndarray  # (n, d) unit rows
    oracle_ids: np.ndarray  # (n,) int64

    def __len__(self) -> int:
        return int(self.boxes.shape[0])


def _normalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms = np.where(norms > 0, norms, 1.0)
    return mat / norms


def detect_frame(
    gt_ids: np.ndarray,
    gt_boxes: np.ndarray,
    model: NoiseModel,
    bank: IdentityBank,
    width: int,
    height: int,
    seed: int,
    frame: int,
    stream: int = 0,
) -> FrameDetections:
    """Produce detections for one frame's ground truth.

    The random stream is keyed by (seed, stream, frame); `stream` tells
    sequences apart so every (sequence, frame) pair is reproducible in
    isolation.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, stream, int(frame)]))
    gt_ids = np.asarray(gt_ids, dtype=np.int64)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64)
    n = gt_ids.size
    d = bank.d_embed

    miss_draw = rng.uniform(size=n)
    center_draw = rng.normal(size=(n, 2))
    size_draw = rng.normal(size=(n, 2))
    conf_draw = rng.normal(size=n)
    embed_draw = rng.normal(size=(n, d))

    keep = miss_draw >= model.miss_prob
    w = gt_boxes[:, 2] * np.exp(size_draw[:, 0] * model.size_jitter)
    h = gt_boxes[:, 3] * np.exp(size_draw[:, 1] * model.size_jitter)
    cx = gt_boxes[:, 0] + gt_boxes[:, 2] / 2.0 + center_draw[:, 0] * model.center_jitter * gt_boxes[:, 2]
    cy = gt_boxes[:, 1] + gt_boxes[:, 3] / 2.0 + center_draw[:, 1] * model.center_jitter * gt_boxes[:, 3]
    true_boxes = np.stack([cx - w / 2.0, cy - h / 2.0, w, h], axis=1)
    true_confs = np.clip(
        model.conf_true[0] + conf_draw * model.conf_true[1], 0.05, 1.0
    )
    true_embeds = _normalize_rows(
        bank.vectors_for(gt_ids) + embed_draw * model.embed_noise
    )

    n_fp = int(rng.poisson(model.fp_rate))
    fp_w = width * rng.uniform(0.02, 0.08, size=n_fp)
    fp_h = fp_w * rng.uniform(2.2, 3.0, size=n_fp)
    fp_cx = rng.uniform(fp_w / 2.0, width - fp_w / 2.0)
    fp_cy = rng.uniform(fp_h / 2.0, height - fp_h / 2.0)
    fp_boxes = np.stack([fp_cx - fp_w / 2.0, fp_cy - fp_h / 2.0, fp_w, fp_h], axis=1)
    fp_confs = np.clip(
        model.conf_false[0] + rng.normal(size=n_fp) * model.conf_false[1], 0.05, 1.0
    )
    fp_embeds = _normalize_rows(rng.normal(size=(n_fp, d)))

    boxes = np.concatenate([true_boxes[keep], fp_boxes], axis=0)
    confs = np.concatenate([true_confs[keep], fp_confs])
    embeds = np.concatenate([true_embeds[keep], fp_embeds], axis=0)
    oracle = np.concatenate(
        [gt_ids[keep], np.full(n_fp, -1, dtype=np.int64)]
    )
    return FrameDetections(boxes=boxes, confs=confs, embeddings=embeds, oracle_ids=oracle)


class DetectionSource:
    """Cached per-frame detections for a set of sequences.

    Frames are generated lazily; the cache makes repeated passes over the
    same benchmark (pattern generation, training, tracking) reuse identical
    detections without re-rolling the random streams.
    """

    def __init__(self, sequences: list[Sequence], model: NoiseModel, d_embed: int, seed: int):
        self.model = model
        self.seed = int(seed)
        self.d_embed = int(d_embed)
        self._index: dict[str, int] = {}
        self._by_frame: dict[str, dict[int, tuple[np.ndarray, np.ndarray]]] = {}
        self._banks: dict[str, IdentityBank] = {}
        self._dims: dict[str, tuple[int, int]] = {}
        self._cache: dict[tuple[str, int], FrameDetections] = {}
        for idx, seq in enumerate(sorted(sequences, key=lambda s: s.name)):
            frames, ids, boxes = gt_arrays(seq)
            grouped: dict[int, tuple[np.ndarray, np.ndarray]] = {}
            bounds = np.searchsorted(frames, np.arange(1, seq.length + 2))
            for f in range(1, seq.length + 1):
                lo, hi = bounds[f - 1], bounds[f]
                grouped[f] = (ids[lo:hi], boxes[lo:hi])
            self._index[seq.name] = idx
            self._by_frame[seq.name] = grouped
            self._dims[seq.name] = (seq.width, seq.height)
            identities = np.unique(ids) if ids.size else np.array([1], dtype=np.int64)
            bank_seed = np.random.SeedSequence([self.seed, idx, 0]).generate_state(1)[0]
            self._banks[seq.name] = make_identity_bank(identities, self.d_embed, int(bank_seed))

    def bank(self, seq_name: str) -> IdentityBank:
        return self._banks[seq_name]

    def frame(self, seq_name: str, frame: int) -> FrameDetections:
        key = (seq_name, int(frame))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        gt_ids, gt_boxes = self._by_frame[seq_name][int(frame)]
        width, height = self._dims[seq_name]
        dets = detect_frame(
            gt_ids,
            gt_boxes,
            self.model,
            self._banks[seq_name],
            width,
            height,
            seed=self.seed,
            frame=int(frame),
            stream=self._index[seq_name],
        )
        self._cache[key] = dets
        return dets


def write_embeddings(path: Path | str, embeddings: np.ndarray) -> None:
    """Binary sidecar: magic, u32 count, u32 dim, little-endian f32 rows."""
    mat = np.ascontiguousarray(np.asarray(embeddings, dtype="<f4"))
    if mat.ndim != 2:
        raise ValueError("embeddings must be a 2-D array")
    with open(path, "wb") as fh:
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<II", mat.shape[0], mat.shape[1]))
        fh.write(mat.tobytes())


def read_embeddings(path: Path | str) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] != EMBED_MAGIC:
        raise ValueError(f"{path}: bad embedding sidecar magic {data[:8]!r}")
    count, dim = struct.unpack_from("<II", data, 8)
    expected = 16 + 4 * count * dim
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    flat = np.frombuffer(data, dtype="<f4", offset=16)
    return flat.reshape(count, dim).astype(np.float64)
