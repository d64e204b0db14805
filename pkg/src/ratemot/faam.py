"""Frame-rate aware association scoring.

Two scorers share one interface (``score(feats, rate) -> matrix``):

* ``TrivialModel``: a fixed blend of box IoU and embedding similarity, used
  to bootstrap training and as the untrained reference tracker.
* ``FaamModel``: a small network in which a feature branch embeds each
  candidate pair and a rate branch turns a frame-rate representation into
  softmax attention over the feature branch's outputs. The attended sum is
  squashed to a (0, 1) score. Gradients are computed analytically and
  applied with plain SGD.

The rate representation is either the closed-form encoding of a known frame
rate or, when the rate is unknown, a vector built from the scene itself:
match the previous frame's detections to the current ones, collect the
matched pairs' normalized center distances, sort them, and resample the
sorted profile to a fixed length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import normalized_distance_matrix

CHECKPOINT_MAGIC = b"FAAM0001"
DEFAULT_RATE_DIM = 128
DEFAULT_RATE_SCALE = 6.0


# ---------------------------------------------------------------------------
# rate encodings


def encode_known(
    fps: float, rate_dim: int = DEFAULT_RATE_DIM, scale: float = DEFAULT_RATE_SCALE
) -> np.ndarray:
    """Closed-form encoding of a known frame rate: cos(i * scale * fps / dim)."""
    i = np.arange(rate_dim, dtype=np.float64)
    return np.cos(i * scale * float(fps) / float(rate_dim))


def encode_ibdv(
    prev_boxes: np.ndarray,
    prev_embeddings: np.ndarray,
    cur_boxes: np.ndarray,
    cur_embeddings: np.ndarray,
    width: float,
    height: float,
    criterion: str = "dist",
    length: int = DEFAULT_RATE_DIM,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Inter-frame box-distance vector for an unknown frame rate.

    Pairs the two detection sets (by spatial distance, embedding similarity,
    or random pairing), sorts the matched pairs' normalized center distances
    and linearly resamples the sorted profile to ``length`` values. A single
    pair yields a constant vector; an empty side yields all ones.
    """
    prev_boxes = np.asarray(prev_boxes, dtype=np.float64).reshape(-1, 4)
    cur_boxes = np.asarray(cur_boxes, dtype=np.float64).reshape(-1, 4)
    n1, n2 = prev_boxes.shape[0], cur_boxes.shape[0]
    if n1 == 0 or n2 == 0:
        return np.ones(length, dtype=np.float64)

    dist = normalized_distance_matrix(prev_boxes, cur_boxes, width, height)
    if criterion == "dist":
        rows, cols = linear_sum_assignment(dist)
    elif criterion == "sim":
        prev_embeddings = np.asarray(prev_embeddings, dtype=np.float64).reshape(n1, -1)
        cur_embeddings = np.asarray(cur_embeddings, dtype=np.float64).reshape(n2, -1)
        rows, cols = linear_sum_assignment(-(prev_embeddings @ cur_embeddings.T))
    elif criterion == "random":
        if rng is None:
            rng = np.random.default_rng(0)
        m = min(n1, n2)
        rows = rng.permutation(n1)[:m]
        cols = rng.permutation(n2)[:m]
    else:
        raise ValueError(f"unknown pairing criterion {criterion!r}")

    values = np.sort(dist[rows, cols])
    if values.size == 1:
        return np.full(length, float(values[0]))
    src = np.linspace(0.0, 1.0, values.size)
    dst = np.linspace(0.0, 1.0, length)
    return np.interp(dst, src, values)


# ---------------------------------------------------------------------------
# trivial scorer


def trivial_score(
    feats: np.ndarray, w_iou: float = 0.5, w_sim: float = 0.5
) -> np.ndarray:
    """Fixed affinity: w_iou * IoU + w_sim * (cosine + 1) / 2."""
    feats = np.asarray(feats, dtype=np.float64)
    return w_iou * feats[..., 1] + w_sim * (feats[..., 2] + 1.0) / 2.0


class TrivialModel:
    """Score pairs with the fixed IoU/similarity blend; ignores the rate."""

    def __init__(self, w_iou: float = 0.5, w_sim: float = 0.5):
        self.w_iou = float(w_iou)
        self.w_sim = float(w_sim)

    def score(self, feats: np.ndarray, rate: np.ndarray) -> np.ndarray:
        return trivial_score(feats, self.w_iou, self.w_sim)


# ---------------------------------------------------------------------------
# network


@dataclass
class TrainConfig:
    """Optimizer settings for the association network.

    ``extractor_learn_rate`` is accepted for interface parity but has no
    effect: appearance vectors come from a fixed synthetic oracle, so there
    is no extractor to update.
    """

    learn_rate: float = 0.1
    steps: int = 400            # SGD steps per training period
    beta: float = 1.0           # association-loss weight
    seed: int = 0               # parameter initialization stream
    extractor_learn_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.learn_rate <= 0:
            raise ValueError("learn_rate must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")


@dataclass
class FaamParams:
    """Dense-layer weights; W matrices are (fan_in, fan_out), biases (out,)."""

    aff_weights: list[np.ndarray]
    aff_biases: list[np.ndarray]
    att_weights: list[np.ndarray]
    att_biases: list[np.ndarray]

    @property
    def feat_dim(self) -> int:
        return int(self.aff_weights[0].shape[0])

    @property
    def rate_dim(self) -> int:
        return int(self.att_weights[0].shape[0])

    def copy(self) -> "FaamParams":
        return FaamParams(
            aff_weights=[w.copy() for w in self.aff_weights],
            aff_biases=[b.copy() for b in self.aff_biases],
            att_weights=[w.copy() for w in self.att_weights],
            att_biases=[b.copy() for b in self.att_biases],
        )


def init_params(
    seed: int = 0,
    feat_dim: int = 4,
    rate_dim: int = DEFAULT_RATE_DIM,
    aff_hidden: tuple[int, ...] = (64, 64, 64),
    att_hidden: tuple[int, ...] = (96, 80),
) -> FaamParams:
    """Seeded Xavier-uniform initialization; biases start at zero.

    The feature branch ends in 16 * feat_dim units and the rate branch ends
    in the same width so its softmax can attend over the feature outputs.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    out_dim = 16 * feat_dim
    aff_dims = [feat_dim, *aff_hidden, out_dim]
    att_dims = [rate_dim, *att_hidden, out_dim]

    def make_layers(dims: list[int]) -> tuple[list[np.ndarray], list[np.ndarray]]:
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return weights, biases

    aff_w, aff_b = make_layers(aff_dims)
    att_w, att_b = make_layers(att_dims)
    return FaamParams(aff_w, aff_b, att_w, att_b)


def _mlp_forward(
    x: np.ndarray, weights: list[np.ndarray], biases: list[np.ndarray]
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """ReLU MLP with a linear final layer; returns output and caches."""
    pre: list[np.ndarray] = []
    post: list[np.ndarray] = [x]
    out = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = out @ w + b
        pre.append(z)
        out = z if i == last else np.maximum(z, 0.0)
        post.append(out)
    return out, pre, post


def _mlp_backward(
    grad_out: np.ndarray,
    weights: list[np.ndarray],
    pre: list[np.ndarray],
    post: list[np.ndarray],
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    grads_w: list[np.ndarray] = [np.empty(0)] * len(weights)
    grads_b: list[np.ndarray] = [np.empty(0)] * len(weights)
    delta = grad_out
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = post[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (pre[i - 1] > 0.0)
    return grads_w, grads_b


def forward(
    params: FaamParams, feats: np.ndarray, rate: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Score feature rows (n, feat_dim) under one rate vector.

    Returns scores in (0, 1) and a cache used for the backward pass.
    """
    feats = np.asarray(feats, dtype=np.float64).reshape(-1, params.feat_dim)
    rate = np.asarray(rate, dtype=np.float64).reshape(1, params.rate_dim)

    f_aff, aff_pre, aff_post = _mlp_forward(feats, params.aff_weights, params.aff_biases)
    f_att, att_pre, att_post = _mlp_forward(rate, params.att_weights, params.att_biases)

    shifted = f_att[0] - f_att[0].max()
    exp = np.exp(shifted)
    attention = exp / exp.sum()

    raw = f_aff @ attention
    scores = 1.0 / (1.0 + np.exp(-raw))
    cache = {
        "feats": feats,
        "f_aff": f_aff,
        "aff_pre": aff_pre,
        "aff_post": aff_post,
        "att_pre": att_pre,
        "att_post": att_post,
        "attention": attention,
        "raw": raw,
        "scores": scores,
    }
    return scores, cache


def bce_loss(
    raw: np.ndarray, labels: np.ndarray, mask: np.ndarray, beta: float = 1.0
) -> float:
    """Mean binary cross entropy over unmasked pairs, computed from logits."""
    raw = np.asarray(raw, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    keep = np.asarray(mask, dtype=bool).ravel()
    m = int(keep.sum())
    if m == 0:
        return 0.0
    r = raw[keep]
    y = labels[keep]
    per_pair = np.maximum(r, 0.0) - r * y + np.log1p(np.exp(-np.abs(r)))
    return float(beta * per_pair.mean())


def loss_and_grads(
    params: FaamParams,
    feats: np.ndarray,
    rate: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    beta: float = 1.0,
) -> tuple[float, FaamParams]:
    """Loss plus exact gradients, packaged in a FaamParams of the same shape."""
    feats = np.asarray(feats, dtype=np.float64).reshape(-1, params.feat_dim)
    labels = np.asarray(labels, dtype=np.float64).ravel()
    keep = np.asarray(mask, dtype=bool).ravel()

    scores, cache = forward(params, feats, rate)
    loss = bce_loss(cache["raw"], labels, keep, beta)

    m = int(keep.sum())
    zero = FaamParams(
        aff_weights=[np.zeros_like(w) for w in params.aff_weights],
        aff_biases=[np.zeros_like(b) for b in params.aff_biases],
        att_weights=[np.zeros_like(w) for w in params.att_weights],
        att_biases=[np.zeros_like(b) for b in params.att_biases],
    )
    if m == 0:
        return loss, zero

    d_raw = np.where(keep, scores - labels, 0.0) * (beta / m)

    attention = cache["attention"]
    f_aff = cache["f_aff"]
    d_f_aff = d_raw[:, None] * attention[None, :]
    d_attention = f_aff.T @ d_raw
    # Softmax Jacobian applied to the upstream gradient.
    d_f_att = attention * (d_attention - float(attention @ d_attention))

    aff_w, aff_b = _mlp_backward(
        d_f_aff, params.aff_weights, cache["aff_pre"], cache["aff_post"]
    )
    att_w, att_b = _mlp_backward(
        d_f_att[None, :], params.att_weights, cache["att_pre"], cache["att_post"]
    )
    return loss, FaamParams(aff_w, aff_b, att_w, att_b)


def train_step(
    params: FaamParams,
    feats: np.ndarray,
    rate: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    learn_rate: float,
    beta: float = 1.0,
) -> float:
    """One SGD update in place; returns the pre-update loss."""
    loss, grads = loss_and_grads(params, feats, rate, labels, mask, beta)
    for w, g in zip(params.aff_weights, grads.aff_weights):
        w -= learn_rate * g
    for b, g in zip(params.aff_biases, grads.aff_biases):
        b -= learn_rate * g
    for w, g in zip(params.att_weights, grads.att_weights):
        w -= learn_rate * g
    for b, g in zip(params.att_biases, grads.att_biases):
        b -= learn_rate * g
    return loss


class FaamModel:
    """Callable wrapper satisfying the shared scorer interface."""

    def __init__(self, params: FaamParams):
        self.params = params

    def score(self, feats: np.ndarray, rate: np.ndarray) -> np.ndarray:
        feats = np.asarray(feats, dtype=np.float64)
        lead_shape = feats.shape[:-1]
        scores, _ = forward(self.params, feats.reshape(-1, feats.shape[-1]), rate)
        return scores.reshape(lead_shape)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: Path | str, params: FaamParams) -> None:
    """Write magic, dimensions, layer shapes and little-endian f64 weights."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(
            struct.pack(
                "<IIII",
                params.feat_dim,
                params.rate_dim,
                len(params.aff_weights),
                len(params.att_weights),
            )
        )
        for w in (*params.aff_weights, *params.att_weights):
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w, b in zip(
            (*params.aff_weights, *params.att_weights),
            (*params.aff_biases, *params.att_biases),
        ):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path: Path | str) -> FaamParams:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {data[:8]!r}")
    feat_dim, rate_dim, n_aff, n_att = struct.unpack_from("<IIII", data, 8)
    offset = 24
    shapes: list[tuple[int, int]] = []
    for _ in range(n_aff + n_att):
        fan_in, fan_out = struct.unpack_from("<II", data, offset)
        shapes.append((fan_in, fan_out))
        offset += 8
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for fan_in, fan_out in shapes:
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
        biases.append(b.astype(np.float64))
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    params = FaamParams(
        aff_weights=weights[:n_aff],
        aff_biases=biases[:n_aff],
        att_weights=weights[n_aff:],
        att_biases=biases[n_aff:],
    )
    if params.feat_dim != feat_dim or params.rate_dim != rate_dim:
        raise ValueError(f"{path}: header dimensions disagree with layer shapes")
    return params
