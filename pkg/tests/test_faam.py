import numpy as np
import pytest

from ratemot.faam import (
    FaamModel,
    TrainConfig,
    TrivialModel,
    bce_loss,
    encode_ibdv,
    encode_known,
    forward,
    init_params,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
    train_step,
    trivial_score,
)


def small_params(seed=0):
    return init_params(
        seed=seed, feat_dim=4, rate_dim=16, aff_hidden=(8, 8), att_hidden=(12, 10)
    )


def flat_views(params):
    return [
        *params.aff_weights, *params.aff_biases,
        *params.att_weights, *params.att_biases,
    ]


def make_batch(seed=0, n=12):
    rng = np.random.default_rng(seed)
    feats = np.column_stack(
        [
            rng.uniform(0, 1.5, n),
            rng.uniform(0, 1, n),
            rng.uniform(-1, 1, n),
            rng.integers(0, 2, n).astype(float),
        ]
    )
    labels = rng.integers(0, 2, n).astype(float)
    mask = rng.random(n) > 0.2
    if not mask.any():
        mask[0] = True
    return feats, labels, mask


# ---------------------------------------------------------------------------
# rate encodings


def test_encode_known_formula():
    enc = encode_known(12.5, rate_dim=8, scale=6.0)
    expected = np.cos(np.arange(8) * 6.0 * 12.5 / 8)
    np.testing.assert_allclose(enc, expected, atol=1e-12)
    assert enc[0] == 1.0


def test_encode_known_distinguishes_rates():
    a = encode_known(25.0)
    b = encode_known(12.5)
    assert a.shape == (128,)
    assert not np.allclose(a, b)


def square_grid(n, spacing=50.0):
    xs = np.arange(n) * spacing
    return np.column_stack([xs, np.zeros(n), np.full(n, 10.0), np.full(n, 10.0)])


def test_ibdv_zero_on_identical_frames():
    boxes = square_grid(6)
    embeds = np.tile(np.eye(6, 8), (1, 1))
    vec = encode_ibdv(boxes, embeds, boxes, embeds, 1000.0, 1000.0)
    np.testing.assert_allclose(vec, 0.0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 25, 50])
def test_ibdv_fixed_length(n):
    rng = np.random.default_rng(n)
    prev = np.column_stack(
        [rng.uniform(0, 900, n), rng.uniform(0, 500, n),
         rng.uniform(5, 30, n), rng.uniform(5, 30, n)]
    )
    cur = prev + rng.normal(0, 10, prev.shape)
    cur[:, 2:] = np.abs(cur[:, 2:]) + 1
    e_prev = rng.normal(size=(n, 8))
    e_cur = rng.normal(size=(n, 8))
    for criterion in ("dist", "sim", "random"):
        vec = encode_ibdv(
            prev, e_prev, cur, e_cur, 1000.0, 600.0,
            criterion=criterion, length=64, rng=np.random.default_rng(0),
        )
        assert vec.shape == (64,)
        assert np.isfinite(vec).all()


@pytest.mark.parametrize("criterion", ["dist", "sim"])
def test_ibdv_permutation_invariant(criterion):
    rng = np.random.default_rng(4)
    n = 9
    prev = np.column_stack(
        [rng.uniform(0, 900, n), rng.uniform(0, 500, n),
         rng.uniform(5, 30, n), rng.uniform(5, 30, n)]
    )
    cur = prev + rng.normal(0, 20, prev.shape)
    cur[:, 2:] = np.abs(cur[:, 2:]) + 1
    e_prev = rng.normal(size=(n, 6))
    e_cur = rng.normal(size=(n, 6))
    base = encode_ibdv(prev, e_prev, cur, e_cur, 1000.0, 600.0, criterion=criterion)
    perm = rng.permutation(n)
    shuffled = encode_ibdv(
        prev[perm], e_prev[perm], cur, e_cur, 1000.0, 600.0, criterion=criterion
    )
    np.testing.assert_allclose(base, shuffled, atol=1e-12)


def test_ibdv_sorted_output():
    rng = np.random.default_rng(8)
    n = 12
    prev = np.column_stack(
        [rng.uniform(0, 900, n), rng.uniform(0, 500, n),
         rng.uniform(5, 30, n), rng.uniform(5, 30, n)]
    )
    cur = prev + rng.normal(0, 40, prev.shape)
    cur[:, 2:] = np.abs(cur[:, 2:]) + 1
    vec = encode_ibdv(prev, np.zeros((n, 4)), cur, np.zeros((n, 4)), 1000.0, 600.0)
    assert (np.diff(vec) >= -1e-12).all()


def test_ibdv_empty_side_gives_ones():
    vec = encode_ibdv(
        np.zeros((0, 4)), np.zeros((0, 4)), square_grid(3), np.zeros((3, 4)),
        100.0, 100.0,
    )
    np.testing.assert_allclose(vec, 1.0)


def test_ibdv_single_pair_is_constant():
    prev = np.array([[0.0, 0.0, 10.0, 10.0]])
    cur = np.array([[30.0, 40.0, 10.0, 10.0]])
    vec = encode_ibdv(prev, np.zeros((1, 2)), cur, np.zeros((1, 2)), 100.0, 100.0)
    assert np.unique(vec).size == 1
    assert vec[0] == pytest.approx(np.hypot(0.3, 0.4))


def test_ibdv_bad_criterion():
    with pytest.raises(ValueError):
        encode_ibdv(
            square_grid(2), np.zeros((2, 2)), square_grid(2), np.zeros((2, 2)),
            10.0, 10.0, criterion="nope",
        )


# ---------------------------------------------------------------------------
# trivial scorer


def test_trivial_score_blend():
    feats = np.array([[0.2, 0.5, 0.0, 0.0], [0.0, 1.0, 1.0, 1.0]])
    np.testing.assert_allclose(trivial_score(feats), [0.5, 1.0])
    model = TrivialModel()
    np.testing.assert_allclose(model.score(feats, np.zeros(4)), [0.5, 1.0])


# ---------------------------------------------------------------------------
# network forward/backward


def test_forward_shapes_and_range():
    params = small_params()
    feats, _, _ = make_batch()
    rate = encode_known(25.0, rate_dim=16)
    scores, cache = forward(params, feats, rate)
    assert scores.shape == (12,)
    assert (scores > 0).all() and (scores < 1).all()
    assert cache["attention"].shape == (64,)
    assert cache["attention"].sum() == pytest.approx(1.0)
    assert (cache["attention"] >= 0).all()


def test_model_score_preserves_matrix_shape():
    params = small_params()
    model = FaamModel(params)
    feats = np.zeros((3, 5, 4))
    rate = encode_known(12.5, rate_dim=16)
    out = model.score(feats, rate)
    assert out.shape == (3, 5)


def test_bce_loss_logit_stability():
    raw = np.array([500.0, -500.0])
    labels = np.array([1.0, 0.0])
    mask = np.ones(2, bool)
    assert bce_loss(raw, labels, mask) == pytest.approx(0.0, abs=1e-12)
    flipped = bce_loss(raw, labels[::-1].copy(), mask)
    assert np.isfinite(flipped) and flipped > 100


def test_bce_loss_masked_empty():
    assert bce_loss(np.array([1.0]), np.array([1.0]), np.array([False])) == 0.0


def numeric_grad(params, feats, rate, labels, mask, beta, arr, idx, eps=1e-5):
    orig = arr.flat[idx]
    arr.flat[idx] = orig + eps
    up, _ = loss_and_grads(params, feats, rate, labels, mask, beta)
    arr.flat[idx] = orig - eps
    down, _ = loss_and_grads(params, feats, rate, labels, mask, beta)
    arr.flat[idx] = orig
    return (up - down) / (2 * eps)


@pytest.mark.parametrize("rate_source", ["known", "ibdv"])
def test_gradients_match_finite_differences(rate_source):
    params = small_params(seed=3)
    feats, labels, mask = make_batch(seed=5)
    if rate_source == "known":
        rate = encode_known(6.25, rate_dim=16)
    else:
        rng = np.random.default_rng(2)
        prev = np.column_stack(
            [rng.uniform(0, 900, 7), rng.uniform(0, 500, 7),
             rng.uniform(5, 30, 7), rng.uniform(5, 30, 7)]
        )
        cur = prev + rng.normal(0, 15, prev.shape)
        cur[:, 2:] = np.abs(cur[:, 2:]) + 1
        rate = encode_ibdv(
            prev, rng.normal(size=(7, 4)), cur, rng.normal(size=(7, 4)),
            1000.0, 600.0, length=16,
        )
    beta = 1.3
    _, grads = loss_and_grads(params, feats, rate, labels, mask, beta)

    param_arrays = flat_views(params)
    grad_arrays = flat_views(grads)
    rng = np.random.default_rng(7)
    checked = 0
    worst = 0.0
    while checked < 50:
        which = int(rng.integers(len(param_arrays)))
        arr = param_arrays[which]
        idx = int(rng.integers(arr.size))
        num = numeric_grad(params, feats, rate, labels, mask, beta, arr, idx)
        ana = grad_arrays[which].flat[idx]
        scale = max(abs(num), abs(ana))
        if scale < 1e-6:
            # central differences on a ~0.7 loss bottom out around 1e-11
            # absolute error, so tiny entries cannot be checked relatively
            continue
        rel = abs(num - ana) / scale
        worst = max(worst, rel)
        checked += 1
    assert worst < 1e-4, f"worst relative gradient error {worst}"


def test_masked_pairs_carry_no_gradient():
    params = small_params(seed=1)
    feats, labels, _ = make_batch(seed=1)
    rate = encode_known(25.0, rate_dim=16)
    none = np.zeros(len(labels), bool)
    loss, grads = loss_and_grads(params, feats, rate, labels, none)
    assert loss == 0.0
    for g in flat_views(grads):
        np.testing.assert_allclose(g, 0.0)


def test_train_step_descends_on_fixed_batch():
    params = small_params(seed=2)
    feats, _, mask = make_batch(seed=9, n=40)
    labels = (feats[:, 1] > 0.5).astype(float)
    rate = encode_known(25.0, rate_dim=16)
    losses = [
        train_step(params, feats, rate, labels, mask, learn_rate=0.3)
        for _ in range(400)
    ]
    assert losses[-1] < losses[0] * 0.1


def test_init_is_seeded_and_shaped():
    a = small_params(seed=4)
    b = small_params(seed=4)
    c = small_params(seed=5)
    for x, y in zip(flat_views(a), flat_views(b)):
        np.testing.assert_array_equal(x, y)
    assert any(
        not np.array_equal(x, y) for x, y in zip(flat_views(a), flat_views(c))
    )
    assert a.aff_weights[0].shape == (4, 8)
    assert a.aff_weights[-1].shape == (8, 64)
    assert a.att_weights[0].shape == (16, 12)
    assert a.att_weights[-1].shape == (10, 64)
    for bias in (*a.aff_biases, *a.att_biases):
        np.testing.assert_allclose(bias, 0.0)


def test_default_widths():
    params = init_params(seed=0)
    dims_aff = [w.shape for w in params.aff_weights]
    assert dims_aff == [(4, 64), (64, 64), (64, 64), (64, 64)]
    dims_att = [w.shape for w in params.att_weights]
    assert dims_att == [(128, 96), (96, 80), (80, 64)]


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path):
    params = small_params(seed=6)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    assert path.read_bytes()[:8] == b"FAAM0001"
    back = load_checkpoint(path)
    for x, y in zip(flat_views(params), flat_views(back)):
        np.testing.assert_array_equal(x, y)
    feats, _, _ = make_batch()
    rate = encode_known(25.0, rate_dim=16)
    np.testing.assert_array_equal(
        FaamModel(params).score(feats, rate), FaamModel(back).score(feats, rate)
    )


def test_checkpoint_rejects_corruption(tmp_path):
    params = small_params()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params)
    data = bytearray(path.read_bytes())
    data[3] ^= 0x55
    path.write_bytes(bytes(data))
    with pytest.raises(ValueError):
        load_checkpoint(path)

    save_checkpoint(path, params)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learn_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(steps=-1)
    cfg = TrainConfig()
    assert cfg.beta == 1.0
