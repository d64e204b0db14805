"""End-to-end acceptance suite.

Every test here covers one numbered acceptance criterion and prints a single
summary line (even under captured output) of the form

    [criterion 04] PASS  gradient check ...  3.2s / budget 10s

The line states the enforced tolerance; the assertions behind it are in the
test body. Tests are ordered so the cheap exact checks run before the long
benchmark runs. The heavyweight fixtures (synthetic benchmark, trained
checkpoints) are module-scoped and shared between criteria.
"""

import time

import numpy as np
import pytest

from test_faam import flat_views, make_batch, numeric_grad, small_params
from test_metrics import (
    box,
    clear_reference,
    hota_reference,
    idf1_reference,
    random_case,
    swap_case,
    to_index,
)

from ratemot.assignment import FORBIDDEN, solve
from ratemot.faam import (
    FaamModel,
    TrainConfig,
    TrivialModel,
    encode_ibdv,
    encode_known,
    loss_and_grads,
)
from ratemot.framerate_sim import (
    build_benchmark,
    mean_video_length,
    resample,
)
from ratemot.metrics import (
    FrameIndex,
    aggregate,
    clear_mot,
    evaluate_video,
    hota,
    idf1,
    merge_evals,
    result_arrays,
    video_gt_index,
)
from ratemot.pts import PtsConfig, run_pts
from ratemot.synth_detector import DetectionSource, NoiseModel
from ratemot.tracker import TrackerConfig, track_sequence
from ratemot.worldgen import make_benchmark_sequences, make_sequence

# ---------------------------------------------------------------------------
# shared configuration

K_SET = (1, 2, 4, 8, 16, 25, 36, 50)
D_EMBED = 64

# The benchmark noise level used by the directional criteria: visible center
# jitter, clutter with mid confidence, appearance vectors perturbed enough
# that similarity alone cannot carry association.
BENCH_NOISE = NoiseModel(
    center_jitter=0.02,
    miss_prob=0.0,
    fp_rate=0.5,
    conf_true=(0.85, 0.1),
    conf_false=(0.3, 0.0),
    embed_noise=0.4,
)


def report(capsys, num, verdict, title, elapsed, budget):
    with capsys.disabled():
        print(
            f"\n[criterion {num:02d}] {verdict:4s} {title}  "
            f"{elapsed:.1f}s / budget {budget:.0f}s"
        )


def finish(capsys, num, title, t0, budget, problems):
    elapsed = time.perf_counter() - t0
    if elapsed >= budget:
        problems.append(f"wall time {elapsed:.1f}s over budget {budget:.0f}s")
    verdict = "PASS" if not problems else "FAIL"
    report(capsys, num, verdict, title, elapsed, budget)
    assert not problems, "; ".join(problems)


# ---------------------------------------------------------------------------
# shared fixtures (built lazily, reused by the directional criteria)


@pytest.fixture(scope="module")
def bench():
    return make_benchmark_sequences(seed=0)


@pytest.fixture(scope="module")
def source(bench):
    return DetectionSource(bench, BENCH_NOISE, d_embed=D_EMBED, seed=0)


@pytest.fixture(scope="module")
def gt_indices():
    """Cache of per-video ground-truth frame indices, shared across runs."""
    return {}


def run_benchmark(bench, source, model, mode, gt_indices, eval_seed=0):
    """Track the whole benchmark with one model; returns the aggregate."""
    per_k = {}
    for k in K_SET:
        evals = []
        for seq in bench:
            fetch = (lambda name: lambda f: source.frame(name, f))(seq.name)
            for vid in resample(seq, k):
                cfg = TrackerConfig(mode=mode, seed=eval_seed)
                result, _ = track_sequence(vid, fetch, model, cfg, D_EMBED)
                key = (seq.name, k, vid.offset)
                gt = gt_indices.get(key)
                if gt is None:
                    gt = video_gt_index(vid)
                    gt_indices[key] = gt
                pred = FrameIndex(*result_arrays(result))
                evals.append(evaluate_video(gt, pred))
        per_k[k] = merge_evals(evals)
    return aggregate(per_k)


# ---------------------------------------------------------------------------
# criterion 1: resampling partitions frames and hits the frozen mean lengths


def test_accept_01_resampling_partition_and_lengths(capsys):
    t0 = time.perf_counter()
    problems = []
    frozen_means = {(10, 2): 5, (759, 2): 380, (759, 16): 47, (759, 25): 30, (759, 50): 15}
    for (n_frames, k), want_mean in frozen_means.items():
        seq = make_sequence("accept1", n_frames=n_frames, n_ids=3, seed=11)
        videos = resample(seq, k)
        if len(videos) != k:
            problems.append(f"N={n_frames} k={k}: expected {k} videos, got {len(videos)}")
            continue
        covered = np.concatenate([v.frame_map for v in videos])
        if covered.size != n_frames or set(covered.tolist()) != set(range(1, n_frames + 1)):
            problems.append(f"N={n_frames} k={k}: frame maps are not a partition of 1..N")
        lo, hi = n_frames // k, -(-n_frames // k)
        lengths = sorted(v.length for v in videos)
        if not all(ln in (lo, hi) for ln in lengths):
            problems.append(f"N={n_frames} k={k}: lengths {lengths} outside {{{lo},{hi}}}")
        got_mean = mean_video_length(videos)
        if got_mean != want_mean:
            problems.append(f"N={n_frames} k={k}: mean length {got_mean} != {want_mean}")
    finish(
        capsys, 1,
        "resampling partition, length bounds, frozen mean lengths (exact)",
        t0, 1.0, problems,
    )


# ---------------------------------------------------------------------------
# criterion 2: assignment agrees with an exhaustive reference


def dp_reference(costs, allowed):
    """Bitmask sweep: maximum matched pairs first, then minimum total cost.

    Independent of both the production solver and the recursive reference in
    the assignment unit tests.
    """
    m, n = costs.shape
    best = {0: (0, 0.0)}
    for row in range(m):
        nxt = dict(best)
        for mask, (count, cost) in best.items():
            for col in range(n):
                bit = 1 << col
                if mask & bit or not allowed[row, col]:
                    continue
                cand = (count + 1, cost + costs[row, col])
                cur = nxt.get(mask | bit)
                if cur is None or (-cand[0], cand[1]) < (-cur[0], cur[1]):
                    nxt[mask | bit] = cand
        best = nxt
    count, cost = max(best.values(), key=lambda v: (v[0], -v[1]))
    return count, cost


def test_accept_02_assignment_matches_exhaustive_search(capsys):
    t0 = time.perf_counter()
    problems = []
    rng = np.random.default_rng(20)
    for trial in range(1000):
        m = int(rng.integers(0, 7))
        n = int(rng.integers(0, 7))
        costs = rng.uniform(-10, 10, size=(m, n))
        allowed = rng.random((m, n)) > 0.25
        matrix = np.where(allowed, costs, FORBIDDEN)
        pairs = solve(matrix)
        got_count = len(pairs)
        got_cost = float(sum(costs[r, c] for r, c in pairs))
        if any(not allowed[r, c] for r, c in pairs):
            problems.append(f"trial {trial}: solver used a forbidden entry")
            break
        want_count, want_cost = dp_reference(costs, allowed)
        if got_count != want_count or abs(got_cost - want_cost) > 1e-9:
            problems.append(
                f"trial {trial}: ({got_count}, {got_cost:.12f}) != "
                f"({want_count}, {want_cost:.12f})"
            )
            break
    finish(
        capsys, 2,
        "assignment optimal on 1000 random matrices up to 6x6 (cost tol 1e-9)",
        t0, 10.0, problems,
    )


# ---------------------------------------------------------------------------
# criterion 3: metric implementations match brute-force references


def reference_hota_scalar(tp, fp, fn, assoc):
    """Scalar from reference count arrays, using the published conventions."""
    denom = tp + fp + fn
    deta = np.where(denom > 0, np.divide(tp, denom, where=denom > 0), 1.0)
    assa = np.where(
        tp > 0,
        np.divide(assoc, tp, where=tp > 0),
        np.where(denom == 0, 1.0, 0.0),
    )
    return float(np.sqrt(deta * assa).mean())


def test_accept_03_metric_oracles(capsys):
    t0 = time.perf_counter()
    problems = []
    alphas = np.round(np.arange(0.05, 0.951, 0.05), 2)
    rng = np.random.default_rng(30)
    for case in range(200):
        gt_rows, pred_rows = random_case(rng)
        gt, pred = to_index(gt_rows), to_index(pred_rows)

        ref_fp, ref_fn, ref_idsw, ref_gt = clear_reference(gt_rows, pred_rows)
        got = clear_mot(gt, pred)
        if (got.fp, got.fn, got.idsw, got.num_gt) != (ref_fp, ref_fn, ref_idsw, ref_gt):
            problems.append(f"case {case}: clear counts mismatch")
        elif ref_gt > 0:
            ref_mota = 1.0 - (ref_fp + ref_fn + ref_idsw) / ref_gt
            if abs(got.mota - ref_mota) > 1e-9:
                problems.append(f"case {case}: mota off by {got.mota - ref_mota}")

        idtp, n_gt, n_pred = idf1_reference(gt_rows, pred_rows)
        ref_idf1 = 1.0 if (n_gt + n_pred) == 0 else 2.0 * idtp / (n_gt + n_pred)
        if abs(idf1(gt, pred).idf1 - ref_idf1) > 1e-9:
            problems.append(f"case {case}: idf1 mismatch")

        got_h = hota(gt, pred, alphas)
        tp, hfp, hfn, assoc = hota_reference(gt_rows, pred_rows, alphas)
        if (
            not np.array_equal(got_h.tp, tp)
            or not np.array_equal(got_h.fp, hfp)
            or not np.array_equal(got_h.fn, hfn)
            or not np.allclose(got_h.assoc, assoc, atol=1e-9)
        ):
            problems.append(f"case {case}: hota counts mismatch")
        elif abs(got_h.hota - reference_hota_scalar(tp, hfp, hfn, assoc)) > 1e-9:
            problems.append(f"case {case}: hota scalar mismatch")
        if problems:
            break

    # Hand-derived spot checks.
    gt_rows, pred_rows = swap_case()
    got = clear_mot(to_index(gt_rows), to_index(pred_rows))
    if (got.fp, got.fn, got.idsw, got.num_gt) != (0, 0, 2, 8):
        problems.append("swap case: clear counts diverge from the hand derivation")
    if abs(got.mota - 0.75) > 1e-12:
        problems.append(f"swap case: mota {got.mota} != 0.75")

    # Ten boxes, one false positive, two misses, one identity switch.
    gt_rows = [(f, 1, box(0, 0)) for f in range(1, 6)] + [
        (f, 2, box(40, 0)) for f in range(1, 6)
    ]
    pred_rows = (
        [(f, 1, box(0, 0)) for f in range(1, 5)]
        + [(5, 9, box(0, 0))]
        + [(f, 2, box(40, 0)) for f in range(1, 4)]
        + [(5, 7, box(80, 40))]
    )
    got = clear_mot(to_index(gt_rows), to_index(pred_rows))
    if (got.fp, got.fn, got.idsw) != (1, 2, 1) or abs(got.mota - 0.6) > 1e-12:
        problems.append(
            f"arithmetic case: fp/fn/idsw {got.fp}/{got.fn}/{got.idsw} mota {got.mota}"
        )

    # Half-coverage with consistent ids: identity F1 is 2/3.
    gt_rows = [(f, i, box(30 * i, 0)) for i in (1, 2) for f in range(1, 9)]
    pred_rows = [(f, i, box(30 * i, 0)) for i in (1, 2) for f in range(1, 5)]
    if abs(idf1(to_index(gt_rows), to_index(pred_rows)).idf1 - 2 / 3) > 1e-12:
        problems.append("half-coverage idf1 is not 2/3")

    # One trajectory split into two perfect halves: every alpha gives
    # DetA 1 and AssA 1/2, so the mean over alphas is sqrt(0.5).
    gt_rows = [(f, 1, box(0, 0)) for f in range(1, 9)]
    pred_rows = [(f, 1 if f <= 4 else 2, box(0, 0)) for f in range(1, 9)]
    got_h = hota(to_index(gt_rows), to_index(pred_rows), alphas)
    if abs(got_h.hota - np.sqrt(0.5)) > 1e-12:
        problems.append(f"split-half hota {got_h.hota} != sqrt(0.5)")

    # Identical prediction scores 1.0 on all three metrics.
    gt_rows, _ = random_case(np.random.default_rng(77))
    if gt_rows:
        gt = to_index(gt_rows)
        ev = evaluate_video(gt, gt)
        scores = ev.scores()
        if not all(abs(scores[m] - 1.0) <= 1e-12 for m in ("mota", "idf1", "hota")):
            problems.append("pred == gt does not score 1.0 across metrics")

    finish(
        capsys, 3,
        "clear/idf1/hota match exhaustive references, 200 cases (tol 1e-9)",
        t0, 30.0, problems,
    )


# ---------------------------------------------------------------------------
# criterion 4: analytic gradients match central finite differences


def test_accept_04_gradient_check(capsys):
    t0 = time.perf_counter()
    problems = []
    for source_name in ("known", "ibdv"):
        params = small_params(seed=41)
        feats, labels, mask = make_batch(seed=42, n=14)
        if source_name == "known":
            rate = encode_known(8.0, rate_dim=16)
        else:
            rng = np.random.default_rng(43)
            prev = np.column_stack(
                [rng.uniform(0, 900, 6), rng.uniform(0, 500, 6),
                 rng.uniform(5, 30, 6), rng.uniform(5, 30, 6)]
            )
            cur = prev + rng.normal(0, 12, prev.shape)
            cur[:, 2:] = np.abs(cur[:, 2:]) + 1
            rate = encode_ibdv(
                prev, rng.normal(size=(6, 4)), cur, rng.normal(size=(6, 4)),
                1000.0, 600.0, length=16,
            )
        beta = 1.1
        _, grads = loss_and_grads(params, feats, rate, labels, mask, beta)
        param_arrays = flat_views(params)
        grad_arrays = flat_views(grads)
        rng = np.random.default_rng(44)
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
                continue
            worst = max(worst, abs(num - ana) / scale)
            checked += 1
        if worst >= 1e-4:
            problems.append(f"{source_name}: worst relative error {worst:.2e}")
    finish(
        capsys, 4,
        "gradients vs central differences, 50 probes per rate source (rel err < 1e-4)",
        t0, 10.0, problems,
    )


# ---------------------------------------------------------------------------
# criterion 9: the aggregate reproduces the vulnerability ratio endpoints


def test_accept_09_vulnerability_ratio_arithmetic(capsys):
    t0 = time.perf_counter()
    problems = []

    class Fixed:
        def __init__(self, h):
            self.h = h

        def scores(self):
            return {"mota": self.h, "idf1": self.h, "hota": self.h,
                    "fp": 0.0, "fn": 0.0, "idsw": 0.0}

    per_k = {1: Fixed(0.655), 8: Fixed(0.60), 16: Fixed(0.55),
             25: Fixed(0.52), 50: Fixed(0.464)}
    summary = aggregate(per_k)
    vr_pct = 100.0 * summary.vr
    if abs(vr_pct - 29.2) > 0.2:
        problems.append(f"VR {vr_pct:.3f}% not within 0.2 of 29.2%")
    flat = aggregate({1: Fixed(0.5), 50: Fixed(0.5)})
    if flat.vr != 0.0 or abs(flat.mhota - 0.5) > 1e-12:
        problems.append("flat per-k curve should give VR 0 and mHOTA equal to the level")
    halved = aggregate({1: Fixed(0.8), 50: Fixed(0.4)})
    if abs(halved.vr - 0.5) > 1e-12:
        problems.append("endpoints 0.8/0.4 should give VR 0.5")
    finish(
        capsys, 9,
        "vulnerability ratio from per-factor endpoints 65.5/46.4 (within 0.2 of 29.2%)",
        t0, 1.0, problems,
    )


# ---------------------------------------------------------------------------
# criterion 10: displacement-vector encoding properties


def test_accept_10_displacement_encoding_properties(capsys):
    t0 = time.perf_counter()
    problems = []
    rng = np.random.default_rng(100)
    width, height = 1280.0, 720.0

    boxes = np.column_stack(
        [rng.uniform(0, 1200, 12), rng.uniform(0, 650, 12),
         rng.uniform(6, 40, 12), rng.uniform(6, 40, 12)]
    )
    embeds = rng.normal(size=(12, 8))
    for crit in ("dist", "sim"):
        vec = encode_ibdv(boxes, embeds, boxes, embeds, width, height,
                          criterion=crit, length=32)
        if not np.allclose(vec, 0.0, atol=1e-12):
            problems.append(f"{crit}: identical frames do not encode to zero")

    for count in range(1, 51):
        b = np.column_stack(
            [rng.uniform(0, 1200, count), rng.uniform(0, 650, count),
             rng.uniform(6, 40, count), rng.uniform(6, 40, count)]
        )
        e = rng.normal(size=(count, 8))
        b2 = b + rng.normal(0, 5, b.shape)
        b2[:, 2:] = np.abs(b2[:, 2:]) + 1
        for crit in ("dist", "sim", "random"):
            vec = encode_ibdv(
                b, e, b2, e, width, height, criterion=crit, length=32,
                rng=np.random.default_rng(count),
            )
            if vec.shape != (32,):
                problems.append(f"{crit}: count {count} gives shape {vec.shape}")
            if np.any(np.diff(vec) < -1e-12):
                problems.append(f"{crit}: count {count} output is not sorted")
        if problems:
            break

    b = np.column_stack(
        [rng.uniform(0, 1200, 9), rng.uniform(0, 650, 9),
         rng.uniform(6, 40, 9), rng.uniform(6, 40, 9)]
    )
    e = rng.normal(size=(9, 8))
    b2 = b + rng.normal(0, 8, b.shape)
    b2[:, 2:] = np.abs(b2[:, 2:]) + 1
    e2 = e + rng.normal(0, 0.1, e.shape)
    perm = rng.permutation(9)
    for crit in ("dist", "sim"):
        direct = encode_ibdv(b, e, b2, e2, width, height, criterion=crit, length=32)
        shuffled = encode_ibdv(
            b, e, b2[perm], e2[perm], width, height, criterion=crit, length=32
        )
        if not np.allclose(direct, shuffled, atol=1e-12):
            problems.append(f"{crit}: output changes when the later frame is permuted")
    finish(
        capsys, 10,
        "displacement encoding: zero on identity, fixed length, order-free, sorted (exact)",
        t0, 5.0, problems,
    )


# ---------------------------------------------------------------------------
# criterion 5: perfect detections at full rate track perfectly


def test_accept_05_perfect_input_sanity(capsys, bench, gt_indices):
    t0 = time.perf_counter()
    problems = []
    clean = DetectionSource(bench, NoiseModel(), d_embed=D_EMBED, seed=0)
    model = TrivialModel()
    for seq in bench:
        vid = resample(seq, 1)[0]
        fetch = (lambda name: lambda f: clean.frame(name, f))(seq.name)
        result, _ = track_sequence(
            vid, fetch, model, TrackerConfig(mode="known", seed=0), D_EMBED
        )
        ev = evaluate_video(video_gt_index(vid), FrameIndex(*result_arrays(result)))
        scores = ev.scores()
        for metric in ("mota", "idf1", "hota"):
            if abs(scores[metric] - 1.0) > 1e-12:
                problems.append(f"{seq.name}: {metric} = {scores[metric]:.6f}")
    finish(
        capsys, 5,
        "zero noise, full rate, fixed-blend scorer: mota=idf1=hota=1.0 (tol 1e-12)",
        t0, 30.0, problems,
    )


# ---------------------------------------------------------------------------
# criterion 6: tracking quality decays with the sampling factor


def test_accept_06_degradation_monotone_and_vulnerable(capsys, bench, source, gt_indices):
    t0 = time.perf_counter()
    problems = []
    trivial_summary = run_benchmark(bench, source, TrivialModel(), "unknown", gt_indices)
    ks = sorted(trivial_summary.per_k)
    if ks != sorted(K_SET):
        problems.append(f"per-factor curve covers {ks}, expected {sorted(K_SET)}")
    hotas = [trivial_summary.per_k[k]["hota"] for k in ks]
    for a, b, ka, kb in zip(hotas, hotas[1:], ks, ks[1:]):
        if b > a:
            problems.append(f"HOTA rises from k={ka} ({a:.5f}) to k={kb} ({b:.5f})")
    if trivial_summary.vr <= 0.15:
        problems.append(f"VR {trivial_summary.vr:.4f} not above 0.15")
    finish(
        capsys, 6,
        "fixed-blend tracker: per-factor HOTA non-increasing, VR > 0.15",
        t0, 300.0, problems,
    )
