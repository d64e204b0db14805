"""Train the association network with the periodic scheme, at toy scale.

Each period first runs the current tracker over every video of the training
benchmark to record its patterns (where tracks were, what the motion model
predicted next, which appearance the track cache held, and the confidence
level), then fits the network to detection/pattern pairs sampled from those
records. Period one has no checkpoint yet, so its patterns come from the
fixed IoU/similarity blend; later periods regenerate them with the newest
weights. The point of the exercise: the network trains against the tracker
states it will actually meet at inference, stale predictions and all.

Run:
    python demos/demo_training.py
    python demos/demo_training.py --periods 3 --steps 150 --mode known
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from ratemot.faam import FaamModel, TrainConfig, load_checkpoint, save_checkpoint
from ratemot.framerate_sim import build_benchmark
from ratemot.pts import PtsConfig, run_pts
from ratemot.synth_detector import NoiseModel
from ratemot.worldgen import make_benchmark_sequences


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", type=int, default=2)
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--mode", default="unknown", choices=("known", "unknown", "blind"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--raw-pairs", action="store_true",
                    help="train on raw detection pairs instead of tracker patterns")
    args = ap.parse_args()

    sequences = make_benchmark_sequences(n_sequences=2, n_frames=100, base_ids=8,
                                         seed=args.seed)
    k_set = (1, 2, 4)
    benchmark = build_benchmark(sequences, k_set)
    noise = NoiseModel(center_jitter=0.02, fp_rate=0.5, conf_true=(0.85, 0.1),
                       conf_false=(0.3, 0.0), embed_noise=0.25)

    pts = PtsConfig(
        periods=args.periods,
        k_set=k_set,
        seed=args.seed,
        d_embed=64,
        mode=args.mode,
        use_patterns=not args.raw_pairs,
    )
    train = TrainConfig(learn_rate=0.1, steps=args.steps, seed=args.seed)

    style = "raw detection pairs" if args.raw_pairs else "tracker patterns"
    print(f"training on {style}, {args.periods} periods x {args.steps} steps, "
          f"rate mode {args.mode!r}")
    params, logs = run_pts(pts, benchmark, noise, train)

    for log in logs:
        losses = np.asarray(log.losses)
        head = losses[:10].mean() if losses.size >= 10 else losses.mean()
        tail = losses[-10:].mean() if losses.size >= 10 else losses.mean()
        print(f"  period {log.period}: {log.steps} steps, "
              f"loss {head:.4f} -> {tail:.4f} (first/last 10-step mean), "
              f"{log.skipped} skipped draws, {log.pattern_rows} pattern rows")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "assoc.ckpt"
        save_checkpoint(path, params)
        reloaded = load_checkpoint(path)
        rng = np.random.default_rng(1)
        feats = np.column_stack([
            rng.uniform(0, 1.5, 6), rng.uniform(0, 1, 6),
            rng.uniform(-1, 1, 6), rng.integers(1, 3, 6).astype(float) - 1,
        ])[None]
        from ratemot.faam import encode_known
        rate = encode_known(12.5, params.rate_dim)
        a = FaamModel(params).score(feats, rate)
        b = FaamModel(reloaded).score(feats, rate)
        assert np.array_equal(a, b)
        print(f"\ncheckpoint round-trip at {path.name}: scores identical (checked)")
        print(f"sample association scores for six random pairs: "
              + " ".join(f"{v:.3f}" for v in a[0]))


if __name__ == "__main__":
    main()
