"""Batch command line driver.

One flat key=value config file describes a whole experiment; every key can
also be passed as a flag of the same name, and flags win. All randomness
derives from the single ``seed`` key, outputs carry no timestamps, and work
is processed in sorted key order, so rerunning a subcommand with the same
config reproduces its output files byte for byte.

Exit codes: 0 on success, 1 for pipeline failures, 2 for config problems
(unknown key, bad value, or a key a subcommand needs but was not given).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .association import affinity_train, match_and_fuse
from .faam import (
    FaamModel,
    TrainConfig,
    TrivialModel,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .framerate_sim import (
    Benchmark,
    ResampledSequence,
    build_benchmark,
    build_dynamic_benchmark,
    gap_stats,
    mean_video_length,
)
from .metrics import (
    FrameIndex,
    aggregate,
    candidate_curve,
    evaluate_video,
    merge_evals,
    result_arrays,
    video_gt_index,
)
from .mot_io import (
    Sequence,
    fmt_num,
    load_sequence,
    parse_results,
    save_sequence,
    write_det,
    write_results,
)
from .mot_io import BoundingBox
from .pts import (
    PtsConfig,
    detections_as_fused,
    generate_patterns,
    run_pts,
    sample_pairs,
)
from .synth_detector import DetectionSource, NoiseModel, write_embeddings
from .tracker import TrackerConfig, track_sequence
from .worldgen import make_benchmark_sequences


class ConfigError(Exception):
    """Raised for config-file or config-key problems (exit code 2)."""


# ---------------------------------------------------------------------------
# config keys


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_str(text: str) -> str:
    return text


def _parse_ints(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


def _parse_floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


@dataclass(frozen=True)
class KeySpec:
    name: str
    parse: Callable[[str], object]
    default: object
    help: str


KEYS: tuple[KeySpec, ...] = (
    # paths
    KeySpec("data_dir", _parse_str, "", "input root of sequence directories"),
    KeySpec("out_dir", _parse_str, "out", "output root for every subcommand"),
    KeySpec("results_dir", _parse_str, "", "tracker output dir for eval (default: out_dir)"),
    KeySpec("checkpoint", _parse_str, "", "association checkpoint path"),
    # benchmark
    KeySpec("k_set", _parse_ints, (1, 2, 4, 8, 16, 25, 36, 50), "sampling factors (k_set)"),
    KeySpec("seed", _parse_int, 0, "root seed; every random stream derives from it"),
    KeySpec("frame_rate_mode", _parse_str, "known", "rate input source: known, unknown or blind"),
    KeySpec("ibdv_criterion", _parse_str, "dist", "unknown-mode pairing rule: dist, sim or random"),
    # synthetic world
    KeySpec("synth_sequences", _parse_int, 0, "generate this many sequences instead of reading data_dir"),
    KeySpec("synth_length", _parse_int, 600, "frames per synthetic sequence"),
    KeySpec("synth_ids", _parse_int, 20, "base identity count per synthetic sequence"),
    KeySpec("width", _parse_int, 1920, "synthetic frame width in pixels"),
    KeySpec("height", _parse_int, 1080, "synthetic frame height in pixels"),
    KeySpec("fps", _parse_float, 25.0, "synthetic capture rate (F)"),
    # detector noise
    KeySpec("center_jitter", _parse_float, 0.0, "center offset std, fraction of box size"),
    KeySpec("size_jitter", _parse_float, 0.0, "log-scale size factor std"),
    KeySpec("miss_prob", _parse_float, 0.0, "chance of dropping a true box"),
    KeySpec("fp_rate", _parse_float, 0.0, "expected false boxes per frame"),
    KeySpec("conf_true_mean", _parse_float, 0.9, "true-detection confidence mean"),
    KeySpec("conf_true_std", _parse_float, 0.0, "true-detection confidence std"),
    KeySpec("conf_false_mean", _parse_float, 0.3, "false-detection confidence mean"),
    KeySpec("conf_false_std", _parse_float, 0.0, "false-detection confidence std"),
    KeySpec("embed_noise", _parse_float, 0.0, "appearance vector perturbation std"),
    # tracker
    KeySpec("conf_low", _parse_float, 0.1, "detection floor (lambda_low)"),
    KeySpec("conf_high", _parse_float, 0.6, "first-stage confidence bound (lambda_high)"),
    KeySpec("score_gate", _parse_float, 0.1, "minimum association score (strict)"),
    KeySpec("max_missing", _parse_int, 30, "frames a track survives unmatched (lambda_i)"),
    KeySpec("iou_pattern_threshold", _parse_float, 0.7, "detection/pattern fusion IoU gate"),
    KeySpec("ema", _parse_float, 0.9, "appearance cache retention per update"),
    # training
    KeySpec("periods", _parse_int, 3, "training periods (N_p)"),
    KeySpec("steps", _parse_int, 400, "SGD steps per period (tau)"),
    KeySpec("learn_rate", _parse_float, 0.1, "association learning rate (lambda_A)"),
    KeySpec("extractor_learn_rate", _parse_float, 0.0, "extractor learning rate (lambda_E); accepted and ignored"),
    KeySpec("beta", _parse_float, 1.0, "association loss weight (beta)"),
    KeySpec("use_patterns", _parse_int, 1, "train against tracker patterns (1) or raw detection pairs (0)"),
    KeySpec("d_embed", _parse_int, 64, "appearance vector dimensionality"),
    KeySpec("rate_dim", _parse_int, 128, "rate encoding length (D_sigma)"),
    KeySpec("rate_scale", _parse_float, 6.0, "known-rate encoding scale (s)"),
    KeySpec("aff_hidden", _parse_ints, (64, 64, 64), "feature branch hidden widths"),
    KeySpec("att_hidden", _parse_ints, (96, 80), "rate branch hidden widths"),
    # evaluation and analysis
    KeySpec("iou_threshold", _parse_float, 0.5, "IoU bound for MOTA/IDF1 matching"),
    KeySpec("r_set", _parse_floats, (1.0, 2.0, 3.0, 5.0), "radius multipliers for analyze-candidates"),
    KeySpec("export_pairs", _parse_int, 100, "frame pairs sampled by export-affinity"),
)

_KEY_BY_NAME = {spec.name: spec for spec in KEYS}


@dataclass
class RunConfig:
    """Resolved configuration: file values overlaid with flag values."""

    values: dict[str, object]

    def __getitem__(self, name: str) -> object:
        return self.values[name]

    def require(self, name: str) -> object:
        value = self.values[name]
        if value in ("", None):
            raise ConfigError(f"missing config key: {name}")
        return value

    def noise_model(self) -> NoiseModel:
        v = self.values
        return NoiseModel(
            center_jitter=v["center_jitter"],
            size_jitter=v["size_jitter"],
            miss_prob=v["miss_prob"],
            fp_rate=v["fp_rate"],
            conf_true=(v["conf_true_mean"], v["conf_true_std"]),
            conf_false=(v["conf_false_mean"], v["conf_false_std"]),
            embed_noise=v["embed_noise"],
        )

    def tracker_config(self) -> TrackerConfig:
        v = self.values
        mode = v["frame_rate_mode"]
        if mode not in ("known", "unknown", "blind"):
            raise ConfigError(
                f"frame_rate_mode must be known, unknown or blind, got {mode!r}"
            )
        return TrackerConfig(
            conf_low=v["conf_low"],
            conf_high=v["conf_high"],
            score_gate=v["score_gate"],
            max_missing=v["max_missing"],
            iou_pattern_threshold=v["iou_pattern_threshold"],
            ema=v["ema"],
            mode=mode,
            ibdv_criterion=v["ibdv_criterion"],
            rate_dim=v["rate_dim"],
            rate_scale=v["rate_scale"],
            seed=v["seed"],
        )

    def pts_config(self) -> PtsConfig:
        v = self.values
        return PtsConfig(
            periods=v["periods"],
            k_set=v["k_set"],
            seed=v["seed"],
            d_embed=v["d_embed"],
            mode=v["frame_rate_mode"],
            ibdv_criterion=v["ibdv_criterion"],
            rate_dim=v["rate_dim"],
            rate_scale=v["rate_scale"],
            use_patterns=bool(v["use_patterns"]),
        )

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(
            learn_rate=v["learn_rate"],
            steps=v["steps"],
            beta=v["beta"],
            seed=v["seed"],
            extractor_learn_rate=v["extractor_learn_rate"],
        )


def parse_config_text(text: str, origin: str) -> dict[str, object]:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin} line {lineno}: expected key=value, got {stripped!r}")
        name, _, raw = stripped.partition("=")
        name = name.strip()
        spec = _KEY_BY_NAME.get(name)
        if spec is None:
            raise ConfigError(f"{origin} line {lineno}: unknown config key: {name}")
        try:
            values[name] = spec.parse(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{origin} line {lineno}: bad value for {name}: {exc}") from exc
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {spec.name: spec.default for spec in KEYS}
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_config_text(path.read_text(), str(path)))
    for spec in KEYS:
        raw = getattr(args, spec.name, None)
        if raw is None:
            continue
        try:
            values[spec.name] = spec.parse(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {spec.name}: {exc}") from exc
    return RunConfig(values)


# ---------------------------------------------------------------------------
# shared plumbing


def load_sequences(cfg: RunConfig) -> list[Sequence]:
    n = int(cfg["synth_sequences"])
    if n > 0:
        return make_benchmark_sequences(
            n,
            n_frames=int(cfg["synth_length"]),
            base_ids=int(cfg["synth_ids"]),
            seed=int(cfg["seed"]),
            width=int(cfg["width"]),
            height=int(cfg["height"]),
            fps=float(cfg["fps"]),
        )
    root = Path(str(cfg.require("data_dir")))
    if not root.is_dir():
        raise ConfigError(f"data_dir is not a directory: {root}")
    dirs = sorted(p for p in root.iterdir() if (p / "seqinfo.txt").is_file())
    if not dirs:
        raise ConfigError(f"data_dir holds no sequence directories: {root}")
    return [load_sequence(p) for p in dirs]


def video_as_sequence(video: ResampledSequence) -> Sequence:
    return Sequence(
        name=video.name,
        fps=video.fps,
        width=video.width,
        height=video.height,
        length=video.length,
        gt=video.gt_entries(),
    )


def _sorted_videos(benchmark: Benchmark) -> list[ResampledSequence]:
    return sorted(benchmark.all_videos(), key=lambda v: (v.parent, v.k, v.offset))


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(str(cfg["out_dir"]))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: str, rows: list[str]) -> None:
    body = "\n".join([header, *rows])
    path.write_text(body + "\n")


def _model_for(cfg: RunConfig, trivial: bool):
    if trivial:
        return TrivialModel()
    params = load_checkpoint(str(cfg.require("checkpoint")))
    if params.rate_dim != int(cfg["rate_dim"]):
        raise ConfigError(
            f"checkpoint rate dimension {params.rate_dim} does not match rate_dim={cfg['rate_dim']}"
        )
    return FaamModel(params)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: RunConfig, dynamic: bool) -> int:
    sequences = load_sequences(cfg)
    k_set = tuple(cfg["k_set"])
    if dynamic:
        benchmark = build_dynamic_benchmark(sequences, k_set, seed=int(cfg["seed"]))
    else:
        benchmark = build_benchmark(sequences, k_set)
    out = _out_dir(cfg)

    manifest: list[str] = []
    for video in _sorted_videos(benchmark):
        save_sequence(
            out,
            video_as_sequence(video),
            extra={"k": video.k, "offset": video.offset, "effective_fps": video.fps},
        )
        manifest.append(
            f"{video.name},{video.parent},{video.k},{video.offset},"
            f"{video.length},{fmt_num(video.fps)}"
        )
    _write_csv(out / "decomposition.csv", "name,parent,k,offset,length,effective_fps", manifest)

    stats: list[str] = []
    for seq in benchmark.sequences:
        for k in benchmark.k_set:
            videos = benchmark.videos[(seq.name, k)]
            row = f"{seq.name},{k},{len(videos)},{mean_video_length(videos)}"
            try:
                gaps = gap_stats(videos, seq.fps)
                row += (
                    f",{fmt_num(gaps.mean_frames)},{fmt_num(gaps.median_frames)},"
                    f"{fmt_num(gaps.mean_ms)},{fmt_num(gaps.median_ms)}"
                )
            except ValueError:
                row += ",,,,"
            stats.append(row)
    _write_csv(
        out / "factor_stats.csv",
        "sequence,k,videos,mean_length,gap_mean_frames,gap_median_frames,gap_mean_ms,gap_median_ms",
        stats,
    )
    print(f"wrote {len(manifest)} videos under {out}")
    return 0


def cmd_gen_detections(cfg: RunConfig) -> int:
    sequences = load_sequences(cfg)
    benchmark = build_benchmark(sequences, tuple(cfg["k_set"]))
    source = DetectionSource(
        sequences, cfg.noise_model(), d_embed=int(cfg["d_embed"]), seed=int(cfg["seed"])
    )
    out = _out_dir(cfg)

    manifest: list[str] = []
    for video in _sorted_videos(benchmark):
        seq_dir = save_sequence(
            out,
            video_as_sequence(video),
            extra={"k": video.k, "offset": video.offset, "effective_fps": video.fps},
        )
        det_dir = seq_dir / "det"
        det_dir.mkdir(exist_ok=True)
        frames: dict[int, list[tuple[BoundingBox, float]]] = {}
        embeds: list[np.ndarray] = []
        n_det = 0
        for j in range(1, video.length + 1):
            dets = source.frame(video.parent, int(video.frame_map[j - 1]))
            frames[j] = [
                (BoundingBox(*box), float(conf))
                for box, conf in zip(dets.boxes, dets.confs)
            ]
            embeds.append(dets.embeddings)
            n_det += len(dets)
        (det_dir / "det.txt").write_text(write_det(frames))
        stacked = (
            np.concatenate(embeds, axis=0)
            if embeds
            else np.zeros((0, source.d_embed))
        )
        write_embeddings(det_dir / "embeddings.bin", stacked)
        manifest.append(f"{video.name},{video.length},{n_det}")
    _write_csv(out / "detections.csv", "name,frames,detections", manifest)
    print(f"wrote detections for {len(manifest)} videos under {out}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    sequences = load_sequences(cfg)
    benchmark = build_benchmark(sequences, tuple(cfg["k_set"]))
    noise = cfg.noise_model()
    source = DetectionSource(
        sequences, noise, d_embed=int(cfg["d_embed"]), seed=int(cfg["seed"])
    )
    params = init_params(
        seed=int(cfg["seed"]),
        feat_dim=4,
        rate_dim=int(cfg["rate_dim"]),
        aff_hidden=tuple(cfg["aff_hidden"]),
        att_hidden=tuple(cfg["att_hidden"]),
    )
    params, logs = run_pts(
        cfg.pts_config(),
        benchmark,
        noise,
        cfg.train_config(),
        tracker_config=cfg.tracker_config(),
        detections=source,
        params=params,
    )
    out = _out_dir(cfg)
    ckpt = cfg["checkpoint"] or str(out / "faam.ckpt")
    Path(ckpt).parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, params)
    log_path = out / "train_log.json"
    log_path.write_text(
        json.dumps({"periods": [log.as_dict() for log in logs]}, indent=2, sort_keys=True)
        + "\n"
    )
    done = sum(log.steps for log in logs)
    print(f"trained {len(logs)} periods ({done} steps), wrote {ckpt} and {log_path}")
    return 0


def cmd_track(cfg: RunConfig, trivial: bool) -> int:
    sequences = load_sequences(cfg)
    benchmark = build_benchmark(sequences, tuple(cfg["k_set"]))
    source = DetectionSource(
        sequences, cfg.noise_model(), d_embed=int(cfg["d_embed"]), seed=int(cfg["seed"])
    )
    model = _model_for(cfg, trivial)
    tracker_cfg = cfg.tracker_config()
    out = _out_dir(cfg)

    count = 0
    for video in _sorted_videos(benchmark):
        result, _ = track_sequence(
            video,
            lambda f, name=video.parent: source.frame(name, f),
            model,
            tracker_cfg,
            source.d_embed,
        )
        (out / f"{video.name}.txt").write_text(write_results(result))
        count += 1
    print(f"tracked {count} videos into {out}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    sequences = load_sequences(cfg)
    benchmark = build_benchmark(sequences, tuple(cfg["k_set"]))
    results_dir = Path(str(cfg["results_dir"] or cfg["out_dir"]))
    iou_threshold = float(cfg["iou_threshold"])

    by_seq_k: dict[tuple[str, int], list] = {}
    for video in _sorted_videos(benchmark):
        pred_path = results_dir / f"{video.name}.txt"
        if not pred_path.is_file():
            raise FileNotFoundError(f"missing result file: {pred_path}")
        pred = FrameIndex(*result_arrays(parse_results(pred_path.read_text())))
        ev = evaluate_video(video_gt_index(video), pred, iou_threshold)
        by_seq_k.setdefault((video.parent, video.k), []).append(ev)

    rows: list[str] = []
    per_k: dict[int, list] = {}
    for (seq_name, k), evals in sorted(by_seq_k.items()):
        merged = merge_evals(evals)
        per_k.setdefault(k, []).extend(evals)
        for metric, value in sorted(merged.scores().items()):
            rows.append(f"{seq_name},{k},{metric},{fmt_num(round(value, 6))}")

    summary = aggregate({k: merge_evals(evs) for k, evs in per_k.items()})
    out = _out_dir(cfg)
    _write_csv(out / "eval.csv", "sequence,k,metric,value", rows)
    (out / "summary.json").write_text(
        json.dumps(summary.as_dict(), indent=2, sort_keys=True) + "\n"
    )
    print(
        f"mHOTA={summary.mhota:.4f} mMOTA={summary.mmota:.4f} "
        f"mIDF1={summary.midf1:.4f} VR={summary.vr:.4f}"
    )
    return 0


def cmd_analyze_candidates(cfg: RunConfig) -> int:
    sequences = load_sequences(cfg)
    rows = candidate_curve(sequences, tuple(cfg["k_set"]), tuple(cfg["r_set"]))
    out = _out_dir(cfg)
    _write_csv(
        out / "candidates.csv",
        "k,r,mean_candidates",
        [f"{k},{fmt_num(r)},{fmt_num(round(mean, 6))}" for k, r, mean in rows],
    )
    print(f"wrote {len(rows)} candidate rows to {out / 'candidates.csv'}")
    return 0


def cmd_export_affinity(cfg: RunConfig) -> int:
    sequences = load_sequences(cfg)
    benchmark = build_benchmark(sequences, tuple(cfg["k_set"]))
    source = DetectionSource(
        sequences, cfg.noise_model(), d_embed=int(cfg["d_embed"]), seed=int(cfg["seed"])
    )
    model = _model_for(cfg, trivial=not cfg["checkpoint"])
    tracker_cfg = cfg.tracker_config()

    rng = np.random.default_rng(np.random.SeedSequence([int(cfg["seed"]), 17]))
    draws = sample_pairs(benchmark, tuple(cfg["k_set"]), int(cfg["export_pairs"]), rng)
    needed: dict[tuple[str, int, int], set[int]] = {}
    for draw in draws:
        if draw.valid:
            needed.setdefault(
                (draw.seq_name, draw.video.k, draw.video.offset), set()
            ).add(draw.frame)
    store = generate_patterns(model, benchmark, source, tracker_cfg, restrict=needed)

    rows: list[str] = []
    for draw in draws:
        if not draw.valid:
            continue
        video = draw.video
        dets_here = source.frame(draw.seq_name, int(video.frame_map[draw.frame - 1]))
        dets_next = source.frame(draw.seq_name, int(video.frame_map[draw.frame]))
        variants = []
        slice_ = store.slice_at(draw.seq_name, video.k, video.offset, draw.frame)
        if slice_ is not None:
            variants.append(
                (
                    1,
                    match_and_fuse(
                        dets_here.boxes,
                        dets_here.embeddings,
                        dets_here.oracle_ids,
                        slice_,
                        iou_threshold=tracker_cfg.iou_pattern_threshold,
                    ),
                )
            )
        variants.append((0, detections_as_fused(dets_here)))
        for flag, fused in variants:
            feats, labels, mask = affinity_train(
                fused,
                dets_next.boxes,
                dets_next.embeddings,
                dets_next.oracle_ids,
                video.width,
                video.height,
            )
            for i, j in zip(*np.nonzero(mask)):
                z = feats[i, j]
                rows.append(
                    f"{fmt_num(round(z[0], 6))},{fmt_num(round(z[1], 6))},"
                    f"{fmt_num(round(z[2], 6))},{fmt_num(z[3])},"
                    f"{int(labels[i, j])},{flag}"
                )
    out = _out_dir(cfg)
    _write_csv(out / "affinity.csv", "norm_dist,iou,cos_sim,level,label,pts_flag", rows)
    print(f"wrote {len(rows)} affinity rows to {out / 'affinity.csv'}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _key_lines() -> str:
    lines = ["config keys (file and flag forms share names; flags win):"]
    for spec in KEYS:
        if isinstance(spec.default, tuple):
            default = ",".join(str(v) for v in spec.default)
        else:
            default = str(spec.default)
        lines.append(f"  {spec.name:<22} default {default:<18} {spec.help}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratemot",
        description="Frame-rate-agnostic tracking pipeline, batch interface.",
        epilog=_key_lines(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": "decompose sequences into lower-rate videos by regular striding",
        "dynsim": "decompose sequences with randomized frame assignment",
        "gen-detections": "write synthetic detections and appearance vectors",
        "train": "train the association network periodically against its tracker",
        "track": "run the two-stage tracker over a benchmark",
        "eval": "score tracker results and write per-factor reports",
        "analyze-candidates": "count association candidates as gaps grow",
        "export-affinity": "dump affinity features for matched/unmatched pairs",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(
            name,
            help=help_text,
            epilog=_key_lines(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument(
            "--jobs",
            type=int,
            default=1,
            help="worker cap; this build processes work sequentially in sorted key order",
        )
        if name == "track":
            p.add_argument(
                "--trivial",
                action="store_true",
                help="use the fixed IoU/similarity blend instead of a checkpoint",
            )
        for spec in KEYS:
            p.add_argument(f"--{spec.name}", default=None, metavar="V", help=spec.help)
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg, dynamic=False)
        if args.command == "dynsim":
            return cmd_simulate(cfg, dynamic=True)
        if args.command == "gen-detections":
            return cmd_gen_detections(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "track":
            return cmd_track(cfg, trivial=bool(getattr(args, "trivial", False)))
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "analyze-candidates":
            return cmd_analyze_candidates(cfg)
        if args.command == "export-affinity":
            return cmd_export_affinity(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline failures map to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
