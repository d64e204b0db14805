"""Frame-rate-agnostic multi-object tracking on synthetic desk-scale data.

The pipeline: decompose sequences into lower-rate videos, synthesize
detections with controllable noise, train a small association network
periodically against the tracker's own patterns, track, and score with
frame-rate-agnostic aggregates.
"""

from .assignment import FORBIDDEN, solve
from .association import (
    FusedSet,
    PatternSlice,
    TrackingPattern,
    affinity_infer,
    affinity_train,
    iou,
    iou_matrix,
    match_and_fuse,
    normalized_distance,
    normalized_distance_matrix,
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
    load_checkpoint,
    save_checkpoint,
    train_step,
    trivial_score,
)
from .framerate_sim import (
    DEFAULT_K_SET,
    Benchmark,
    GapStats,
    ResampledSequence,
    build_benchmark,
    build_dynamic_benchmark,
    dynamic_resample,
    gap_stats,
    mean_video_length,
    resample,
)
from .metrics import (
    AggregateResult,
    ClearCounts,
    FrameIndex,
    HotaCounts,
    Idf1Counts,
    VideoEval,
    aggregate,
    candidate_curve,
    clear_mot,
    evaluate_video,
    hota,
    idf1,
    merge_evals,
    result_arrays,
    video_gt_index,
)
from .mot_io import (
    BoundingBox,
    GtEntry,
    ParseError,
    Sequence,
    TrackResult,
    ValidationError,
    load_sequence,
    parse_det,
    parse_gt,
    parse_results,
    save_sequence,
    write_det,
    write_gt,
    write_results,
)
from .motion_model import kf_init, kf_predict, kf_update
from .pts import (
    PatternStore,
    PeriodLog,
    PtsConfig,
    generate_patterns,
    load_store,
    run_pts,
    save_store,
)
from .synth_detector import (
    DetectionSource,
    FrameDetections,
    IdentityBank,
    NoiseModel,
    detect_frame,
    make_identity_bank,
    read_embeddings,
    write_embeddings,
)
from .tracker import TrackerConfig, track_sequence
from .worldgen import make_benchmark_sequences, make_sequence

__version__ = "0.1.0"
