"""Multi-rate temporal video compression: rate planning, keyframe-marked latent
streams and a benchmark harness around a deterministic codec."""

from .codec import CodecConfig, decode_segment, encode_segment, reconstruct_at_rate
from .metrics import QualityKind, bce_loss, compressibility, estimate_flow, flow_loss, psnr, ssim, vcpr, warp
from .planner import (
    AlphaStats,
    CompressionPlan,
    QualityMatrix,
    alpha,
    brute_force_plan,
    build_quality_matrix,
    plan,
)
from .stream import (
    KeyframeEmbedding,
    KeyframePredictor,
    assemble_stream,
    decode_stream,
    deserialize,
    predict_keyframes,
    serialize,
    split_and_recover,
    train_predictor,
)
from .tensor import LatentSegment, LatentStream, SegmentedVideo, VideoSegment, segment_video

__version__ = "0.1.0"
