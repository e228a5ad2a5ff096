"""Benchmark runs and sweeps over a video corpus, with CSV/SVG output."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codec import CodecConfig, encode_segment, reconstruct_at_rate
from .metrics import (
    QualityKind,
    compressibility,
    flow_loss,
    mean_flow_magnitude,
    psnr,
    psnr_from_mse,
    segment_ssim,
    vcpr,
)
from .planner import (
    DEFAULT_W,
    PLANNER_RATES,
    CompressionPlan,
    QualityMatrix,
    build_quality_matrix,
    select_plan,
    tercile_thresholds,
)
from .stream import (
    KeyframeEmbedding,
    KeyframePredictor,
    assemble_stream,
    decode_stream,
    train_predictor,
)
from .synth import Video, make_corpus, make_mixed_corpus
from .tensor import LatentStream, SegmentedVideo, segment_video

log = logging.getLogger(__name__)

W_SWEEP = (1.0, 1.5, 2.0, 2.5)
SCATTER_TOLERANCE_DB = 0.5
PREDICTOR_LR = 1.0
PREDICTOR_STEPS = 2000


@dataclass
class VideoAnalysis:
    """Per-segment measurements that do not depend on the plan."""

    video: Video
    segmented: SegmentedVideo
    rates: tuple[int, ...]
    mse: np.ndarray  # (N, len(rates)) reconstruction MSE per analysis rate
    bytes_per_pixel: np.ndarray
    flow_magnitude: np.ndarray | None = None
    seconds: float = 0.0

    def psnr_table(self) -> np.ndarray:
        return np.vectorize(psnr_from_mse)(self.mse)

    def quality_matrix(self, rates=PLANNER_RATES) -> QualityMatrix:
        q = QualityMatrix(self.psnr_table(), self.rates, QualityKind.PSNR)
        return q.columns(rates)


def analyze_video(video: Video, cfg: CodecConfig = CodecConfig(), motion: bool = True) -> VideoAnalysis:
    t0 = time.perf_counter()
    seg = segment_video(video.frames, cfg.segment_len, video.fps)
    rates = cfg.analysis_rates
    mse = np.array([
        [float(np.mean((s.frames - reconstruct_at_rate(s, r, cfg).frames) ** 2)) for r in rates]
        for s in seg.segments
    ])
    bpp = np.array([compressibility(s) for s in seg.segments])
    flow = np.array([mean_flow_magnitude(s) for s in seg.segments]) if motion else None
    return VideoAnalysis(video, seg, rates, mse, bpp, flow, time.perf_counter() - t0)


def analyze_corpus(corpus, cfg: CodecConfig = CodecConfig(), motion: bool = True) -> list[VideoAnalysis]:
    if not corpus:
        raise ValueError("empty corpus")
    return [analyze_video(v, cfg, motion) for v in corpus]


def plan_video(a: VideoAnalysis, w: float, kind=QualityKind.PSNR, cfg: CodecConfig = CodecConfig(),
               seed: int = 0, thresholds=None) -> CompressionPlan:
    kind = QualityKind(kind)
    if kind is QualityKind.PSNR:
        q = a.quality_matrix(cfg.planner_rates)
    else:
        q = build_quality_matrix(a.segmented, cfg.planner_rates, kind, cfg, seed)
    return select_plan(q, w, thresholds, cfg.planner_rates)


def encode_video(seg: SegmentedVideo, rates, emb: KeyframeEmbedding, cfg: CodecConfig = CodecConfig()) -> LatentStream:
    latents = [encode_segment(s, r, cfg) for s, r in zip(seg.segments, rates)]
    return assemble_stream(latents, emb)


def video_psnr(a: VideoAnalysis, rates) -> float:
    """PSNR of the whole reconstructed video at the given per-segment rates."""
    cols = [a.rates.index(r) for r in rates]
    return psnr_from_mse(float(np.mean(a.mse[np.arange(len(cols)), cols])))


def _streams_for(analyses, w, emb, cfg, kind=QualityKind.PSNR, seed=0, thresholds=None):
    plans, streams = [], []
    for k, a in enumerate(analyses):
        p = plan_video(a, w, kind, cfg, seed + k, thresholds)
        plans.append(p)
        streams.append(encode_video(a.segmented, p.rates, emb, cfg))
    return plans, streams


def training_predictor(emb: KeyframeEmbedding = KeyframeEmbedding(), cfg: CodecConfig = CodecConfig(),
                       seed: int = 0, channels: int = 3, height: int = 64, width: int = 64) -> KeyframePredictor:
    """Train a predictor on a private synthetic corpus with mixed rates."""
    corpus = make_corpus(16, seed=seed + 1000, height=height, width=width, segment_len=cfg.segment_len)
    corpus += make_mixed_corpus(8, seed=seed + 2000, height=height, width=width, segment_len=cfg.segment_len)
    if channels != 3:
        for v in corpus:
            v.frames = np.repeat(v.frames.mean(axis=3, keepdims=True), channels, axis=3)
    analyses = analyze_corpus(corpus, cfg, motion=False)
    streams = []
    for w in (1.0, 2.5):
        streams += _streams_for(analyses, w, emb, cfg)[1]
    return train_predictor(streams, PREDICTOR_LR, PREDICTOR_STEPS, seed)


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        return list(self.rows[0]) if self.rows else []

    def to_csv(self, path) -> None:
        write_csv(self.rows, path)

    def per_video(self) -> dict[str, list[dict]]:
        out: dict[str, list[dict]] = {}
        for r in self.rows:
            out.setdefault(r["video_id"], []).append(r)
        return out

    def mean(self, column: str, per_video: bool = False) -> float:
        if per_video:
            return float(np.mean([rows[0][column] for rows in self.per_video().values()]))
        return float(np.mean([r[column] for r in self.rows]))


def run_bench(corpus, w: float = DEFAULT_W, kind=QualityKind.PSNR, cfg: CodecConfig = CodecConfig(),
              emb: KeyframeEmbedding = KeyframeEmbedding(), predictor: KeyframePredictor | None = None,
              seed: int = 0, analyses: list[VideoAnalysis] | None = None) -> BenchReport:
    """Plan, encode, assemble, decode and score every video of ``corpus``.

    Without a ``predictor`` one is trained on the corpus' own streams.
    """
    if not corpus:
        raise ValueError("empty corpus")
    kind = QualityKind(kind)
    analyses = analyses or analyze_corpus(corpus, cfg)
    thresholds = None
    if kind is QualityKind.COMPRESS:
        thresholds = tercile_thresholds(np.concatenate([a.bytes_per_pixel for a in analyses]))

    t_plan = []
    plans, streams = [], []
    for k, a in enumerate(analyses):
        t0 = time.perf_counter()
        p = plan_video(a, w, kind, cfg, seed + k, thresholds)
        plans.append(p)
        streams.append(encode_video(a.segmented, p.rates, emb, cfg))
        t_plan.append(time.perf_counter() - t0)
    if predictor is None:
        predictor = train_predictor(streams, PREDICTOR_LR, PREDICTOR_STEPS, seed)

    report = BenchReport()
    for a, p, s, tp in zip(analyses, plans, streams, t_plan):
        t0 = time.perf_counter()
        decoded = decode_stream(s, predictor, cfg)
        ratio = vcpr(p, cfg)
        wall = a.seconds + tp + time.perf_counter() - t0
        T = cfg.segment_len
        psnrs = a.psnr_table()
        for i, seg in enumerate(a.segmented.segments):
            part = decoded[i * T:(i + 1) * T]
            if part.shape == seg.frames.shape:
                q, ss, lf = psnr(seg, part), segment_ssim(seg, part), flow_loss(seg, part)[2]
            else:
                q = ss = lf = float("nan")
            row = {
                "video_id": a.video.id,
                "segment_id": i,
                "content": a.video.labels[i] if a.video.labels else "",
                "chosen_rate": p.rates[i],
            }
            row.update({f"psnr_r{r}": float(psnrs[i, k]) for k, r in enumerate(a.rates)})
            row.update({
                "psnr": q,
                "ssim": ss,
                "l_flow": lf,
                "flow_magnitude": float(a.flow_magnitude[i]) if a.flow_magnitude is not None else float("nan"),
                "bytes_per_pixel": float(a.bytes_per_pixel[i]),
                "alpha": float(p.alphas[i]) if p.alphas is not None else float("nan"),
                "vcpr": ratio,
                "decoded_frames": int(decoded.shape[0]),
                "wall_time": wall,
            })
            report.rows.append(row)
    return report


def sweep_w(analyses, cfg: CodecConfig = CodecConfig(), ws=W_SWEEP) -> list[dict]:
    rows = []
    for w in ws:
        plans = [plan_video(a, w, QualityKind.PSNR, cfg) for a in analyses]
        rows.append({
            "w": w,
            "vcpr": float(np.mean([vcpr(p, cfg) for p in plans])),
            "psnr": float(np.mean([video_psnr(a, p.rates) for a, p in zip(analyses, plans)])),
            "mean_rate": float(np.mean([r for p in plans for r in p.rates])),
        })
    return rows


def keyframe_accuracy(streams, predictor: KeyframePredictor) -> tuple[float, float]:
    """Plain and class-balanced accuracy of the thresholded classifier."""
    pred, truth = [], []
    for s in streams:
        pred.append(predictor.probabilities(s.frames) > predictor.threshold)
        truth.append(s.keyframes)
    pred, truth = np.concatenate(pred), np.concatenate(truth)
    acc = float(np.mean(pred == truth))
    tpr = float(np.mean(pred[truth])) if truth.any() else 1.0
    tnr = float(np.mean(~pred[~truth])) if (~truth).any() else 1.0
    return acc, 0.5 * (tpr + tnr)


def sweep_embedding(analyses, cfg: CodecConfig = CodecConfig(), policies=("begin", "end", "none"),
                    w: float = DEFAULT_W, beta: float = 0.5, seed: int = 0) -> list[dict]:
    """Train on the first half of the corpus, evaluate on the second half."""
    half = len(analyses) // 2
    if half == 0:
        raise ValueError("embedding sweep needs at least two videos")
    rows = []
    for policy in policies:
        emb = KeyframeEmbedding(beta, policy)
        _, streams = _streams_for(analyses, w, emb, cfg)
        pred = train_predictor(streams[:half], PREDICTOR_LR, PREDICTOR_STEPS, seed)
        train_acc, _ = keyframe_accuracy(streams[:half], pred)
        acc, bal = keyframe_accuracy(streams[half:], pred)
        rows.append({
            "policy": policy,
            "accuracy": acc,
            "balanced_accuracy": bal,
            "train_accuracy": train_acc,
            "final_loss": pred.final_loss,
        })
    return rows


def sweep_quality(analyses, cfg: CodecConfig = CodecConfig(), kinds=("random", "compress", "psnr"),
                  w: float = DEFAULT_W, seed: int = 0) -> list[dict]:
    """Compare quality functions; wall time covers scoring, planning and reconstruction."""
    bpp_all = np.concatenate([a.bytes_per_pixel for a in analyses])
    rows = []
    for kind in kinds:
        kind = QualityKind(kind)
        t0 = time.perf_counter()
        psnrs, ssims, ratios = [], [], []
        for k, a in enumerate(analyses):
            if kind is QualityKind.COMPRESS:
                q = build_quality_matrix(a.segmented, cfg.planner_rates, kind, cfg)
                p = select_plan(q, w, tercile_thresholds(bpp_all))
            else:
                q = build_quality_matrix(a.segmented, cfg.planner_rates, kind, cfg, seed + k)
                p = select_plan(q, w, rates=cfg.planner_rates)
            recon = [reconstruct_at_rate(s, r, cfg) for s, r in zip(a.segmented.segments, p.rates)]
            orig = a.segmented.frames()
            rec = np.concatenate([r.frames for r in recon])
            psnrs.append(psnr(orig, rec))
            ssims.append(segment_ssim(orig, rec))
            ratios.append(vcpr(p, cfg))
        elapsed = time.perf_counter() - t0
        rows.append({
            "quality": kind.value,
            "psnr": float(np.mean(psnrs)),
            "ssim": float(np.mean(ssims)),
            "vcpr": float(np.mean(ratios)),
            "seconds_per_video": elapsed / len(analyses),
        })
    return rows


def scatter_rows(analyses, tolerance: float = SCATTER_TOLERANCE_DB) -> list[dict]:
    """Per-segment scatter data with the orange/blue label.

    Orange means the two smallest analysis rates reconstruct about equally
    well (within ``tolerance`` dB) or the larger one wins; blue otherwise.
    """
    rows = []
    for a in analyses:
        if a.flow_magnitude is None:
            raise ValueError("scatter needs motion analysis")
        table = a.psnr_table()
        lo, hi = a.rates[0], a.rates[1]
        for i in range(a.segmented.N):
            p_lo, p_hi = float(table[i, 0]), float(table[i, 1])
            orange = abs(p_lo - p_hi) <= tolerance or p_hi > p_lo
            row = {
                "video_id": a.video.id,
                "segment_id": i,
                "content": a.video.labels[i] if a.video.labels else "",
            }
            row.update({f"psnr_r{r}": float(table[i, k]) for k, r in enumerate(a.rates)})
            row.update({
                "psnr_std": float(np.std(table[i])),
                "flow_magnitude": float(a.flow_magnitude[i]),
                "bytes_per_pixel": float(a.bytes_per_pixel[i]),
                "label": "orange" if orange else "blue",
                "rule": f"|psnr_r{lo}-psnr_r{hi}|<={tolerance}",
            })
            rows.append(row)
    return rows


def scatter_summary(rows) -> dict[str, dict[str, float]]:
    out = {}
    for label in ("orange", "blue"):
        sel = [r for r in rows if r["label"] == label]
        out[label] = {
            "count": len(sel),
            "flow_magnitude": float(np.mean([r["flow_magnitude"] for r in sel])) if sel else float("nan"),
            "bytes_per_pixel": float(np.mean([r["bytes_per_pixel"] for r in sel])) if sel else float("nan"),
            "psnr_std": float(np.mean([r["psnr_std"] for r in sel])) if sel else float("nan"),
        }
    return out


def write_csv(rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _svg_frame(width, height, body, title):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<text x="{width / 2}" y="16" text-anchor="middle" font-size="13">{title}</text>\n'
        + "\n".join(body) + "\n</svg>\n"
    )


def _scale(vals, lo_px, hi_px):
    vals = np.asarray(vals, dtype=np.float64)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    span = hi - lo if hi > lo else 1.0
    return lo_px + (vals - lo) / span * (hi_px - lo_px)


def write_scatter_svg(rows, path, x: str = "flow_magnitude", y: str = "bytes_per_pixel") -> None:
    W, H, m = 420, 320, 40
    xs = _scale([r[x] for r in rows], m, W - m)
    ys = _scale([r[y] for r in rows], H - m, m)
    colors = {"orange": "#f28e2b", "blue": "#4e79a7"}
    body = [f'<line x1="{m}" y1="{H - m}" x2="{W - m}" y2="{H - m}" stroke="black"/>',
            f'<line x1="{m}" y1="{m}" x2="{m}" y2="{H - m}" stroke="black"/>',
            f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="11">{x}</text>',
            f'<text x="12" y="{H / 2}" font-size="11" transform="rotate(-90 12 {H / 2})">{y}</text>']
    body += [f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3" fill="{colors.get(r.get("label"), "gray")}" fill-opacity="0.7"/>'
             for cx, cy, r in zip(xs, ys, rows)]
    Path(path).write_text(_svg_frame(W, H, body, f"{y} vs {x}"))


def write_line_svg(rows, path, x: str = "w", y: str = "vcpr") -> None:
    W, H, m = 420, 320, 40
    xs = _scale([r[x] for r in rows], m, W - m)
    ys = _scale([r[y] for r in rows], H - m, m)
    pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(xs, ys))
    body = [f'<polyline points="{pts}" fill="none" stroke="#4e79a7" stroke-width="2"/>']
    body += [f'<text x="{a:.1f}" y="{b - 6:.1f}" font-size="10" text-anchor="middle">{r[y]:.1f}</text>'
             for a, b, r in zip(xs, ys, rows)]
    Path(path).write_text(_svg_frame(W, H, body, f"{y} vs {x}"))


def run_sweeps(corpus, cfg: CodecConfig = CodecConfig(), out_dir=None, seed: int = 0, svg: bool = False) -> dict:
    """All four sweeps; writes one CSV each when ``out_dir`` is given."""
    analyses = analyze_corpus(corpus, cfg)
    bundle = {
        "sweep_w": sweep_w(analyses, cfg),
        "sweep_embedding": sweep_embedding(analyses, cfg, seed=seed),
        "sweep_quality": sweep_quality(analyses, cfg, seed=seed),
        "scatter": scatter_rows(analyses),
    }
    if out_dir is not None:
        out = Path(out_dir)
        for name, rows in bundle.items():
            write_csv(rows, out / f"{name}.csv")
        if svg:
            write_line_svg(bundle["sweep_w"], out / "sweep_w.svg")
            write_scatter_svg(bundle["scatter"], out / "scatter.svg")
    return bundle
