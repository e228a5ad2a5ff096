"""Quality, motion and rate metrics."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import VideoSegment

PSNR_CAP = 100.0
SSIM_WINDOW = 8
SSIM_K1, SSIM_K2 = 0.01, 0.03
FLOW_BLOCK = 8
FLOW_RADIUS = 4
BCE_EPS = 1e-7


class QualityKind(str, Enum):
    PSNR = "psnr"
    COMPRESS = "compress"
    RANDOM = "random"


def _frames(x) -> np.ndarray:
    return x.frames if isinstance(x, VideoSegment) else np.asarray(x, dtype=np.float64)


def psnr(a, b) -> float:
    """PSNR in dB with peak 1.0; zero error (and anything above the cap) reports 100."""
    fa, fb = _frames(a), _frames(b)
    if fa.shape != fb.shape:
        raise ValueError(f"shape mismatch: {fa.shape} vs {fb.shape}")
    return psnr_from_mse(float(np.mean((fa - fb) ** 2)))


def psnr_from_mse(mse: float) -> float:
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(1.0 / mse)))


def _gray(frame) -> np.ndarray:
    f = np.asarray(frame, dtype=np.float64)
    return f.mean(axis=2) if f.ndim == 3 else f


def _ssim_terms(a, b, window: int = SSIM_WINDOW):
    """Per-window luminance and contrast-structure maps."""
    ga, gb = _gray(a), _gray(b)
    if ga.shape != gb.shape:
        raise ValueError(f"shape mismatch: {ga.shape} vs {gb.shape}")
    if ga.shape[0] < window or ga.shape[1] < window:
        raise ValueError(f"frame {ga.shape} smaller than {window}x{window} window")
    wa = sliding_window_view(ga, (window, window))
    wb = sliding_window_view(gb, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    lum = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim(a, b) -> float:
    """Mean SSIM over 8x8 uniform windows (stride 1, L = 1) of the channel-mean images."""
    lum, cs = _ssim_terms(a, b)
    return float(np.mean(lum * cs))


def segment_ssim(a, b) -> float:
    fa, fb = _frames(a), _frames(b)
    if fa.shape != fb.shape:
        raise ValueError(f"shape mismatch: {fa.shape} vs {fb.shape}")
    return float(np.mean([ssim(x, y) for x, y in zip(fa, fb)]))


@dataclass(frozen=True, eq=False)
class FlowField:
    vectors: np.ndarray  # (ceil(H/block), ceil(W/block), 2) integer (dy, dx)
    frame_shape: tuple[int, int]
    block: int = FLOW_BLOCK
    radius: int = FLOW_RADIUS

    def magnitude(self) -> float:
        """Mean per-block L1 displacement |dy| + |dx|."""
        return float(np.abs(self.vectors).sum(axis=-1).mean())


def _offsets(radius: int) -> list[tuple[int, int]]:
    offs = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    # tie-break order: smallest |dy|+|dx|, then dy, then dx
    return sorted(offs, key=lambda d: (abs(d[0]) + abs(d[1]), d[0], d[1]))


def _block_sums(img: np.ndarray, block: int) -> np.ndarray:
    h, w = img.shape
    gh, gw = -(-h // block), -(-w // block)
    padded = np.zeros((gh * block, gw * block))
    padded[:h, :w] = img
    return padded.reshape(gh, block, gw, block).sum(axis=(1, 3))


def estimate_flow(prev, nxt, block: int = FLOW_BLOCK, radius: int = FLOW_RADIUS) -> FlowField:
    """Exhaustive SAD block matching of ``prev`` blocks into ``nxt``.

    A block at ``p`` in ``prev`` gets the displacement ``d`` minimising
    ``sum |prev[p] - nxt[p + d]|``; candidates reaching outside the frame are
    skipped.
    """
    ga, gb = _gray(prev), _gray(nxt)
    if ga.shape != gb.shape:
        raise ValueError(f"shape mismatch: {ga.shape} vs {gb.shape}")
    h, w = ga.shape
    padded = np.full((h + 2 * radius, w + 2 * radius), np.nan)
    padded[radius:radius + h, radius:radius + w] = gb
    offs = _offsets(radius)
    costs = []
    for dy, dx in offs:
        shifted = padded[radius + dy:radius + dy + h, radius + dx:radius + dx + w]
        c = _block_sums(np.abs(ga - shifted), block)
        costs.append(np.where(np.isnan(c), np.inf, c))
    best = np.argmin(np.stack(costs), axis=0)
    vectors = np.array(offs, dtype=np.int64)[best]
    return FlowField(vectors, (h, w), block, radius)


def warp(x, flow: FlowField) -> np.ndarray:
    """Sample each pixel from ``x`` at its block's displacement, clamping at borders."""
    frame = np.asarray(x, dtype=np.float64)
    h, w = frame.shape[:2]
    b = flow.block
    if flow.vectors.shape[:2] != (-(-h // b), -(-w // b)):
        raise ValueError(
            f"flow grid {flow.vectors.shape[:2]} does not match frame {h}x{w} with block {b}"
        )
    ys, xs = np.arange(h), np.arange(w)
    v = flow.vectors[ys[:, None] // b, xs[None, :] // b]
    sy = np.clip(ys[:, None] + v[..., 0], 0, h - 1)
    sx = np.clip(xs[None, :] + v[..., 1], 0, w - 1)
    return frame[sy, sx]


def flow_loss(x, x_hat) -> tuple[float, float, float]:
    """Flow-guided consistency loss ``(l_quality, l_motion, l_flow)``.

    For each consecutive pair of the reconstruction, the flow from frame j to
    j+1 backward-warps reconstructed frame j+1 onto the grid of frame j, which
    is compared (mean L1) with original frame j. ``l_motion`` is the mean
    per-block ``|dy| + |dx|``.
    """
    fx, fh = _frames(x), _frames(x_hat)
    if fx.shape != fh.shape:
        raise ValueError(f"shape mismatch: {fx.shape} vs {fh.shape}")
    if fx.shape[0] < 2:
        return 0.0, 0.0, 0.0
    quality, motion = [], []
    for j in range(fx.shape[0] - 1):
        flow = estimate_flow(fh[j], fh[j + 1])
        quality.append(np.mean(np.abs(warp(fh[j + 1], flow) - fx[j])))
        motion.append(flow.magnitude())
    l_quality = float(np.mean(quality))
    l_motion = float(np.mean(motion))
    return l_quality, l_motion, l_quality + l_motion


def mean_flow_magnitude(x) -> float:
    f = _frames(x)
    if f.shape[0] < 2:
        return 0.0
    return float(np.mean([estimate_flow(f[j], f[j + 1]).magnitude() for j in range(f.shape[0] - 1)]))


def bce_loss(p, y, weights=None) -> float:
    """Mean binary cross-entropy with ``p`` clamped to ``[1e-7, 1 - 1e-7]``."""
    p = np.asarray(p, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} probabilities vs {y.size} labels")
    if p.size == 0:
        raise ValueError("empty input")
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    nll = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    if weights is not None:
        nll = nll * np.asarray(weights, dtype=np.float64).ravel()
    return float(np.mean(nll))


def compressibility(x, level: int = 9) -> float:
    """Deflated size of 8-bit frame-to-frame residuals, in bytes per scalar sample."""
    f = _frames(x)
    q = np.floor(np.clip(f, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    residual = q.copy()
    residual[1:] = q[1:] - q[:-1]  # uint8 wraps mod 256
    return len(zlib.compress(residual.tobytes(), level)) / q.size


def vcpr(plan, cfg=None, spatial_factor: int | None = None) -> float:
    """Nominal pixels-to-latents ratio: ``factor^2 * N / sum(1 / c_i)``."""
    rates = getattr(plan, "rates", plan)
    rates = list(rates)
    if not rates:
        raise ValueError("empty plan")
    if spatial_factor is None:
        spatial_factor = cfg.spatial_factor if cfg is not None else 8
    return spatial_factor ** 2 * len(rates) / sum(1.0 / c for c in rates)
