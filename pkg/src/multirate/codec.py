"""Deterministic stand-in for a multi-rate video VAE.

Encoding keeps frames ``0, rate, 2*rate, ..., T-1`` (causal decimation) and
block-mean pools each kept frame by ``spatial_factor``. Decoding upsamples
spatially and linearly interpolates between kept frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DEFAULT_SEGMENT_LEN, LatentSegment, VideoSegment, check_segment_len


@dataclass(frozen=True)
class CodecConfig:
    spatial_factor: int = 8
    planner_rates: tuple[int, ...] = (4, 8, 16)
    analysis_rates: tuple[int, ...] = (2, 4, 8, 16)
    temporal: str = "linear"  # or "hold"
    spatial: str = "bilinear"  # or "nearest"
    segment_len: int = DEFAULT_SEGMENT_LEN

    def __post_init__(self):
        check_segment_len(self.segment_len)
        if self.spatial_factor < 1:
            raise ValueError("spatial factor must be positive")
        object.__setattr__(self, "planner_rates", tuple(sorted(self.planner_rates)))
        object.__setattr__(self, "analysis_rates", tuple(sorted(self.analysis_rates)))
        if not set(self.planner_rates) <= set(self.analysis_rates):
            raise ValueError("planner rates must be a subset of the analysis rates")
        for r in self.analysis_rates:
            if r < 1 or (self.segment_len - 1) % r:
                raise ValueError(f"rate {r} does not divide T-1 = {self.segment_len - 1}")
        if self.temporal not in ("linear", "hold"):
            raise ValueError(f"unknown temporal interpolation {self.temporal!r}")
        if self.spatial not in ("bilinear", "nearest"):
            raise ValueError(f"unknown spatial interpolation {self.spatial!r}")

    def latent_length(self, rate: int) -> int:
        return 1 + (self.segment_len - 1) // rate

    def valid_lengths(self) -> dict[int, int]:
        """Map latent length -> rate over the analysis rates."""
        return {self.latent_length(r): r for r in self.analysis_rates}


def _check_factor(h: int, w: int, factor: int) -> None:
    if h % factor or w % factor:
        raise ValueError(f"spatial factor {factor} does not divide frame size {h}x{w}")


def block_mean(frames: np.ndarray, factor: int) -> np.ndarray:
    """Mean-pool ``(..., H, W, C)`` over non-overlapping factor x factor tiles."""
    *lead, h, w, c = frames.shape
    _check_factor(h, w, factor)
    tiles = frames.reshape(*lead, h // factor, factor, w // factor, factor, c)
    return tiles.mean(axis=(-4, -2))


def _axis_weights(n_in: int, factor: int):
    # half-pixel centres, clamped at the borders
    src = (np.arange(n_in * factor) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def upsample(latent: np.ndarray, factor: int, mode: str = "bilinear") -> np.ndarray:
    """Spatially upsample ``(..., h, w, C)`` by ``factor``."""
    if factor == 1:
        return np.array(latent, dtype=np.float64)
    if mode == "nearest":
        return np.repeat(np.repeat(latent, factor, axis=-3), factor, axis=-2).astype(np.float64)
    i0, i1, t = _axis_weights(latent.shape[-3], factor)
    a = latent[..., i0, :, :]
    rows = a + t[:, None, None] * (latent[..., i1, :, :] - a)
    j0, j1, u = _axis_weights(latent.shape[-2], factor)
    b = rows[..., j0, :]
    return b + u[:, None] * (rows[..., j1, :] - b)


def encode_segment(x: VideoSegment, rate: int, cfg: CodecConfig = CodecConfig()) -> LatentSegment:
    frames = x.frames if isinstance(x, VideoSegment) else np.asarray(x, dtype=np.float64)
    T = frames.shape[0]
    if rate not in cfg.analysis_rates:
        raise ValueError(f"rate {rate} not in analysis rates {cfg.analysis_rates}")
    if (T - 1) % rate:
        raise ValueError(f"rate {rate} does not divide T-1 = {T - 1}")
    kept = frames[::rate]
    return LatentSegment(block_mean(kept, cfg.spatial_factor), rate, T)


def decode_segment(z, rate: int, cfg: CodecConfig = CodecConfig()) -> VideoSegment:
    latents = z.frames if isinstance(z, LatentSegment) else np.asarray(z)
    T = z.T if isinstance(z, LatentSegment) else cfg.segment_len
    n = latents.shape[0]
    if n < 2 or (n - 1) * rate != T - 1:
        raise ValueError(
            f"rate/length mismatch: {n} latent frames at rate {rate} cannot rebuild {T} frames"
        )
    up = upsample(np.asarray(latents, dtype=np.float64), cfg.spatial_factor, cfg.spatial)
    j = np.arange(T)
    k = np.minimum(j // rate, n - 2)
    t = (j - k * rate) / rate
    if cfg.temporal == "hold":
        t = np.where(t >= 1.0, 1.0, 0.0)
    lo, hi = up[k], up[k + 1]
    out = lo + t[:, None, None, None] * (hi - lo)
    # last frame is a kept frame; take it verbatim rather than via lo + (hi - lo)
    out[t == 1.0] = hi[t == 1.0]
    return VideoSegment(np.clip(out, 0.0, 1.0))


def reconstruct_at_rate(x: VideoSegment, rate: int, cfg: CodecConfig = CodecConfig()) -> VideoSegment:
    return decode_segment(encode_segment(x, rate, cfg), rate, cfg)
