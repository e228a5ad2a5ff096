"""Seeded synthetic videos used as a desk-scale test corpus."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tensor import DEFAULT_SEGMENT_LEN

PATTERNS = ("static", "drift-grating", "bouncing-square", "noise", "mixed")
MIXED_PARTS = ("static", "slow", "fast")
CORPUS_MEDIAN_SPEED = 0.55
CORPUS_SPEED_SIGMA = 0.4


@dataclass(frozen=True)
class SynthSpec:
    pattern: str = "drift-grating"
    speed: float = 1.0  # pixels per frame
    frequency: float = 2.0  # cycles per frame width
    seed: int = 0
    height: int = 64
    width: int = 64
    channels: int = 3
    frames: int = 34
    segment_len: int = DEFAULT_SEGMENT_LEN

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if min(self.height, self.width, self.channels, self.frames) <= 0:
            raise ValueError("dimensions and frame count must be positive")
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if self.frames % self.segment_len:
            raise ValueError(f"frame count {self.frames} is not a multiple of T={self.segment_len}")


@dataclass
class Video:
    id: str
    frames: np.ndarray  # (F, H, W, C)
    labels: list[str] | None = None  # per-segment content labels, when known
    fps: float = 25.0
    spec: SynthSpec | None = field(default=None, repr=False)


def _tint(rng, channels: int) -> np.ndarray:
    return rng.uniform(0.75, 1.0, size=channels)


def _grating(spec: SynthSpec, rng, t0: int, count: int, speed: float) -> np.ndarray:
    theta = rng.uniform(0.0, 2 * np.pi)
    phase = rng.uniform(0.0, 2 * np.pi)
    tint = _tint(rng, spec.channels)
    y, x = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    u = x * np.cos(theta) + y * np.sin(theta)
    k = 2 * np.pi * spec.frequency / spec.width
    t = np.arange(t0, t0 + count, dtype=np.float64)
    wave = 0.5 + 0.35 * np.sin(k * (u[None] - speed * t[:, None, None]) + phase)
    return wave[..., None] * tint


def _static(spec: SynthSpec, rng, count: int) -> np.ndarray:
    color = rng.uniform(0.2, 0.8, size=spec.channels)
    return np.broadcast_to(color, (count, spec.height, spec.width, spec.channels)).copy()


def _reflect(pos, span):
    if span <= 0:
        return np.zeros_like(pos)
    m = np.mod(pos, 2 * span)
    return np.where(m > span, 2 * span - m, m)


def _square(spec: SynthSpec, rng) -> np.ndarray:
    size = max(4, min(spec.height, spec.width) // 4)
    bg = rng.uniform(0.1, 0.4, size=spec.channels)
    fg = rng.uniform(0.6, 0.95, size=spec.channels)
    angle = rng.uniform(0.0, 2 * np.pi)
    y0 = rng.uniform(0, spec.height - size)
    x0 = rng.uniform(0, spec.width - size)
    t = np.arange(spec.frames, dtype=np.float64)
    ys = np.rint(_reflect(y0 + spec.speed * np.sin(angle) * t, spec.height - size)).astype(int)
    xs = np.rint(_reflect(x0 + spec.speed * np.cos(angle) * t, spec.width - size)).astype(int)
    out = np.empty((spec.frames, spec.height, spec.width, spec.channels))
    out[:] = bg
    for k in range(spec.frames):
        out[k, ys[k]:ys[k] + size, xs[k]:xs[k] + size] = fg
    return out


def mixed_labels(spec: SynthSpec) -> list[str]:
    n = spec.frames // spec.segment_len
    return [MIXED_PARTS[3 * i // n] for i in range(n)]


def synth_generate(spec: SynthSpec) -> np.ndarray:
    """Render ``spec`` to an ``(F, H, W, C)`` array in ``[0, 1]``; deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    if spec.pattern == "static":
        out = _static(spec, rng, spec.frames)
    elif spec.pattern == "drift-grating":
        out = _grating(spec, rng, 0, spec.frames, spec.speed)
    elif spec.pattern == "bouncing-square":
        out = _square(spec, rng)
    elif spec.pattern == "noise":
        out = rng.uniform(0.0, 1.0, size=(spec.frames, spec.height, spec.width, spec.channels))
    else:
        # segment-aligned thirds: static, slow drift, fast drift
        T = spec.segment_len
        slow = spec.speed / 4
        parts = []
        for i, label in enumerate(mixed_labels(spec)):
            if label == "static":
                parts.append(_static(spec, rng, T))
            else:
                parts.append(_grating(spec, rng, i * T, T, slow if label == "slow" else spec.speed))
        out = np.concatenate(parts)
    return np.clip(out, 0.0, 1.0)


def make_video(spec: SynthSpec, vid: str | None = None) -> Video:
    frames = synth_generate(spec)
    if spec.pattern == "mixed":
        labels = mixed_labels(spec)
    elif spec.pattern == "static":
        labels = ["static"] * (spec.frames // spec.segment_len)
    else:
        labels = None
    return Video(vid or f"{spec.pattern}-{spec.seed}", frames, labels, spec=spec)


def make_corpus(n: int = 64, seed: int = 0, height: int = 64, width: int = 64, frames: int = 34,
                segment_len: int = DEFAULT_SEGMENT_LEN) -> list[Video]:
    """Seeded gratings and bouncing squares with log-normal motion speeds.

    The speed distribution (median 0.55 px/frame, log-sigma 0.4) puts the
    corpus-mean PSNR drop from rate 4 to rate 8 near 0.7 dB, the drop a
    fixed-rate video VAE shows from 256x to 512x on natural footage.
    Squares move twice as fast since their flat interiors hide motion.
    """
    rng = np.random.default_rng(seed)
    cycle = ("drift-grating", "drift-grating", "bouncing-square", "drift-grating")
    corpus = []
    for i in range(n):
        pattern = cycle[i % len(cycle)]
        speed = float(np.exp(rng.normal(np.log(CORPUS_MEDIAN_SPEED), CORPUS_SPEED_SIGMA)))
        if pattern == "bouncing-square":
            speed *= 2
        spec = SynthSpec(
            pattern=pattern,
            speed=speed,
            frequency=float(rng.uniform(1.0, 3.0)),
            seed=int(rng.integers(2 ** 31)),
            height=height,
            width=width,
            frames=frames,
            segment_len=segment_len,
        )
        corpus.append(make_video(spec, f"v{i:03d}-{pattern}"))
    return corpus


def make_mixed_corpus(n: int = 20, seed: int = 0, height: int = 64, width: int = 64,
                      segments: int = 3, segment_len: int = DEFAULT_SEGMENT_LEN,
                      speed: float = 3.0) -> list[Video]:
    rng = np.random.default_rng(seed)
    base = SynthSpec(pattern="mixed", speed=speed, height=height, width=width,
                     frames=segments * segment_len, segment_len=segment_len)
    return [
        make_video(replace(base, seed=int(rng.integers(2 ** 31)),
                           frequency=float(rng.uniform(1.0, 3.0))), f"m{i:03d}")
        for i in range(n)
    ]
