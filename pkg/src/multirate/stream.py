"""Keyframe-marked latent streams.

Segments encoded at different rates are concatenated into one latent stream,
with a fixed marker vector added to each segment's keyframe. At decode time a
logistic keyframe predictor finds the markers, the stream is cut at them and
each run's rate is recovered from its length.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .codec import CodecConfig, decode_segment
from .frameio import FormatError
from .metrics import bce_loss
from .tensor import LatentSegment, LatentStream

log = logging.getLogger(__name__)

POLICIES = ("begin", "end", "none")
DEFAULT_BETA = 0.5
CONFIDENCE_FLOOR = 0.6
FIRST_SEGMENT_RATE = 4
# Latents live on a 2**-16 grid; marker add/subtract is then exact in float32.
LATENT_QUANT = 2.0 ** -16

MTCS_MAGIC = b"MTCS"
MTCS_VERSION = 1
# magic, version, h, w, c_lat, T, total latent frames, beta, policy, sidecar flag
_MTCS_HEADER = struct.Struct("<4sHHHHHIfBB")


def quantize_latent(x) -> np.ndarray:
    return (np.round(np.asarray(x, dtype=np.float64) / LATENT_QUANT) * LATENT_QUANT).astype(np.float32)


@dataclass(frozen=True)
class KeyframeEmbedding:
    beta: float = DEFAULT_BETA
    policy: str = "begin"

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown embedding policy {self.policy!r}")
        if self.beta < 0:
            raise ValueError("embedding magnitude must be non-negative")
        object.__setattr__(self, "beta", float(quantize_latent(self.beta)))

    def vector(self, channels: int) -> np.ndarray:
        """``f[k] = beta * (-1)**k``."""
        signs = np.where(np.arange(channels) % 2 == 0, 1.0, -1.0)
        return (self.beta * signs).astype(np.float32)


def embedding_of(stream: LatentStream) -> KeyframeEmbedding:
    return KeyframeEmbedding(stream.beta, stream.policy)


def assemble_stream(latents: list[LatentSegment], emb: KeyframeEmbedding = KeyframeEmbedding()) -> LatentStream:
    """Mark each segment's keyframe and concatenate along time.

    The marker is added to the first latent frame (``begin``), the last
    (``end``) or nowhere (``none``). The ground-truth bitmap follows the same
    convention; under ``none`` it marks segment starts.
    """
    if not latents:
        raise ValueError("no latent segments")
    shape = latents[0].frames.shape[1:]
    T = latents[0].T
    for k, z in enumerate(latents):
        if z.frames.shape[1:] != shape:
            raise ValueError(f"segment {k} latent dims {z.frames.shape[1:]} differ from {shape}")
        if z.T != T:
            raise ValueError(f"segment {k} has T={z.T}, expected {T}")
    f_c = emb.vector(shape[-1])
    parts, bits = [], []
    for z in latents:
        q = quantize_latent(z.frames)
        marker = -1 if emb.policy == "end" else 0
        if emb.policy != "none":
            q[marker] += f_c
        b = np.zeros(len(q), dtype=bool)
        b[marker] = True
        parts.append(q)
        bits.append(b)
    return LatentStream(np.concatenate(parts), T, emb.beta, emb.policy, np.concatenate(bits))


def frame_features(frames) -> np.ndarray:
    """Per-channel spatial mean and std of each latent frame: ``(L, 2c)``."""
    f = np.asarray(frames, dtype=np.float64)
    return np.concatenate([f.mean(axis=(1, 2)), f.std(axis=(1, 2))], axis=1)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class KeyframePredictor:
    """Linear logistic classifier over standardised pooled latent features."""

    weights: np.ndarray
    bias: float = 0.0
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None
    threshold: float = 0.5
    confidence_floor: float = CONFIDENCE_FLOOR
    final_loss: float = field(default=float("nan"))

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        d = self.weights.size
        if self.feature_mean is None:
            self.feature_mean = np.zeros(d)
        if self.feature_scale is None:
            self.feature_scale = np.ones(d)
        self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64)
        self.feature_scale = np.asarray(self.feature_scale, dtype=np.float64)

    @classmethod
    def zeros(cls, channels: int) -> "KeyframePredictor":
        return cls(np.zeros(2 * channels))

    @property
    def channels(self) -> int:
        return self.weights.size // 2

    def probabilities(self, frames) -> np.ndarray:
        phi = frame_features(frames)
        if phi.shape[1] != self.weights.size:
            raise ValueError(
                f"predictor expects {self.channels} latent channels, stream has {phi.shape[1] // 2}"
            )
        z = ((phi - self.feature_mean) / self.feature_scale) @ self.weights + self.bias
        return _sigmoid(z)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "feature_mean": self.feature_mean.tolist(),
            "feature_scale": self.feature_scale.tolist(),
            "threshold": self.threshold,
            "confidence_floor": self.confidence_floor,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KeyframePredictor":
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "KeyframePredictor":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train_predictor(streams: list[LatentStream], lr: float = 1.0, steps: int = 2000, seed: int = 0) -> KeyframePredictor:
    """Full-batch gradient descent on class-balanced BCE.

    Positives are weighted by negatives/positives. Weights start from a seeded
    uniform draw in [-0.01, 0.01]; the bias starts at zero.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if not streams:
        raise ValueError("no training streams")
    X, y = [], []
    for s in streams:
        if s.keyframes is None:
            raise ValueError("training streams need ground-truth keyframe bitmaps")
        X.append(frame_features(s.frames))
        y.append(s.keyframes.astype(np.float64))
    X, y = np.concatenate(X), np.concatenate(y)
    pos = y.sum()
    if pos == 0:
        raise ValueError("no positive labels in training streams")
    neg = len(y) - pos
    sample_w = np.where(y > 0, neg / pos if neg > 0 else 1.0, 1.0)

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - mean) / scale

    rng = np.random.default_rng(seed)
    w = rng.uniform(-0.01, 0.01, size=X.shape[1])
    b = 0.0
    n = len(y)
    for _ in range(steps):
        p = _sigmoid(Xs @ w + b)
        g = sample_w * (p - y) / n
        w = w - lr * (Xs.T @ g)
        b = b - lr * g.sum()
    p = _sigmoid(Xs @ w + b)
    return KeyframePredictor(w, float(b), mean, scale, final_loss=bce_loss(p, y, sample_w))


def predict_keyframes(stream: LatentStream, pred: KeyframePredictor) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame keyframe probabilities and the thresholded mask.

    The stream's structural boundary is always set: index 0, or the last
    index under the ``end`` policy.
    """
    probs = pred.probabilities(stream.frames)
    mask = probs > pred.threshold
    mask[-1 if stream.policy == "end" else 0] = True
    return probs, mask


def _runs(mask, probs, policy: str):
    """Yield ``(start, stop, confidence)`` for each run between boundaries."""
    L = len(mask)
    idx = np.flatnonzero(mask)
    if policy == "end":
        starts = sorted({0} | {int(i) + 1 for i in idx if i + 1 < L})
        conf = {s: (1.0 if s == 0 else float(probs[s - 1])) for s in starts}
    else:
        starts = sorted({0} | {int(i) for i in idx})
        conf = {s: (1.0 if s == 0 else float(probs[s])) for s in starts}
    stops = starts[1:] + [L]
    return [(s, e, conf[s]) for s, e in zip(starts, stops)]


def split_and_recover(
    stream,
    mask,
    probabilities,
    T: int | None = None,
    cfg: CodecConfig = CodecConfig(),
    policy: str | None = None,
    confidence_floor: float = CONFIDENCE_FLOOR,
) -> tuple[list[LatentSegment], list[int]]:
    """Cut the latent sequence at keyframes and recover each run's rate.

    A run of valid length ``l`` whose boundary confidence reaches the floor
    gets rate ``(T - 1) / (l - 1)``. Any other run adopts the previous
    segment's rate (4 for the first) and is re-split greedily into valid
    lengths; a single leftover latent frame cannot form a segment and is
    dropped.
    """
    frames = stream.frames if isinstance(stream, LatentStream) else np.asarray(stream)
    if T is None:
        T = stream.T if isinstance(stream, LatentStream) else cfg.segment_len
    if policy is None:
        policy = stream.policy if isinstance(stream, LatentStream) else "begin"
    mask = np.asarray(mask, dtype=bool).copy()
    probs = np.asarray(probabilities, dtype=np.float64)
    if mask.shape != (len(frames),) or probs.shape != (len(frames),):
        raise ValueError("mask and probabilities must have one entry per latent frame")

    valid = {1 + (T - 1) // r: r for r in cfg.analysis_rates if (T - 1) % r == 0}
    segments, rates = [], []
    prev = None
    for start, stop, conf in _runs(mask, probs, policy):
        n = stop - start
        if n in valid and conf >= confidence_floor:
            pieces = [n]
        else:
            fallback = prev if prev is not None else FIRST_SEGMENT_RATE
            want = 1 + (T - 1) // fallback
            pieces, rem = [], n
            while rem >= 2:
                size = want if rem >= want else max(v for v in valid if v <= rem)
                pieces.append(size)
                rem -= size
            if rem:
                log.warning("dropping unassignable latent frame at index %d", stop - 1)
        pos = start
        for size in pieces:
            rate = valid[size]
            segments.append(LatentSegment(frames[pos:pos + size], rate, T))
            rates.append(rate)
            pos += size
            prev = rate
    return segments, rates


def decode_latents(stream: LatentStream, probabilities, mask, cfg: CodecConfig = CodecConfig()) -> np.ndarray:
    """Remove markers at detected keyframes, split, and decode every run."""
    mask = np.asarray(mask, dtype=bool).copy()
    mask[-1 if stream.policy == "end" else 0] = True
    frames = stream.frames.copy()
    if stream.policy != "none":
        frames[mask] -= embedding_of(stream).vector(stream.channels)
    segments, rates = split_and_recover(
        frames, mask, probabilities, stream.T, cfg, stream.policy
    )
    H, W = frames.shape[1] * cfg.spatial_factor, frames.shape[2] * cfg.spatial_factor
    if not segments:
        return np.zeros((0, H, W, stream.channels))
    return np.concatenate([decode_segment(z, r, cfg).frames for z, r in zip(segments, rates)])


def decode_stream(stream: LatentStream, pred: KeyframePredictor, cfg: CodecConfig = CodecConfig()) -> np.ndarray:
    probs, mask = predict_keyframes(stream, pred)
    return decode_latents(stream, probs, mask, cfg)


def serialize(stream: LatentStream) -> bytes:
    L, h, w, c = stream.frames.shape
    if max(h, w, c, stream.T) > 0xFFFF:
        raise ValueError("dimensions exceed u16 header fields")
    sidecar = stream.keyframes is not None
    header = _MTCS_HEADER.pack(
        MTCS_MAGIC, MTCS_VERSION, h, w, c, stream.T, L,
        stream.beta, POLICIES.index(stream.policy), int(sidecar),
    )
    parts = [header]
    if sidecar:
        parts.append(np.packbits(stream.keyframes).tobytes())
    parts.append(stream.frames.astype("<f4").tobytes())
    return b"".join(parts)


def deserialize(buf: bytes) -> LatentStream:
    hs = _MTCS_HEADER.size
    if buf[:4] != MTCS_MAGIC:
        raise FormatError("bad magic", 0)
    if len(buf) < hs:
        raise FormatError(f"truncated header: expected {hs} bytes, got {len(buf)}", 0)
    _, version, h, w, c, T, L, beta, policy, sidecar = _MTCS_HEADER.unpack_from(buf, 0)
    if version != MTCS_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if L < 1 or 0 in (h, w, c):
        raise FormatError(f"invalid geometry L={L} {h}x{w}x{c}", 6)
    if policy >= len(POLICIES):
        raise FormatError(f"unknown policy code {policy}", hs - 2)
    if sidecar not in (0, 1):
        raise FormatError(f"bad sidecar flag {sidecar}", hs - 1)
    nbits = (L + 7) // 8 if sidecar else 0
    need = hs + nbits + L * h * w * c * 4
    if len(buf) != need:
        raise FormatError(
            f"truncated payload: expected {need} bytes, got {len(buf)}"
            if len(buf) < need else f"trailing bytes: expected {need} bytes, got {len(buf)}",
            min(len(buf), need),
        )
    keyframes = None
    if sidecar:
        keyframes = np.unpackbits(np.frombuffer(buf, np.uint8, nbits, hs))[:L].astype(bool)
    frames = np.frombuffer(buf, "<f4", offset=hs + nbits).reshape(L, h, w, c).astype(np.float32)
    return LatentStream(frames, T, float(beta), POLICIES[policy], keyframes)
