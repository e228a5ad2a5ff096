"""Pixel- and latent-domain containers and fixed-length video segmentation.

Frames are ``(H, W, C)`` float arrays with values in ``[0, 1]``; a segment
stacks ``T`` of them into a ``(T, H, W, C)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_SEGMENT_LEN = 17


def check_segment_len(T: int) -> None:
    if T < 17 or (T - 1) % 16 != 0:
        raise ValueError(f"segment length must be 1 + 16k with k >= 1, got {T}")


def as_frame(data) -> np.ndarray:
    """Validate one frame and return it as a float64 ``(H, W, C)`` array.

    2-D input is treated as single-channel.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"frame must be 2-D or 3-D, got shape {arr.shape}")
    h, w, c = arr.shape
    if h <= 0 or w <= 0 or c < 1:
        raise ValueError(f"frame has empty dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("frame contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("frame values must lie in [0, 1]")
    return arr


def stack_frames(frames) -> np.ndarray:
    """Validate a frame list and stack it into ``(F, H, W, C)``."""
    if isinstance(frames, np.ndarray) and frames.ndim == 4:
        arr = np.asarray(frames, dtype=np.float64)
        if 0 in arr.shape:
            raise ValueError(f"empty frame stack: {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("frame values must be finite and lie in [0, 1]")
        return arr
    checked = [as_frame(f) for f in frames]
    if not checked:
        raise ValueError("empty frame list")
    shape = checked[0].shape
    for k, f in enumerate(checked):
        if f.shape != shape:
            raise ValueError(f"frame {k} has shape {f.shape}, expected {shape}")
    return np.stack(checked)


@dataclass(frozen=True, eq=False)
class VideoSegment:
    frames: np.ndarray  # (T, H, W, C)

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 4 or 0 in arr.shape:
            raise ValueError(f"segment must be (T, H, W, C), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.frames.shape

    def __len__(self) -> int:
        return self.T

    def __eq__(self, other):
        if not isinstance(other, VideoSegment):
            return NotImplemented
        return np.array_equal(self.frames, other.frames)


@dataclass(frozen=True)
class SegmentedVideo:
    segments: list[VideoSegment]
    fps: float = 25.0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a segmented video needs at least one segment")
        shape = self.segments[0].shape
        for s in self.segments:
            if s.shape != shape:
                raise ValueError("all segments must share T, H, W and channels")

    @property
    def N(self) -> int:
        return len(self.segments)

    @property
    def T(self) -> int:
        return self.segments[0].T

    def frames(self) -> np.ndarray:
        return np.concatenate([s.frames for s in self.segments])


@dataclass(frozen=True, eq=False)
class LatentSegment:
    """Latent frames ``(l, h, w, c)`` produced at a nominal temporal rate."""

    frames: np.ndarray
    rate: int
    T: int = DEFAULT_SEGMENT_LEN

    def __post_init__(self):
        arr = np.asarray(self.frames)
        if arr.ndim != 4:
            raise ValueError(f"latent segment must be (l, h, w, c), got {arr.shape}")
        if (self.T - 1) % self.rate != 0 or arr.shape[0] != 1 + (self.T - 1) // self.rate:
            raise ValueError(
                f"rate/length mismatch: rate {self.rate} with T={self.T} needs "
                f"{1 + (self.T - 1) / self.rate:g} latent frames, got {arr.shape[0]}"
            )
        object.__setattr__(self, "frames", arr)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LatentSegment):
            return NotImplemented
        return (self.rate, self.T) == (other.rate, other.T) and np.array_equal(
            self.frames, other.frames
        )


@dataclass(eq=False)
class LatentStream:
    """Concatenated latent frames plus the header fields needed to decode them.

    ``keyframes`` is the ground-truth sidecar bitmap (None when absent). Under
    the ``end`` policy it marks the last latent frame of each segment,
    otherwise the first.
    """

    frames: np.ndarray  # (L, h, w, c) float32
    T: int = DEFAULT_SEGMENT_LEN
    beta: float = 0.5
    policy: str = "begin"
    keyframes: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4 or self.frames.shape[0] < 1:
            raise ValueError(f"stream frames must be (L, h, w, c) with L >= 1, got {self.frames.shape}")
        if self.keyframes is not None:
            self.keyframes = np.asarray(self.keyframes, dtype=bool)
            if self.keyframes.shape != (self.frames.shape[0],):
                raise ValueError("keyframe bitmap length must equal total latent frames")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def channels(self) -> int:
        return self.frames.shape[3]

    def __eq__(self, other):
        if not isinstance(other, LatentStream):
            return NotImplemented
        if (self.T, self.policy) != (other.T, other.policy):
            return False
        if np.float32(self.beta) != np.float32(other.beta):
            return False
        if (self.keyframes is None) != (other.keyframes is None):
            return False
        if self.keyframes is not None and not np.array_equal(self.keyframes, other.keyframes):
            return False
        return self.frames.shape == other.frames.shape and np.array_equal(
            self.frames.view(np.uint32), other.frames.view(np.uint32)
        )


def segment_video(frames, T: int = DEFAULT_SEGMENT_LEN, fps: float = 25.0) -> SegmentedVideo:
    """Cut a frame sequence into ``len // T`` segments, dropping the remainder."""
    check_segment_len(T)
    arr = stack_frames(frames)
    n = arr.shape[0] // T
    if n == 0:
        raise ValueError(f"input shorter than one segment ({arr.shape[0]} < {T} frames)")
    segments = [VideoSegment(arr[i * T:(i + 1) * T].copy()) for i in range(n)]
    return SegmentedVideo(segments, fps=fps)
