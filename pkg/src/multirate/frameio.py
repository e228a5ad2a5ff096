"""Frame file I/O: binary PGM/PPM sequences and the MTCV raw container."""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .tensor import stack_frames

FORMATS = ("pgm-sequence", "ppm-sequence", "raw-container")

MTCV_MAGIC = b"MTCV"
MTCV_VERSION = 1
# magic, version, height, width, channels, frame count, fps
_MTCV_HEADER = struct.Struct("<4sHHHHIf")


class FormatError(ValueError):
    """Malformed input bytes; ``offset`` is where parsing stopped."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} at offset {offset}"
        super().__init__(message)
        self.offset = offset


def quantize8(frames: np.ndarray) -> np.ndarray:
    # round half up, so 0.5 -> 128
    return np.floor(np.clip(frames, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("unexpected end of header", start)
    return buf[start:pos], pos


def parse_netpbm(buf: bytes) -> np.ndarray:
    """Decode one binary P5/P6 image into an ``(H, W, C)`` array in ``[0, 1]``."""
    magic = buf[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"bad netpbm magic {magic!r}", 0)
    pos = 2
    values = []
    for name in ("width", "height", "maxval"):
        start = pos
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise FormatError(f"invalid {name} {tok!r}", start)
        values.append(int(tok))
    width, height, maxval = values
    if width <= 0 or height <= 0:
        raise FormatError(f"invalid dimensions {width}x{height}", 2)
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}", pos)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError("missing whitespace after header", pos)
    pos += 1
    need = width * height * channels
    if len(buf) - pos < need:
        raise FormatError(f"truncated raster: expected {need} bytes, got {len(buf) - pos}", pos)
    raster = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos)
    return raster.reshape(height, width, channels).astype(np.float64) / 255.0


def encode_netpbm(frame: np.ndarray) -> bytes:
    h, w, c = frame.shape
    if c not in (1, 3):
        raise ValueError(f"netpbm needs 1 or 3 channels, got {c}")
    magic = "P5" if c == 1 else "P6"
    return f"{magic}\n{w} {h}\n255\n".encode("ascii") + quantize8(frame).tobytes()


def read_container(path) -> tuple[np.ndarray, float]:
    buf = Path(path).read_bytes()
    if len(buf) < _MTCV_HEADER.size:
        raise FormatError(
            f"truncated header: expected {_MTCV_HEADER.size} bytes, got {len(buf)}", 0
        )
    magic, version, h, w, c, count, fps = _MTCV_HEADER.unpack_from(buf, 0)
    if magic != MTCV_MAGIC:
        raise FormatError("bad magic", 0)
    if version != MTCV_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if h == 0 or w == 0 or c == 0:
        raise FormatError(f"invalid dimensions {h}x{w}x{c}", 6)
    need = count * h * w * c * 4
    have = len(buf) - _MTCV_HEADER.size
    if have != need:
        raise FormatError(
            f"payload length mismatch: expected {need} bytes, got {have}", _MTCV_HEADER.size
        )
    data = np.frombuffer(buf, dtype="<f4", offset=_MTCV_HEADER.size)
    frames = data.reshape(count, h, w, c).astype(np.float64)
    return frames, float(fps)


def write_container(frames, path, fps: float = 25.0) -> None:
    arr = stack_frames(frames)
    n, h, w, c = arr.shape
    if max(h, w, c) > 0xFFFF:
        raise ValueError("dimensions exceed u16 container fields")
    header = _MTCV_HEADER.pack(MTCV_MAGIC, MTCV_VERSION, h, w, c, n, fps)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype("<f4").tobytes())


def load_frames(path, fmt: str) -> list[np.ndarray]:
    """Load a frame list from a netpbm directory or an MTCV file.

    Sequence files are read in lexicographic filename order and scaled by
    ``v / 255``.
    """
    if fmt == "raw-container":
        frames, _ = read_container(path)
        return list(frames)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    ext = ".pgm" if fmt == "pgm-sequence" else ".ppm"
    names = sorted(n for n in os.listdir(path) if n.lower().endswith(ext))
    if not names:
        raise FileNotFoundError(f"no {ext} files in {path}")
    frames = []
    for name in names:
        try:
            frame = parse_netpbm(Path(path, name).read_bytes())
        except FormatError as exc:
            raise FormatError(f"{name}: {exc}") from exc
        if frames and frame.shape != frames[0].shape:
            raise ValueError(
                f"{name}: dimensions {frame.shape} differ from {frames[0].shape}"
            )
        frames.append(frame)
    return frames


def save_frames(frames, path, fmt: str, fps: float = 25.0) -> None:
    arr = stack_frames(frames)
    if fmt == "raw-container":
        write_container(arr, path, fps)
        return
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    want = 1 if fmt == "pgm-sequence" else 3
    if arr.shape[3] != want:
        raise ValueError(f"{fmt} needs {want}-channel frames, got {arr.shape[3]}")
    ext = ".pgm" if want == 1 else ".ppm"
    os.makedirs(path, exist_ok=True)
    for k, frame in enumerate(arr):
        Path(path, f"frame_{k:06d}{ext}").write_bytes(encode_netpbm(frame))
