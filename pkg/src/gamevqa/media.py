"""Video decoding, plane resizing, chunking, and colorspace conversion.

Supported inputs are Y4M (YUV4MPEG2) containers and headerless raw planar
YUV 4:2:0, both 8-bit only. Decoding is a sequential generator; everything
downstream operates on immutable numpy planes.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import BinaryIO, Iterable, Iterator

import numpy as np


class MediaError(Exception):
    """Base error for video decoding problems."""


class FormatError(MediaError):
    """Malformed container or unsupported pixel format."""


class TruncatedError(MediaError):
    """Input ended mid-frame."""

    def __init__(self, frame_index: int):
        super().__init__(f"truncated frame payload at frame {frame_index}")
        self.frame_index = frame_index


@dataclass(frozen=True)
class VideoSpec:
    width: int
    height: int
    frame_rate: Fraction
    pixel_format: str = "yuv420p"
    frame_count: int | None = None

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError(f"frame size {self.width}x{self.height} below 32x32 minimum")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if self.pixel_format != "yuv420p":
            raise FormatError(f"unsupported pixel format {self.pixel_format!r} (only 8-bit yuv420p)")

    @property
    def chroma_width(self) -> int:
        return (self.width + 1) // 2

    @property
    def chroma_height(self) -> int:
        return (self.height + 1) // 2

    @property
    def frame_size_bytes(self) -> int:
        return self.width * self.height + 2 * self.chroma_width * self.chroma_height


@dataclass(frozen=True)
class Frame:
    index: int
    timestamp: float
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class Chunk:
    chunk_index: int
    spatial_frames: list[Frame]
    temporal_frames: list[Frame]


_Y4M_MAGIC = b"YUV4MPEG2"
_ACCEPTED_C420 = {"420", "420jpeg", "420mpeg2", "420paldv"}


def _parse_y4m_header(line: bytes) -> VideoSpec:
    text = line.decode("ascii", errors="replace").strip()
    parts = text.split(" ")
    if parts[0] != "YUV4MPEG2":
        raise FormatError("missing YUV4MPEG2 magic in Y4M header")
    width = height = None
    rate = None
    colorspace = "420"
    for token in parts[1:]:
        if not token:
            continue
        tag, val = token[0], token[1:]
        if tag == "W":
            width = int(val)
        elif tag == "H":
            height = int(val)
        elif tag == "F":
            m = re.fullmatch(r"(\d+):(\d+)", val)
            if not m:
                raise FormatError(f"bad frame rate token {token!r}")
            rate = Fraction(int(m.group(1)), int(m.group(2)))
        elif tag == "C":
            colorspace = val
        # interlacing (I) and aspect (A) tokens are accepted and ignored
    if width is None or height is None or rate is None:
        raise FormatError("Y4M header missing W, H or F token")
    if colorspace not in _ACCEPTED_C420:
        raise FormatError(f"unsupported Y4M colorspace C{colorspace} (8-bit 4:2:0 only)")
    return VideoSpec(width=width, height=height, frame_rate=rate)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        block = stream.read(remaining)
        if not block:
            break
        chunks.append(block)
        remaining -= len(block)
    return b"".join(chunks)


def _split_planes(payload: bytes, spec: VideoSpec, index: int) -> Frame:
    ysize = spec.width * spec.height
    csize = spec.chroma_width * spec.chroma_height
    buf = np.frombuffer(payload, dtype=np.uint8)
    y = buf[:ysize].reshape(spec.height, spec.width)
    u = buf[ysize : ysize + csize].reshape(spec.chroma_height, spec.chroma_width)
    v = buf[ysize + csize :].reshape(spec.chroma_height, spec.chroma_width)
    ts = index / float(spec.frame_rate)
    return Frame(index=index, timestamp=ts, y=y.copy(), u=u.copy(), v=v.copy())


def read_y4m(stream: BinaryIO) -> tuple[VideoSpec, Iterator[Frame]]:
    """Parse a Y4M stream, returning its spec and a frame generator."""
    header = bytearray()
    while True:
        b = stream.read(1)
        if not b:
            raise FormatError("EOF while reading Y4M header")
        if b == b"\n":
            break
        header += b
        if len(header) > 1024:
            raise FormatError("Y4M header too long")
    spec = _parse_y4m_header(bytes(header))

    def frames() -> Iterator[Frame]:
        index = 0
        while True:
            marker = bytearray()
            first = stream.read(1)
            if not first:
                return
            marker += first
            while not marker.endswith(b"\n"):
                b = stream.read(1)
                if not b:
                    raise TruncatedError(index)
                marker += b
            if not marker.startswith(b"FRAME"):
                raise FormatError(f"expected FRAME marker before frame {index}")
            payload = _read_exact(stream, spec.frame_size_bytes)
            if len(payload) < spec.frame_size_bytes:
                raise TruncatedError(index)
            yield _split_planes(payload, spec, index)
            index += 1

    return spec, frames()


def read_raw_yuv(stream: BinaryIO, spec: VideoSpec) -> Iterator[Frame]:
    """Yield frames from headerless planar YUV 4:2:0 bytes."""
    index = 0
    while True:
        payload = _read_exact(stream, spec.frame_size_bytes)
        if not payload:
            return
        if len(payload) < spec.frame_size_bytes:
            raise TruncatedError(index)
        yield _split_planes(payload, spec, index)
        index += 1


def open_video(
    source: BinaryIO | str,
    fmt: str = "y4m",
    spec: VideoSpec | None = None,
) -> tuple[VideoSpec, Iterator[Frame]]:
    """Open a video source in the given format ('y4m' or 'raw-yuv')."""
    stream: BinaryIO = open(source, "rb") if isinstance(source, str) else source
    if fmt == "y4m":
        return read_y4m(stream)
    if fmt == "raw-yuv":
        if spec is None:
            raise ValueError("raw-yuv input requires an explicit VideoSpec")
        return spec, read_raw_yuv(stream, spec)
    raise ValueError(f"unknown format {fmt!r}")


def write_y4m(stream: BinaryIO, spec: VideoSpec, frames: Iterable[Frame]) -> None:
    fr = spec.frame_rate
    stream.write(f"YUV4MPEG2 W{spec.width} H{spec.height} F{fr.numerator}:{fr.denominator} Ip A1:1 C420\n".encode())
    for f in frames:
        stream.write(b"FRAME\n")
        stream.write(f.y.astype(np.uint8).tobytes())
        stream.write(f.u.astype(np.uint8).tobytes())
        stream.write(f.v.astype(np.uint8).tobytes())


def write_raw_yuv(stream: BinaryIO, frames: Iterable[Frame]) -> None:
    for f in frames:
        stream.write(f.y.astype(np.uint8).tobytes())
        stream.write(f.u.astype(np.uint8).tobytes())
        stream.write(f.v.astype(np.uint8).tobytes())


# ---------------------------------------------------------------------------
# Resampling


def _catmull_rom_weights(length_in: int, length_out: int) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices (out, 4) and weights (out, 4) for one axis, a = -0.5."""
    a = -0.5
    scale = length_in / length_out
    x = (np.arange(length_out) + 0.5) * scale - 0.5
    base = np.floor(x).astype(np.int64)
    t = x - base

    def k(s):
        s = np.abs(s)
        w = np.where(
            s <= 1.0,
            (a + 2.0) * s**3 - (a + 3.0) * s**2 + 1.0,
            np.where(s < 2.0, a * (s**3 - 5.0 * s**2 + 8.0 * s - 4.0), 0.0),
        )
        return w

    offsets = np.array([-1, 0, 1, 2])
    idx = base[:, None] + offsets[None, :]
    weights = k(t[:, None] - offsets[None, :])
    weights /= weights.sum(axis=1, keepdims=True)
    np.clip(idx, 0, length_in - 1, out=idx)  # replicate edges
    return idx, weights


def _linear_weights(length_in: int, length_out: int) -> tuple[np.ndarray, np.ndarray]:
    scale = length_in / length_out
    x = (np.arange(length_out) + 0.5) * scale - 0.5
    base = np.floor(x).astype(np.int64)
    t = x - base
    idx = np.stack([base, base + 1], axis=1)
    weights = np.stack([1.0 - t, t], axis=1)
    np.clip(idx, 0, length_in - 1, out=idx)
    return idx, weights


def _resize_axis(plane: np.ndarray, idx: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    taken = np.take(plane, idx, axis=axis)  # inserts a tap axis after `axis`
    shape = [1] * taken.ndim
    shape[axis] = weights.shape[0]
    shape[axis + 1] = weights.shape[1]
    return (taken * weights.reshape(shape)).sum(axis=axis + 1)


def _resize(plane: np.ndarray, target_width: int, target_height: int, maker) -> np.ndarray:
    h, w = plane.shape
    if (w, h) == (target_width, target_height):
        return plane.copy()
    out = plane.astype(np.float64)
    if w != target_width:
        idx, wt = maker(w, target_width)
        out = _resize_axis(out, idx, wt, axis=1)
    if h != target_height:
        idx, wt = maker(h, target_height)
        out = _resize_axis(out, idx, wt, axis=0)
    if np.issubdtype(plane.dtype, np.integer):
        return np.clip(np.rint(out), 0, 255).astype(plane.dtype)
    return out


def resize_bicubic(plane: np.ndarray, target_width: int, target_height: int) -> np.ndarray:
    """Catmull-Rom bicubic resize; integer planes are rounded and clamped."""
    if target_width <= 0 or target_height <= 0:
        raise ValueError("target dimensions must be positive")
    return _resize(plane, target_width, target_height, _catmull_rom_weights)


def resize_bilinear(plane: np.ndarray, target_width: int, target_height: int) -> np.ndarray:
    if target_width <= 0 or target_height <= 0:
        raise ValueError("target dimensions must be positive")
    return _resize(plane, target_width, target_height, _linear_weights)


def rescale_short_side(plane: np.ndarray, short_side: int) -> np.ndarray:
    """Aspect-preserving bicubic rescale so min(h, w) == short_side."""
    h, w = plane.shape
    if h <= w:
        th = short_side
        tw = max(1, round(w * short_side / h))
    else:
        tw = short_side
        th = max(1, round(h * short_side / w))
    return resize_bicubic(plane, tw, th)


# ---------------------------------------------------------------------------
# Chunking


def chunk_frame_indices(
    frame_rate: Fraction, second: int, rate: int
) -> list[int]:
    """Centered uniform sample indices for one second of content."""
    return [math.floor((second + (k + 0.5) / rate) * frame_rate) for k in range(rate)]


def sample_chunks(
    frames: Iterable[Frame],
    spec: VideoSpec,
    spatial_rate: int = 2,
    temporal_rate: int = 8,
) -> Iterator[Chunk]:
    """Group frames into one-second chunks sampled at the two feature rates.

    Trailing partial seconds are dropped. Spatial and temporal frames are
    sampled independently (centered within each second).
    """
    if not (0 < spatial_rate <= temporal_rate):
        raise ValueError("need 0 < spatial_rate <= temporal_rate")
    if spec.frame_rate < temporal_rate:
        raise MediaError(
            f"frame rate {spec.frame_rate} below temporal sampling rate {temporal_rate}"
        )
    second = 0
    spatial_idx = chunk_frame_indices(spec.frame_rate, second, spatial_rate)
    temporal_idx = chunk_frame_indices(spec.frame_rate, second, temporal_rate)
    spatial_frames: list[Frame] = []
    temporal_frames: list[Frame] = []
    for frame in frames:
        # frames past the current second close the chunk
        while frame.index >= math.floor((second + 1) * spec.frame_rate):
            if len(temporal_frames) == temporal_rate:
                yield Chunk(second, spatial_frames, temporal_frames)
            second += 1
            spatial_idx = chunk_frame_indices(spec.frame_rate, second, spatial_rate)
            temporal_idx = chunk_frame_indices(spec.frame_rate, second, temporal_rate)
            spatial_frames = []
            temporal_frames = []
        if frame.index in spatial_idx:
            spatial_frames.extend([frame] * spatial_idx.count(frame.index))
        if frame.index in temporal_idx:
            temporal_frames.extend([frame] * temporal_idx.count(frame.index))
    if len(temporal_frames) == temporal_rate:
        yield Chunk(second, spatial_frames, temporal_frames)


# ---------------------------------------------------------------------------
# Colorspace

# BT.709 limited range, 8-bit
_KR, _KB = 0.2126, 0.0722
_YSCALE = 255.0 / 219.0
_CSCALE = 255.0 / 224.0


def yuv_to_rgb(frame: Frame) -> np.ndarray:
    """BT.709 limited-range YUV -> interleaved RGB24 at luma resolution.

    Chroma is upsampled nearest-neighbor.
    """
    h, w = frame.y.shape
    yp = frame.y.astype(np.float64) - 16.0
    cb = np.repeat(np.repeat(frame.u, 2, axis=0), 2, axis=1)[:h, :w].astype(np.float64) - 128.0
    cr = np.repeat(np.repeat(frame.v, 2, axis=0), 2, axis=1)[:h, :w].astype(np.float64) - 128.0
    r = _YSCALE * yp + _CSCALE * 2.0 * (1.0 - _KR) * cr
    b = _YSCALE * yp + _CSCALE * 2.0 * (1.0 - _KB) * cb
    g = (
        _YSCALE * yp
        - _CSCALE * (2.0 * (1.0 - _KB) * _KB / (1.0 - _KR - _KB)) * cb
        - _CSCALE * (2.0 * (1.0 - _KR) * _KR / (1.0 - _KR - _KB)) * cr
    )
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def upsample_chroma_bilinear(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear chroma upsample to luma resolution, as float64."""
    return resize_bilinear(plane.astype(np.float64), width, height)
