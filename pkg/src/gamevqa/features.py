"""Whole-video feature records, their binary GFV1 file format, and the
end-to-end extraction pipeline that produces them.

A record holds the chunk-averaged 680-d spatial, 476-d temporal, and 1024-d
deep segments; `combined` is their concatenation in that fixed order.
"""

from __future__ import annotations

import struct
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .config import RunConfig
from .deepfeat import EMBED_DIM, chunk_deep_features
from .media import Chunk, Frame, VideoSpec, open_video, resize_bicubic, sample_chunks
from .nss import SPATIAL_DIM, NoiseConfig, extract_spatial_features
from .temporal import TEMPORAL_DIM, extract_temporal_features

COMBINED_DIM = SPATIAL_DIM + TEMPORAL_DIM + EMBED_DIM  # 2180

GFV_MAGIC = b"GFV1"
GFV_VERSION = 1

_FLAG_SPATIAL = 1
_FLAG_TEMPORAL = 2
_FLAG_DEEP = 4
_FLAG_CHUNKS = 8


class FeatureFileError(Exception):
    """Corrupt or incompatible feature file."""


class IncompleteRecordError(Exception):
    """Record is missing a segment required by the requested operation."""


@dataclass
class VideoFeatureRecord:
    video_id: str
    chunk_count: int
    config_hash: bytes
    spatial: np.ndarray | None = None
    temporal: np.ndarray | None = None
    deep: np.ndarray | None = None
    chunks: np.ndarray | None = None  # optional per-chunk combined vectors

    @property
    def complete(self) -> bool:
        return self.spatial is not None and self.temporal is not None and self.deep is not None

    @property
    def combined(self) -> np.ndarray:
        if not self.complete:
            missing = [
                name
                for name, seg in (("spatial", self.spatial), ("temporal", self.temporal), ("deep", self.deep))
                if seg is None
            ]
            raise IncompleteRecordError(f"record {self.video_id!r} missing segments: {missing}")
        return np.concatenate([self.spatial, self.temporal, self.deep])


def write_record(record: VideoFeatureRecord, path: str) -> None:
    flags = 0
    if record.spatial is not None:
        flags |= _FLAG_SPATIAL
    if record.temporal is not None:
        flags |= _FLAG_TEMPORAL
    if record.deep is not None:
        flags |= _FLAG_DEEP
    if record.chunks is not None:
        flags |= _FLAG_CHUNKS
    vid = record.video_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(GFV_MAGIC)
        fh.write(struct.pack("<H", GFV_VERSION))
        fh.write(record.config_hash[:32].ljust(32, b"\x00"))
        fh.write(struct.pack("<H", len(vid)))
        fh.write(vid)
        fh.write(struct.pack("<IB", record.chunk_count, flags))
        for seg, dim in ((record.spatial, SPATIAL_DIM), (record.temporal, TEMPORAL_DIM), (record.deep, EMBED_DIM)):
            if seg is not None:
                arr = np.asarray(seg, dtype="<f4")
                if arr.shape != (dim,):
                    raise ValueError(f"segment shape {arr.shape}, expected ({dim},)")
                fh.write(arr.tobytes())
        if record.chunks is not None:
            arr = np.asarray(record.chunks, dtype="<f4")
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.tobytes())


def read_record(path: str, expect_config_hash: bytes | None = None) -> VideoFeatureRecord:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != GFV_MAGIC:
        raise FeatureFileError(f"{path}: not a GFV1 feature file")
    pos = 4
    (version,) = struct.unpack_from("<H", raw, pos)
    pos += 2
    if version != GFV_VERSION:
        raise FeatureFileError(f"{path}: unsupported version {version}")
    config_hash = raw[pos : pos + 32]
    pos += 32
    (vlen,) = struct.unpack_from("<H", raw, pos)
    pos += 2
    video_id = raw[pos : pos + vlen].decode("utf-8")
    pos += vlen
    chunk_count, flags = struct.unpack_from("<IB", raw, pos)
    pos += 5
    record = VideoFeatureRecord(video_id=video_id, chunk_count=chunk_count, config_hash=config_hash)
    for name, flag, dim in (
        ("spatial", _FLAG_SPATIAL, SPATIAL_DIM),
        ("temporal", _FLAG_TEMPORAL, TEMPORAL_DIM),
        ("deep", _FLAG_DEEP, EMBED_DIM),
    ):
        if flags & flag:
            setattr(record, name, np.frombuffer(raw, dtype="<f4", count=dim, offset=pos).astype(np.float64))
            pos += dim * 4
    if flags & _FLAG_CHUNKS:
        n, d = struct.unpack_from("<II", raw, pos)
        pos += 8
        record.chunks = np.frombuffer(raw, dtype="<f4", count=n * d, offset=pos).reshape(n, d).astype(np.float64)
    if expect_config_hash is not None and config_hash != expect_config_hash[:32].ljust(32, b"\x00"):
        raise FeatureFileError(
            f"{path}: extraction config hash mismatch "
            f"(file {config_hash.hex()[:16]}..., active {expect_config_hash.hex()[:16]}...)"
        )
    return record


def _upscale_frame(frame: Frame, width: int, height: int) -> Frame:
    return Frame(
        index=frame.index,
        timestamp=frame.timestamp,
        y=resize_bicubic(frame.y, width, height),
        u=resize_bicubic(frame.u, (width + 1) // 2, (height + 1) // 2),
        v=resize_bicubic(frame.v, (width + 1) // 2, (height + 1) // 2),
    )


def extract_video(
    source,
    fmt: str,
    config: RunConfig,
    video_id: str,
    spec: VideoSpec | None = None,
    provider=None,
    keep_chunks: bool = False,
) -> VideoFeatureRecord:
    """Run the full feature pipeline on one video.

    `provider` None leaves the deep segment absent and the record incomplete.
    """
    spec_in, frames = open_video(source, fmt, spec)
    if config.display is not None:
        dw, dh = config.display
        frames = (_upscale_frame(f, dw, dh) for f in frames)
        spec_in = VideoSpec(
            width=dw, height=dh, frame_rate=spec_in.frame_rate, frame_count=spec_in.frame_count
        )
    noise = NoiseConfig(
        sigma_spatial=config.sigma_spatial, sigma_temporal=config.sigma_temporal, seed=config.seed
    )
    spatial_acc: list[np.ndarray] = []
    temporal_acc: list[np.ndarray] = []
    deep_acc: list[np.ndarray] = []
    chunk_rows: list[np.ndarray] = []
    for chunk in sample_chunks(frames, spec_in, config.spatial_rate, config.temporal_rate):
        s = extract_spatial_features(chunk, noise, config.scales)
        t = extract_temporal_features(chunk, noise, config.scales)
        spatial_acc.append(s)
        temporal_acc.append(t)
        row = [s, t]
        if provider is not None:
            d = chunk_deep_features(provider, chunk, video_id)
            deep_acc.append(d)
            row.append(d)
        if keep_chunks:
            chunk_rows.append(np.concatenate(row))
    if not spatial_acc:
        raise ValueError(f"video {video_id!r}: no complete one-second chunks")
    record = VideoFeatureRecord(
        video_id=video_id,
        chunk_count=len(spatial_acc),
        config_hash=config.config_hash(),
        spatial=np.mean(spatial_acc, axis=0),
        temporal=np.mean(temporal_acc, axis=0),
        deep=np.mean(deep_acc, axis=0) if deep_acc else None,
        chunks=np.stack(chunk_rows) if chunk_rows else None,
    )
    return record
