"""1024-d deep semantic embedding providers.

Two interchangeable sources: a binary GEMB file of precomputed per-frame
embeddings keyed by (video_id, frame_index), and an HTTP client for the
inference sidecar. The rest of the pipeline never knows which one ran.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import requests

from .media import Chunk, yuv_to_rgb

EMBED_DIM = 1024

GEMB_MAGIC = b"GEMB"
GEMB_VERSION = 1


class EmbeddingError(Exception):
    """Base error for embedding retrieval."""


class MissingEmbeddingError(EmbeddingError):
    def __init__(self, video_id: str, frame_index: int):
        super().__init__(f"no stored embedding for video {video_id!r} frame {frame_index}")


class DimensionMismatchError(EmbeddingError):
    def __init__(self, got: int):
        super().__init__(f"provider returned {got} values, expected {EMBED_DIM}")


def write_gemb(path: str, records: dict[tuple[str, int], np.ndarray]) -> None:
    """Write a GEMB embedding file. Records map (video_id, frame_index) -> 1024 floats."""
    keys = sorted(records)
    index_entries = []
    for vid, fidx in keys:
        vid_bytes = vid.encode("utf-8")
        index_entries.append((vid_bytes, fidx))
    header_size = 4 + 2 + 4
    table_size = sum(2 + len(vb) + 4 + 8 for vb, _ in index_entries)
    offset = header_size + table_size
    with open(path, "wb") as fh:
        fh.write(GEMB_MAGIC)
        fh.write(struct.pack("<HI", GEMB_VERSION, len(keys)))
        for vb, fidx in index_entries:
            fh.write(struct.pack("<H", len(vb)))
            fh.write(vb)
            fh.write(struct.pack("<IQ", fidx, offset))
            offset += EMBED_DIM * 4
        for key in keys:
            vec = np.asarray(records[key], dtype="<f4")
            if vec.shape != (EMBED_DIM,):
                raise ValueError(f"embedding for {key} has shape {vec.shape}")
            fh.write(vec.tobytes())


class FileEmbeddingProvider:
    """Read-only provider over a GEMB file; safe to share across workers."""

    kind = "file"

    def __init__(self, path: str):
        self.location = path
        with open(path, "rb") as fh:
            self._data = fh.read()
        if self._data[:4] != GEMB_MAGIC:
            raise EmbeddingError(f"{path}: bad magic bytes, not a GEMB file")
        version, count = struct.unpack_from("<HI", self._data, 4)
        if version != GEMB_VERSION:
            raise EmbeddingError(f"{path}: unsupported GEMB version {version}")
        self._index: dict[tuple[str, int], int] = {}
        pos = 10
        for _ in range(count):
            (vlen,) = struct.unpack_from("<H", self._data, pos)
            pos += 2
            vid = self._data[pos : pos + vlen].decode("utf-8")
            pos += vlen
            fidx, offset = struct.unpack_from("<IQ", self._data, pos)
            pos += 12
            if offset + EMBED_DIM * 4 > len(self._data):
                raise EmbeddingError(f"{path}: index entry points past end of file")
            self._index[(vid, fidx)] = offset
        self.metadata = f"gemb-file:{count}"

    def __len__(self) -> int:
        return len(self._index)

    def embed(self, video_id: str, frame_index: int, frame=None) -> np.ndarray:
        offset = self._index.get((video_id, frame_index))
        if offset is None:
            raise MissingEmbeddingError(video_id, frame_index)
        vec = np.frombuffer(self._data, dtype="<f4", count=EMBED_DIM, offset=offset)
        return vec.astype(np.float64)


class RemoteEmbeddingProvider:
    """HTTP client for the inference sidecar wire protocol."""

    kind = "remote"

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 1):
        self.location = url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._session = requests.Session()
        try:
            resp = self._session.get(f"{self.location}/health", timeout=timeout)
            resp.raise_for_status()
            info = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise EmbeddingError(f"sidecar health check failed: {exc}") from exc
        if info.get("status") != "ok":
            raise EmbeddingError(f"sidecar unhealthy: {info}")
        if info.get("dim") != EMBED_DIM:
            raise DimensionMismatchError(int(info.get("dim", 0)))
        self.metadata = str(info.get("model", "unknown"))

    def embed(self, video_id: str, frame_index: int, frame: np.ndarray = None) -> np.ndarray:
        if frame is None:
            raise EmbeddingError("remote provider requires frame pixel data")
        h, w = frame.shape[:2]
        body = np.ascontiguousarray(frame, dtype=np.uint8).tobytes()
        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.location}/embed",
                    data=body,
                    headers={
                        "X-Width": str(w),
                        "X-Height": str(h),
                        "Content-Type": "application/octet-stream",
                    },
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                payload = resp.content
                if len(payload) != EMBED_DIM * 4:
                    raise DimensionMismatchError(len(payload) // 4)
                return np.frombuffer(payload, dtype="<f4").astype(np.float64)
            except DimensionMismatchError:
                raise
            except requests.RequestException as exc:
                last_exc = exc
        raise EmbeddingError(f"sidecar request failed after retry: {last_exc}") from last_exc


def make_provider(spec: str, timeout: float = 30.0):
    """Build a provider from 'file:PATH' or 'http(s)://URL' notation."""
    if spec.startswith("file:"):
        return FileEmbeddingProvider(spec[len("file:") :])
    if spec.startswith("http:") and not spec.startswith("http://"):
        return RemoteEmbeddingProvider(spec[len("http:") :], timeout=timeout)
    if spec.startswith(("http://", "https://")):
        return RemoteEmbeddingProvider(spec, timeout=timeout)
    return FileEmbeddingProvider(spec)


def chunk_deep_features(provider, chunk: Chunk, video_id: str) -> np.ndarray:
    """Element-wise mean of the chunk's 2 Hz per-frame embeddings."""
    if not chunk.spatial_frames:
        raise ValueError(f"chunk {chunk.chunk_index} has no frames at the deep sampling rate")
    vecs = []
    for frame in chunk.spatial_frames:
        rgb = yuv_to_rgb(frame) if provider.kind == "remote" else None
        vec = provider.embed(video_id, frame.index, rgb)
        if vec.shape != (EMBED_DIM,):
            raise DimensionMismatchError(vec.size)
        vecs.append(vec)
    return np.mean(vecs, axis=0)
