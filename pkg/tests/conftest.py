"""Shared fixtures: synthetic video generation and embedding stores."""

from __future__ import annotations

import io
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter, shift as nd_shift

from gamevqa.media import Frame, VideoSpec, write_y4m


def smooth_texture(rng: np.random.Generator, h: int, w: int, smoothness: float = 6.0) -> np.ndarray:
    """Low-frequency random texture in [0, 255], gaming-like smooth regions."""
    base = rng.standard_normal((h, w))
    tex = gaussian_filter(base, smoothness, mode="wrap")
    tex = (tex - tex.min()) / (np.ptp(tex) + 1e-12)
    return 20.0 + 215.0 * tex


def make_synthetic_frames(
    content_seed: int,
    n_frames: int,
    width: int = 64,
    height: int = 64,
    fps: int = 8,
    blur: float = 0.0,
    noise_std: float = 0.0,
) -> tuple[VideoSpec, list[Frame]]:
    """Moving smooth texture, optionally degraded by blur and additive noise."""
    rng = np.random.default_rng(content_seed)
    ch, cw = (height + 1) // 2, (width + 1) // 2
    y_base = smooth_texture(rng, height, width)
    u_base = smooth_texture(rng, ch, cw, smoothness=4.0)
    v_base = smooth_texture(rng, ch, cw, smoothness=4.0)
    deg_rng = np.random.default_rng(content_seed * 7919 + int(blur * 100) + int(noise_std * 100))
    spec = VideoSpec(width, height, Fraction(fps))
    frames = []
    for i in range(n_frames):
        dx = 1.3 * i
        y = nd_shift(y_base, (0.0, dx), mode="wrap", order=1)
        u = nd_shift(u_base, (0.0, dx / 2), mode="wrap", order=1)
        v = nd_shift(v_base, (0.0, dx / 2), mode="wrap", order=1)
        if blur > 0:
            y = gaussian_filter(y, blur)
        if noise_std > 0:
            y = y + deg_rng.normal(0.0, noise_std, y.shape)
        frames.append(
            Frame(
                index=i,
                timestamp=i / fps,
                y=np.clip(np.rint(y), 0, 255).astype(np.uint8),
                u=np.clip(np.rint(u), 0, 255).astype(np.uint8),
                v=np.clip(np.rint(v), 0, 255).astype(np.uint8),
            )
        )
    return spec, frames


def frames_to_y4m_bytes(spec: VideoSpec, frames: list[Frame]) -> bytes:
    buf = io.BytesIO()
    write_y4m(buf, spec, frames)
    return buf.getvalue()


def write_y4m_file(path: Path, spec: VideoSpec, frames: list[Frame]) -> None:
    with open(path, "wb") as fh:
        write_y4m(fh, spec, frames)


@pytest.fixture(scope="session")
def piecewise_frame() -> Frame:
    """Checked-in style synthetic frame: >70% constant area plus a few patches."""
    h = w = 128
    y = np.full((h, w), 120, dtype=np.uint8)
    y[8:32, 8:40] = 200
    y[90:120, 70:120] = 60
    y[50:60, 100:110] = 255
    u = np.full((h // 2, w // 2), 128, dtype=np.uint8)
    v = np.full((h // 2, w // 2), 128, dtype=np.uint8)
    return Frame(index=0, timestamp=0.0, y=y, u=u, v=v)


DEG_BLUR = (0.0, 0.75, 1.5, 2.5, 4.0)
DEG_NOISE = (0.0, 2.0, 5.0, 9.0, 15.0)


def pseudo_mos(level: int) -> float:
    return 90.0 - 15.0 * level


@pytest.fixture(scope="session")
def study_dir(tmp_path_factory) -> Path:
    """Desk-scale study: 10 contents x 5 degradation levels as Y4M files."""
    root = tmp_path_factory.mktemp("study")
    rows = ["video_id,content_id,mos,media_path,features_path"]
    for content in range(10):
        for level in range(5):
            vid = f"c{content:02d}_l{level}"
            spec, frames = make_synthetic_frames(
                content_seed=1000 + content,
                n_frames=16,
                blur=DEG_BLUR[level],
                noise_std=DEG_NOISE[level],
            )
            path = root / f"{vid}.y4m"
            write_y4m_file(path, spec, frames)
            rows.append(f"{vid},c{content:02d},{pseudo_mos(level)},{path},")
    (root / "index.csv").write_text("\n".join(rows) + "\n")
    return root
