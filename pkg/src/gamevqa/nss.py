"""Noise-regularized spatial scene-statistics features.

The spatial path builds 10 luma/chroma feature maps per sampled frame,
rescales each to two scales, injects white Gaussian "neural" noise, and
runs a fixed 34-statistic extractor on the locally normalized (MSCN)
coefficients, for 34 x 2 x 10 = 680 features per chunk.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import gammaln

from .media import Frame, rescale_short_side, upsample_chroma_bilinear

MSCN_C = 1.0
LOG_OFFSET = 0.1

SPATIAL_MAP_LABELS = ("Y", "GM_Y", "LOG_Y", "U", "V", "GM_U", "GM_V", "LOG_U", "LOG_V", "CHROMA")
DEFAULT_SCALES = (540, 270)

NSS34_DIM = 34
SPATIAL_DIM = NSS34_DIM * 2 * len(SPATIAL_MAP_LABELS)  # 680


@dataclass(frozen=True)
class NoiseConfig:
    sigma_spatial: float = 1.5
    sigma_temporal: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.sigma_spatial < 0 or self.sigma_temporal < 0:
            raise ValueError("noise sigmas must be non-negative")


def noise_rng(seed: int, frame_index: int, label: str) -> np.random.Generator:
    """Counter-based generator uniquely keyed by (seed, frame, map label)."""
    key = zlib.crc32(label.encode("utf-8"))
    seq = np.random.SeedSequence(entropy=(int(seed) & 0xFFFFFFFFFFFFFFFF, int(frame_index), key))
    return np.random.Generator(np.random.Philox(seed=seq))


def add_gaussian_noise(
    plane: np.ndarray, sigma: float, stream_key: tuple[int, int, str]
) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) noise from the deterministic keyed stream."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return plane
    rng = noise_rng(*stream_key)
    return plane + sigma * rng.standard_normal(plane.shape)


# ---------------------------------------------------------------------------
# Local normalization

_WIN_STD = 7.0 / 6.0
_win_x = np.arange(7) - 3.0
_WINDOW = np.exp(-(_win_x**2) / (2.0 * _WIN_STD**2))
_WINDOW /= _WINDOW.sum()


def _smooth(plane: np.ndarray) -> np.ndarray:
    out = correlate1d(plane, _WINDOW, axis=0, mode="mirror")
    return correlate1d(out, _WINDOW, axis=1, mode="mirror")


def local_mean_std(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-weighted (7x7, std 7/6) local mean and standard deviation."""
    if plane.shape[0] < 7 or plane.shape[1] < 7:
        raise ValueError(f"plane {plane.shape} smaller than 7x7 window")
    plane = plane.astype(np.float64, copy=False)
    # center around the global mean so the variance subtraction does not
    # cancel catastrophically on near-constant planes
    g = plane.mean()
    centered = plane - g
    mu_c = _smooth(centered)
    m2 = _smooth(centered * centered)
    sigma = np.sqrt(np.clip(m2 - mu_c * mu_c, 0.0, None))
    return mu_c + g, sigma


def mscn(plane: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients, saturation C = 1."""
    mu, sigma = local_mean_std(plane)
    return (plane - mu) / (sigma + MSCN_C)


# ---------------------------------------------------------------------------
# Distribution fitters

_GGD_GRID = np.arange(0.025, 10.0005, 0.001)
with np.errstate(over="ignore"):
    _GGD_RATIO = np.exp(
        gammaln(1.0 / _GGD_GRID) + gammaln(3.0 / _GGD_GRID) - 2.0 * gammaln(2.0 / _GGD_GRID)
    )

_AGGD_GRID = np.arange(0.1, 10.0005, 0.001)
_AGGD_RATIO = np.exp(
    2.0 * gammaln(2.0 / _AGGD_GRID) - gammaln(1.0 / _AGGD_GRID) - gammaln(3.0 / _AGGD_GRID)
)


@dataclass(frozen=True)
class GgdParams:
    alpha: float
    sigma_sq: float
    degenerate: bool = False


@dataclass(frozen=True)
class AggdParams:
    nu: float
    eta: float
    sigma_l_sq: float
    sigma_r_sq: float
    degenerate: bool = False


def fit_ggd(samples: np.ndarray) -> GgdParams:
    """Moment-matching generalized Gaussian fit over a dense shape grid."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    m2 = float(np.mean(x * x))
    m1 = float(np.mean(np.abs(x)))
    if m2 == 0.0 or m1 == 0.0:
        return GgdParams(alpha=float(_GGD_GRID[0]), sigma_sq=0.0, degenerate=True)
    rho = (m1 * m1) / m2
    idx = int(np.argmin(np.abs(_GGD_RATIO - 1.0 / rho)))
    return GgdParams(alpha=float(_GGD_GRID[idx]), sigma_sq=m2)


def _gamma_ratio_21(nu: float) -> float:
    return float(np.exp(gammaln(2.0 / nu) - gammaln(1.0 / nu)))


def fit_aggd(samples: np.ndarray) -> AggdParams:
    """Asymmetric generalized Gaussian fit by moment matching."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    neg = x[x < 0]
    pos = x[x > 0]
    sigma_l_sq = float(np.mean(neg * neg)) if neg.size else 0.0
    sigma_r_sq = float(np.mean(pos * pos)) if pos.size else 0.0
    m2 = float(np.mean(x * x))
    m1 = float(np.mean(np.abs(x)))
    if m2 == 0.0:
        return AggdParams(nu=float(_AGGD_GRID[0]), eta=0.0, sigma_l_sq=0.0, sigma_r_sq=0.0, degenerate=True)
    degenerate = sigma_l_sq == 0.0 or sigma_r_sq == 0.0
    if sigma_r_sq > 0.0:
        gamma_hat = np.sqrt(sigma_l_sq) / np.sqrt(sigma_r_sq)
        r_hat = (m1 * m1) / m2
        r_hat_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    else:
        # all mass on the negative side; the correction tends to r_hat
        r_hat_norm = (m1 * m1) / m2
    idx = int(np.argmin((_AGGD_RATIO - r_hat_norm) ** 2))
    nu = float(_AGGD_GRID[idx])
    eta = (np.sqrt(sigma_r_sq) - np.sqrt(sigma_l_sq)) * _gamma_ratio_21(nu)
    return AggdParams(nu=nu, eta=float(eta), sigma_l_sq=sigma_l_sq, sigma_r_sq=sigma_r_sq, degenerate=degenerate)


# ---------------------------------------------------------------------------
# 34-statistic extractor


def skewness(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean((x - m) ** 3) / m2**1.5)


def kurtosis(x: np.ndarray) -> float:
    """Population (non-excess) kurtosis; 0 for zero-variance input."""
    x = np.asarray(x, dtype=np.float64).ravel()
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean((x - m) ** 4) / m2**2)


def paired_products(field: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    h = field[:, :-1] * field[:, 1:]
    v = field[:-1, :] * field[1:, :]
    d1 = field[:-1, :-1] * field[1:, 1:]
    d2 = field[:-1, 1:] * field[1:, :-1]
    return h, v, d1, d2


def log_derivatives(plane: np.ndarray) -> list[np.ndarray]:
    """Six first/second difference fields of J = ln(|plane| + 0.1)."""
    j = np.log(np.abs(plane) + LOG_OFFSET)
    dx = j[:, 1:] - j[:, :-1]
    dy = j[1:, :] - j[:-1, :]
    ddiag = j[1:, 1:] - j[:-1, :-1]
    danti = j[1:, :-1] - j[:-1, 1:]
    cross = j[:-2, 1:-1] + j[2:, 1:-1] - j[1:-1, :-2] - j[1:-1, 2:]
    plaq = j[:-1, :-1] + j[1:, 1:] - j[:-1, 1:] - j[1:, :-1]
    return [dx, dy, ddiag, danti, cross, plaq]


def nss34(
    plane: np.ndarray,
    sigma: float = 0.0,
    stream_key: tuple[int, int, str] | None = None,
) -> np.ndarray:
    """Fixed 34-statistic feature vector of one (optionally noise-added) map.

    Order: MSCN GGD (alpha, sigma^2); MSCN skewness, kurtosis; local-sigma
    field mean, std; AGGD (nu, eta, sigma_l^2, sigma_r^2) of the H, V, D1,
    D2 paired products; GGD (alpha, sigma^2) of 6 log-derivative fields.
    """
    noisy = plane.astype(np.float64, copy=False)
    if sigma > 0:
        if stream_key is None:
            raise ValueError("stream_key required when sigma > 0")
        noisy = add_gaussian_noise(noisy, sigma, stream_key)
    mu, sig = local_mean_std(noisy)
    field = (noisy - mu) / (sig + MSCN_C)

    feats = np.empty(NSS34_DIM, dtype=np.float64)
    g = fit_ggd(field)
    feats[0] = g.alpha
    feats[1] = g.sigma_sq
    feats[2] = skewness(field)
    feats[3] = kurtosis(field)
    feats[4] = sig.mean()
    feats[5] = sig.std()
    pos = 6
    for prod in paired_products(field):
        a = fit_aggd(prod)
        feats[pos : pos + 4] = (a.nu, a.eta, a.sigma_l_sq, a.sigma_r_sq)
        pos += 4
    for deriv in log_derivatives(noisy):
        g = fit_ggd(deriv)
        feats[pos : pos + 2] = (g.alpha, g.sigma_sq)
        pos += 2
    return feats


# ---------------------------------------------------------------------------
# Spatial feature maps

_D_STD = 0.5
_d_x = np.arange(3) - 1.0
_GAUSS3 = np.exp(-(_d_x**2) / (2.0 * _D_STD**2))
_GAUSS3 /= _GAUSS3.sum()
_DERIV3 = -_d_x / _D_STD**2 * np.exp(-(_d_x**2) / (2.0 * _D_STD**2))
_DERIV3 /= -np.dot(_DERIV3, _d_x)  # unit response to a unit ramp
_D2G3 = (_d_x**2 / _D_STD**4 - 1.0 / _D_STD**2) * np.exp(-(_d_x**2) / (2.0 * _D_STD**2))
_D2G3 -= _D2G3.mean()  # zero DC response


def gradient_magnitude(plane: np.ndarray) -> np.ndarray:
    plane = plane.astype(np.float64, copy=False)
    gx = correlate1d(correlate1d(plane, _GAUSS3, axis=0, mode="mirror"), _DERIV3, axis=1, mode="mirror")
    gy = correlate1d(correlate1d(plane, _GAUSS3, axis=1, mode="mirror"), _DERIV3, axis=0, mode="mirror")
    return np.sqrt(gx * gx + gy * gy)


def laplacian_of_gaussian(plane: np.ndarray) -> np.ndarray:
    plane = plane.astype(np.float64, copy=False)
    lxx = correlate1d(correlate1d(plane, _GAUSS3, axis=0, mode="mirror"), _D2G3, axis=1, mode="mirror")
    lyy = correlate1d(correlate1d(plane, _GAUSS3, axis=1, mode="mirror"), _D2G3, axis=0, mode="mirror")
    return lxx + lyy


def build_spatial_maps(frame: Frame) -> dict[str, np.ndarray]:
    """The fixed 10-map set over luma and bilinearly upsampled chroma."""
    h, w = frame.y.shape
    y = frame.y.astype(np.float64)
    u = upsample_chroma_bilinear(frame.u, w, h)
    v = upsample_chroma_bilinear(frame.v, w, h)
    return {
        "Y": y,
        "GM_Y": gradient_magnitude(y),
        "LOG_Y": laplacian_of_gaussian(y),
        "U": u,
        "V": v,
        "GM_U": gradient_magnitude(u),
        "GM_V": gradient_magnitude(v),
        "LOG_U": laplacian_of_gaussian(u),
        "LOG_V": laplacian_of_gaussian(v),
        "CHROMA": np.sqrt((u - 128.0) ** 2 + (v - 128.0) ** 2),
    }


def extract_spatial_features(
    chunk, noise: NoiseConfig, scales: tuple[int, ...] = DEFAULT_SCALES
) -> np.ndarray:
    """Chunk-averaged 680-d spatial segment (map-major, scale-minor order)."""
    if not chunk.spatial_frames:
        raise ValueError(f"chunk {chunk.chunk_index} has no spatial frames")
    acc = np.zeros(NSS34_DIM * len(scales) * len(SPATIAL_MAP_LABELS))
    for frame in chunk.spatial_frames:
        maps = build_spatial_maps(frame)
        parts = []
        for label in SPATIAL_MAP_LABELS:
            for scale in scales:
                scaled = rescale_short_side(maps[label], scale)
                key = (noise.seed, frame.index, f"S:{label}@{scale}")
                parts.append(nss34(scaled, noise.sigma_spatial, key))
        acc += np.concatenate(parts)
    return acc / len(chunk.spatial_frames)
