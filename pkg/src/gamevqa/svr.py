"""Epsilon-SVR with RBF kernel, trained by sequential minimal optimization.

The dual problem over (alpha, alpha*) is solved in the standard doubled
2n-variable form with maximal-violating-pair working-set selection. Also
provides z-score feature scaling, content-grouped grid-search CV, and a
checksummed binary model format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .metrics import compute_metrics

KKT_TOL = 1e-5
MAX_ITER = 100_000
_TAU = 1e-12

GSVR_MAGIC = b"GSVR"
GSVR_VERSION = 1

DEFAULT_C_GRID = tuple(2.0**e for e in range(-3, 11))
DEFAULT_GAMMA_GRID = tuple(2.0**e for e in range(-10, 4))


class ModelFormatError(Exception):
    """Corrupt, incompatible, or mismatched model file."""


@dataclass(frozen=True)
class SvrHyper:
    c: float = 1.0
    gamma: float = 0.01
    epsilon: float = 1.0

    def __post_init__(self):
        if self.c <= 0 or self.gamma <= 0 or self.epsilon < 0:
            raise ValueError("hyperparameters must be positive (epsilon >= 0)")


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray  # 0 marks a constant dimension

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (x - self.mean) / safe, 0.0)


@dataclass
class SvrModel:
    support_vectors: np.ndarray  # (n_sv, d), scaled space
    dual_coefs: np.ndarray  # alpha_i - alpha_i*
    bias: float
    hyper: SvrHyper
    scaler: Scaler
    converged: bool = True
    schema_hash: bytes = b"\x00" * 32

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1] if self.support_vectors.size else self.scaler.mean.size


def fit_scaler(X: np.ndarray) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 training vectors")
    return Scaler(mean=X.mean(axis=0), std=X.std(axis=0))


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    a2 = np.sum(A * A, axis=1)[:, None]
    b2 = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(a2 + b2 - 2.0 * A @ B.T, 0.0)
    return np.exp(-gamma * d2)


def _smo_solve(K: np.ndarray, y: np.ndarray, c: float, epsilon: float):
    """Solve the doubled epsilon-SVR dual; returns (beta, bias, converged)."""
    n = K.shape[0]
    signs = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    alpha = np.zeros(2 * n)
    G = p.copy()
    qd = np.concatenate([np.diag(K), np.diag(K)])

    def q_col(t: int) -> np.ndarray:
        base = K[:, t % n]
        col = np.concatenate([base, -base])
        return col if t < n else -col

    converged = False
    for _ in range(MAX_ITER):
        neg_yg = -signs * G
        up = ((signs > 0) & (alpha < c)) | ((signs < 0) & (alpha > 0))
        low = ((signs > 0) & (alpha > 0)) | ((signs < 0) & (alpha < c))
        if not (np.any(up) and np.any(low)):
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(neg_yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(neg_yg[low])])
        if neg_yg[i] - neg_yg[j] <= KKT_TOL:
            converged = True
            break
        qi, qj = q_col(i), q_col(j)
        old_i, old_j = alpha[i], alpha[j]
        if signs[i] != signs[j]:
            quad = qd[i] + qd[j] + 2.0 * qi[j]
            quad = quad if quad > 0 else _TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * qi[j]
            quad = quad if quad > 0 else _TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        G += qi * (alpha[i] - old_i) + qj * (alpha[j] - old_j)

    # bias from the free variables, midpoint of the bounds otherwise
    yg = signs * G
    free = (alpha > 0) & (alpha < c)
    if np.any(free):
        rho = float(np.mean(yg[free]))
    else:
        at_up = ((signs > 0) & (alpha <= 0)) | ((signs < 0) & (alpha >= c))
        at_low = ((signs > 0) & (alpha >= c)) | ((signs < 0) & (alpha <= 0))
        ub = np.min(yg[at_up]) if np.any(at_up) else np.inf
        lb = np.max(yg[at_low]) if np.any(at_low) else -np.inf
        rho = float((ub + lb) / 2.0)
    beta = alpha[:n] - alpha[n:]
    return beta, -rho, converged


def train_svr(
    X: np.ndarray,
    y: np.ndarray,
    hyper: SvrHyper,
    scaler: Scaler | None = None,
    schema_hash: bytes = b"\x00" * 32,
) -> SvrModel:
    """Train on already-scaled vectors X; `scaler` is stored for prediction."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ValueError("need matching X, y with at least 2 samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training inputs")
    if scaler is None:
        scaler = Scaler(mean=np.zeros(X.shape[1]), std=np.ones(X.shape[1]))
    K = rbf_kernel(X, X, hyper.gamma)
    beta, bias, converged = _smo_solve(K, y, hyper.c, hyper.epsilon)
    sv = np.abs(beta) > 0
    return SvrModel(
        support_vectors=X[sv].copy(),
        dual_coefs=beta[sv].copy(),
        bias=bias,
        hyper=hyper,
        scaler=scaler,
        converged=converged,
        schema_hash=schema_hash,
    )


def fit_svr(X_raw: np.ndarray, y: np.ndarray, hyper: SvrHyper, schema_hash: bytes = b"\x00" * 32) -> SvrModel:
    """Fit scaler on raw vectors, then train."""
    scaler = fit_scaler(X_raw)
    return train_svr(scaler.apply(X_raw), y, hyper, scaler=scaler, schema_hash=schema_hash)


def predict_svr(model: SvrModel, x: np.ndarray) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.scaler.mean.size:
        raise ValueError(f"feature dimension {X.shape[1]} != model dimension {model.scaler.mean.size}")
    Xs = model.scaler.apply(X)
    if model.support_vectors.size:
        k = rbf_kernel(Xs, model.support_vectors, model.hyper.gamma)
        out = k @ model.dual_coefs + model.bias
    else:
        out = np.full(Xs.shape[0], model.bias)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Content-grouped cross-validation


def content_folds(content_ids, k: int, seed: int) -> list[np.ndarray]:
    """Deterministic partition of sample indices into k content-disjoint folds."""
    content_ids = np.asarray(content_ids)
    contents = sorted(set(content_ids.tolist()))
    if len(contents) < k:
        raise ValueError(f"need at least {k} distinct contents, got {len(contents)}")
    rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(entropy=(seed, 0xF01D))))
    order = rng.permutation(len(contents))
    fold_contents = np.array_split([contents[i] for i in order], k)
    return [np.flatnonzero(np.isin(content_ids, fc)) for fc in fold_contents]


@dataclass(frozen=True)
class CvRow:
    hyper: SvrHyper
    mean_srcc: float
    fold_srcc: tuple


def grid_search_cv(
    X: np.ndarray,
    y: np.ndarray,
    content_ids,
    grid: list[SvrHyper] | None = None,
    k: int = 5,
    seed: int = 0,
) -> tuple[SvrHyper, list[CvRow]]:
    """Pick the hyperparameters maximizing mean validation SRCC over k folds.

    Folds partition contents, never videos; the scaler is refit on each
    fold's training portion. Ties break toward smaller C, then smaller gamma.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if grid is None:
        grid = default_grid()
    folds = content_folds(content_ids, k, seed)
    table = []
    for hyper in grid:
        scores = []
        for f, val_idx in enumerate(folds):
            train_idx = np.concatenate([folds[g] for g in range(k) if g != f])
            scaler = fit_scaler(X[train_idx])
            model = train_svr(scaler.apply(X[train_idx]), y[train_idx], hyper, scaler=scaler)
            pred = predict_svr(model, X[val_idx])
            row = compute_metrics(pred, y[val_idx])
            scores.append(row.srcc)
        valid = [s for s in scores if not np.isnan(s)]
        mean_srcc = float(np.mean(valid)) if valid else -np.inf
        table.append(CvRow(hyper=hyper, mean_srcc=mean_srcc, fold_srcc=tuple(scores)))
    best = max(table, key=lambda r: (r.mean_srcc, -r.hyper.c, -r.hyper.gamma))
    return best.hyper, table


def default_grid(epsilon: float = 1.0) -> list[SvrHyper]:
    return [SvrHyper(c=c, gamma=g, epsilon=epsilon) for c in DEFAULT_C_GRID for g in DEFAULT_GAMMA_GRID]


# ---------------------------------------------------------------------------
# Serialization

_CRC64_POLY = 0xC96C5795D7870F42  # ECMA-182, reflected
_crc64_table = []
for _b in range(256):
    _r = _b
    for _ in range(8):
        _r = (_r >> 1) ^ _CRC64_POLY if _r & 1 else _r >> 1
    _crc64_table.append(_r)


def crc64(data: bytes) -> int:
    crc = 0xFFFFFFFFFFFFFFFF
    for byte in data:
        crc = _crc64_table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


def save_model(model: SvrModel, path: str) -> None:
    d = model.scaler.mean.size
    n_sv = model.dual_coefs.size
    buf = bytearray()
    buf += GSVR_MAGIC
    buf += struct.pack("<H", GSVR_VERSION)
    buf += model.schema_hash[:32].ljust(32, b"\x00")
    buf += struct.pack("<IIB", d, n_sv, 1 if model.converged else 0)
    buf += struct.pack("<3d", model.hyper.c, model.hyper.gamma, model.hyper.epsilon)
    buf += np.asarray(model.scaler.mean, dtype="<f8").tobytes()
    buf += np.asarray(model.scaler.std, dtype="<f8").tobytes()
    buf += np.asarray(model.support_vectors, dtype="<f8").tobytes()
    buf += np.asarray(model.dual_coefs, dtype="<f8").tobytes()
    buf += struct.pack("<d", model.bias)
    buf += struct.pack("<Q", crc64(bytes(buf)))
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def load_model(path: str, expect_schema_hash: bytes | None = None) -> SvrModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != GSVR_MAGIC:
        raise ModelFormatError(f"{path}: not a GSVR model file")
    (stored_crc,) = struct.unpack_from("<Q", raw, len(raw) - 8)
    if crc64(raw[:-8]) != stored_crc:
        raise ModelFormatError(f"{path}: checksum failure, file is corrupt")
    pos = 4
    (version,) = struct.unpack_from("<H", raw, pos)
    pos += 2
    if version != GSVR_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version}")
    schema_hash = raw[pos : pos + 32]
    pos += 32
    d, n_sv, conv = struct.unpack_from("<IIB", raw, pos)
    pos += 9
    c, gamma, epsilon = struct.unpack_from("<3d", raw, pos)
    pos += 24
    mean = np.frombuffer(raw, dtype="<f8", count=d, offset=pos).copy()
    pos += 8 * d
    std = np.frombuffer(raw, dtype="<f8", count=d, offset=pos).copy()
    pos += 8 * d
    sv = np.frombuffer(raw, dtype="<f8", count=n_sv * d, offset=pos).reshape(n_sv, d).copy()
    pos += 8 * n_sv * d
    coefs = np.frombuffer(raw, dtype="<f8", count=n_sv, offset=pos).copy()
    pos += 8 * n_sv
    (bias,) = struct.unpack_from("<d", raw, pos)
    if expect_schema_hash is not None and schema_hash != expect_schema_hash[:32].ljust(32, b"\x00"):
        raise ModelFormatError(
            f"{path}: feature-schema hash mismatch "
            f"(model {schema_hash.hex()[:16]}..., expected {expect_schema_hash.hex()[:16]}...)"
        )
    return SvrModel(
        support_vectors=sv,
        dual_coefs=coefs,
        bias=float(bias),
        hyper=SvrHyper(c=c, gamma=gamma, epsilon=epsilon),
        scaler=Scaler(mean=mean, std=std),
        converged=bool(conv),
        schema_hash=schema_hash,
    )
