"""Independent reference implementations used to cross-check the pipeline.

Nothing here imports the production code paths it validates: the QP solver
is a plain projected-gradient method, the rank metrics are computed by
explicit sorting and pair enumeration, and the distribution samplers draw
directly from the generating definitions.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gamma as gamma_fn


# ---------------------------------------------------------------------------
# Synthetic distribution samplers


def sample_ggd(alpha: float, sigma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from a zero-mean generalized Gaussian with shape alpha, std sigma."""
    b = sigma * np.sqrt(gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha))
    mag = b * rng.gamma(shape=1.0 / alpha, scale=1.0, size=n) ** (1.0 / alpha)
    signs = rng.choice([-1.0, 1.0], size=n)
    return mag * signs


def sample_split_gaussian(sigma_l: float, sigma_r: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sign-split half-Gaussians with left/right scales sigma_l, sigma_r."""
    mag = np.abs(rng.standard_normal(n))
    signs = rng.choice([-1.0, 1.0], size=n)
    return np.where(signs < 0, -sigma_l * mag, sigma_r * mag)


# ---------------------------------------------------------------------------
# Brute-force rank metrics


def brute_ranks(x: np.ndarray) -> np.ndarray:
    """Average ranks by explicit sorting and tie-group averaging."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0  # 1-based
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / denom) if denom > 0 else float("nan")


def brute_srcc(pred, mos) -> float:
    return _pearson(brute_ranks(np.asarray(pred)), brute_ranks(np.asarray(mos)))


def brute_krcc(pred, mos) -> float:
    """Kendall tau-b by exhaustive pair enumeration."""
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    n = pred.size
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pred[i] - pred[j]
            dy = mos[i] - mos[j]
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = np.sqrt(float(n0 - ties_x) * float(n0 - ties_y))
    return float((concordant - discordant) / denom) if denom > 0 else float("nan")


def brute_plcc(pred, mos) -> float:
    return _pearson(np.asarray(pred, dtype=np.float64), np.asarray(mos, dtype=np.float64))


def brute_rmse(pred, mos) -> float:
    d = np.asarray(pred, dtype=np.float64) - np.asarray(mos, dtype=np.float64)
    return float(np.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------------------
# Projected-gradient epsilon-SVR dual solver


def _project(v: np.ndarray, signs: np.ndarray, c: float) -> np.ndarray:
    """Project onto {0 <= a <= C, signs . a = 0} exactly.

    The constraint g(lam) = signs . clip(v - lam*signs, 0, C) is piecewise
    linear and nonincreasing in the multiplier, so the root is found by
    sorting the clip breakpoints and interpolating on the crossing segment.
    """
    pos, neg = signs > 0, signs < 0
    bp = np.sort(np.concatenate([v[pos] - c, v[pos], -v[neg], c - v[neg]]))
    g = np.clip(v[None, :] - np.outer(bp, signs), 0.0, c) @ signs
    above = np.flatnonzero(g > 0)
    if above.size == 0:
        lam = bp[0]
    elif above[-1] + 1 >= bp.size:
        lam = bp[-1]
    else:
        i = above[-1]
        g1, g2 = g[i], g[i + 1]
        lam = bp[i] if g1 == g2 else bp[i] + g1 * (bp[i + 1] - bp[i]) / (g1 - g2)
    return np.clip(v - lam * signs, 0.0, c)


def pg_svr_solve(K: np.ndarray, y: np.ndarray, c: float, epsilon: float, iters: int = 20000):
    """Accelerated projected gradient on the doubled epsilon-SVR dual.

    Returns (dual_coefs, bias) for f(x) = sum_i coef_i k(x_i, x) + bias.
    """
    n = K.shape[0]
    signs = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    Q = np.block([[K, -K], [-K, K]])
    L = float(np.linalg.eigvalsh(Q)[-1]) + 1e-9
    step = 1.0 / L
    a = np.zeros(2 * n)
    z = a.copy()
    t = 1.0
    obj_prev = np.inf
    for _ in range(iters):
        g = Q @ z + p
        a_new = _project(z - step * g, signs, c)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = a_new + (t - 1.0) / t_new * (a_new - a)
        a, t = a_new, t_new
        obj = 0.5 * a @ Q @ a + p @ a
        if obj > obj_prev:  # restart momentum on objective increase
            z = a.copy()
            t = 1.0
        obj_prev = obj

    G = Q @ a + p
    yg = signs * G
    free = (a > 1e-8 * c) & (a < c * (1.0 - 1e-8))
    if np.any(free):
        rho = float(np.mean(yg[free]))
    else:
        up = ((signs > 0) & (a < c / 2)) | ((signs < 0) & (a > c / 2))
        ub = np.min(yg[up]) if np.any(up) else np.inf
        lb = np.max(yg[~up]) if np.any(~up) else -np.inf
        rho = float((ub + lb) / 2.0)
    beta = a[:n] - a[n:]
    return beta, -rho


# ---------------------------------------------------------------------------
# Self-test suite (exercised by `gamevqa selftest`)


def run_selftest() -> list[tuple[str, bool, str]]:
    from .metrics import compute_metrics
    from .nss import fit_aggd, fit_ggd
    from .svr import SvrHyper, predict_svr, rbf_kernel, train_svr
    from .temporal import haar7

    results = []
    rng = np.random.default_rng(7)

    g = fit_ggd(sample_ggd(2.0, 1.0, 100_000, rng))
    results.append(("ggd gaussian alpha~2", 1.8 <= g.alpha <= 2.2, f"alpha={g.alpha:.3f}"))
    a = fit_aggd(sample_split_gaussian(1.0, 2.0, 100_000, rng))
    ok = abs(a.sigma_l_sq - 1.0) < 0.1 and abs(a.sigma_r_sq - 4.0) < 0.4
    results.append(("aggd split recovery", ok, f"sl2={a.sigma_l_sq:.3f} sr2={a.sigma_r_sq:.3f}"))

    impulse = np.zeros((8, 4, 4))
    impulse[0] = 1.0
    bands = haar7(impulse)
    vals = (bands.details[0][0, 0], bands.details[4][0, 0], bands.details[6][0, 0])
    expect = (1 / np.sqrt(2), 0.5, 1 / (2 * np.sqrt(2)))
    ok = all(abs(v - e) < 1e-12 for v, e in zip(vals, expect))
    results.append(("haar impulse response", ok, f"{vals}"))

    row = compute_metrics([1.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    ok = abs(row.srcc - 1.5 / np.sqrt(3)) < 1e-12 and abs(row.krcc - 2 / np.sqrt(6)) < 1e-12
    results.append(("tied-rank metrics hand case", ok, f"srcc={row.srcc:.6f} krcc={row.krcc:.6f}"))

    X = rng.standard_normal((12, 3))
    y = rng.standard_normal(12)
    hyper = SvrHyper(c=4.0, gamma=0.5, epsilon=0.1)
    model = train_svr(X, y, hyper)
    K = rbf_kernel(X, X, hyper.gamma)
    beta, bias = pg_svr_solve(K, y, hyper.c, hyper.epsilon)
    Xq = rng.standard_normal((5, 3))
    ours = predict_svr(model, Xq)
    ref = rbf_kernel(Xq, X, hyper.gamma) @ beta + bias
    ok = np.max(np.abs(ours - ref)) < 1e-3
    results.append(("svr smo vs projected gradient", ok, f"max diff={np.max(np.abs(ours - ref)):.2e}"))
    return results
