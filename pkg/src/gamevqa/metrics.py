"""Correlation and error metrics between predicted and subjective scores.

SRCC uses average ranks for ties, KRCC is Kendall tau-b, PLCC is Pearson on
raw values (no logistic remapping), RMSE is the root mean squared error.
Zero-variance inputs make the correlations undefined; they are reported as
NaN with an explicit flag rather than raising.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class MetricsRow:
    srcc: float
    krcc: float
    plcc: float
    rmse: float
    undefined: bool = False

    def as_dict(self) -> dict:
        return {
            "srcc": self.srcc,
            "krcc": self.krcc,
            "plcc": self.plcc,
            "rmse": self.rmse,
            "undefined": self.undefined,
        }


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    return stats.rankdata(x, method="average")


def compute_metrics(pred, mos) -> MetricsRow:
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if pred.shape != mos.shape or pred.ndim != 1:
        raise ValueError("pred and mos must be 1-d arrays of equal length")
    if pred.size < 3:
        raise ValueError("need at least 3 points for correlation metrics")
    rmse = float(np.sqrt(np.mean((pred - mos) ** 2)))
    if np.ptp(pred) == 0.0 or np.ptp(mos) == 0.0:
        return MetricsRow(srcc=np.nan, krcc=np.nan, plcc=np.nan, rmse=rmse, undefined=True)
    with warnings.catch_warnings():
        # exact zero variance is handled above; near-constant inputs are valid
        warnings.simplefilter("ignore", stats.NearConstantInputWarning)
        srcc = float(stats.pearsonr(average_ranks(pred), average_ranks(mos))[0])
        krcc = float(stats.kendalltau(pred, mos, variant="b")[0])
        plcc = float(stats.pearsonr(pred, mos)[0])
    return MetricsRow(srcc=srcc, krcc=krcc, plcc=plcc, rmse=rmse)
