"""Lagged Poincaré-plot descriptors.

For each lag M the pair cloud is (RR_i, RR_{i+M}).  SD1/SD2 are the sample
standard deviations of the rotated axes (difference/sum over sqrt(2)), and
the π·SD1·SD2 ellipse surface, SD1/SD2 ratio and Pearson correlation follow.
SDRR(M) is the sample sd over the indices that appear in the lag-M cloud;
for n > 2M that set is the whole series, so SDRR is then lag-independent by
construction.  AUC features integrate each measure over M = 1..10 with the
trapezoidal rule (unit lag step).
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import FeatureWarning, InsufficientDataError
from .registry import POINCARE_LAGS


def _lag_measures(rr: np.ndarray, m: int) -> dict[str, float]:
    x = rr[:-m]
    y = rr[m:]
    sd1_sq = np.var(y - x, ddof=1) / 2.0
    sd2_sq = np.var(y + x, ddof=1) / 2.0
    sd1 = float(np.sqrt(sd1_sq))
    sd2 = float(np.sqrt(sd2_sq))
    if sd1_sq == 0.0 or sd2_sq == 0.0 or np.std(x) == 0.0 or np.std(y) == 0.0:
        warnings.warn(
            f"zero-variance Poincare cloud at lag {m}; ratio/correlation set to 0",
            FeatureWarning,
            stacklevel=3,
        )
        sd12 = 0.0
        rho = 0.0
    else:
        sd12 = sd1 / sd2
        rho = float(np.corrcoef(x, y)[0, 1])
    used = np.union1d(np.arange(len(x)), np.arange(m, m + len(y)))
    return {
        "SD1": sd1,
        "SD2": sd2,
        "SD12": sd12,
        "rhoRR": rho,
        "P_surf": float(np.pi * sd1 * sd2),
        "SDRR": float(np.std(rr[used], ddof=1)),
    }


def lagged_poincare(rr) -> dict[str, float]:
    """All 66 lagged Poincaré features (6 measures x 10 lags + 6 AUCs)."""
    rr = np.asarray(rr, dtype=float)
    lags = list(POINCARE_LAGS)
    if rr.size < max(lags) + 10:
        raise InsufficientDataError(
            f"lagged Poincare needs >= {max(lags) + 10} intervals, got {rr.size}"
        )
    out: dict[str, float] = {}
    curves: dict[str, list[float]] = {k: [] for k in ("SD1", "SD2", "SD12", "rhoRR", "P_surf", "SDRR")}
    for m in lags:
        measures = _lag_measures(rr, m)
        for key, val in measures.items():
            out[f"{key}_{m}"] = val
            curves[key].append(val)
    auc_names = {
        "SD1": "AUC_SD1",
        "SD2": "AUC_SD2",
        "SD12": "AUC_SD12",
        "rhoRR": "AUC_rho_RR",
        "P_surf": "AUC_P_surf",
        "SDRR": "AUC_SDRR",
    }
    for key, auc_name in auc_names.items():
        out[auc_name] = float(np.trapezoid(curves[key], dx=1.0))
    return out
