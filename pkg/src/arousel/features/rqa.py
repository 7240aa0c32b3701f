"""Recurrence-quantification features of the RR tachogram.

Embedding m = 10, delay 1, Euclidean norm; the recurrence threshold is 15%
of the maximum phase-space distance.  The line of identity is excluded via a
Theiler window of 1.  Diagonal and vertical structures use minimum length 2.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import FeatureWarning, InsufficientDataError

RQA_NAMES = (
    "rec_rate", "det", "avg_diag", "ratio", "ent",
    "lam", "trap_time", "max_len", "mean_rec_time",
)


def recurrence_matrix(
    x, m: int = 10, tau: int = 1, eps_frac: float = 0.15, theiler: int = 1
) -> np.ndarray:
    """Boolean recurrence matrix (|i - j| < theiler masked out)."""
    x = np.asarray(x, dtype=float)
    n_t = x.size - (m - 1) * tau
    if n_t < 50:
        raise InsufficientDataError("RQA needs >= 50 embedded points")
    idx = np.arange(n_t)[:, None] + tau * np.arange(m)[None, :]
    pts = x[idx]
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    eps = eps_frac * float(dist.max())
    rec = dist <= eps
    off = np.abs(np.arange(n_t)[:, None] - np.arange(n_t)[None, :])
    rec[off < theiler] = False
    return rec


def _run_lengths(mask: np.ndarray) -> list[int]:
    """Lengths of maximal runs of True in a 1-D boolean array."""
    runs, count = [], 0
    for v in mask:
        if v:
            count += 1
        elif count:
            runs.append(count)
            count = 0
    if count:
        runs.append(count)
    return runs


def rqa_measures(rec: np.ndarray, l_min: int = 2, v_min: int = 2) -> dict[str, float]:
    """The nine RQA measures from a recurrence matrix."""
    n = rec.shape[0]
    total_pairs = n * (n - 1)
    n_rec = int(rec.sum())
    if n_rec == 0:
        warnings.warn("no recurrent points; RQA measures set to 0", FeatureWarning, stacklevel=2)
        return {k: 0.0 for k in RQA_NAMES}

    diag_lengths: list[int] = []
    for k in range(1, n):
        for d in (np.diagonal(rec, offset=k), np.diagonal(rec, offset=-k)):
            diag_lengths.extend(_run_lengths(d))
    diag_lengths_arr = np.array(diag_lengths, dtype=int)
    long_diag = diag_lengths_arr[diag_lengths_arr >= l_min]
    pts_on_diagonals = int(diag_lengths_arr.sum())  # == n_rec
    det = float(long_diag.sum()) / pts_on_diagonals if pts_on_diagonals else 0.0
    avg_diag = float(long_diag.mean()) if long_diag.size else 0.0
    max_len = float(diag_lengths_arr.max()) if diag_lengths_arr.size else 0.0

    if long_diag.size:
        _, counts = np.unique(long_diag, return_counts=True)
        p = counts / counts.sum()
        ent = float(-np.sum(p * np.log(p)))
    else:
        ent = 0.0

    vert_lengths: list[int] = []
    rec_times: list[int] = []
    for j in range(n):
        col = rec[:, j]
        vert_lengths.extend(_run_lengths(col))
        rows = np.where(col)[0]
        if rows.size > 1:
            rec_times.extend(np.diff(rows).tolist())
    vert_arr = np.array(vert_lengths, dtype=int)
    long_vert = vert_arr[vert_arr >= v_min]
    lam = float(long_vert.sum()) / vert_arr.sum() if vert_arr.size else 0.0
    trap_time = float(long_vert.mean()) if long_vert.size else 0.0
    mean_rec_time = float(np.mean(rec_times)) if rec_times else 0.0

    rec_rate = n_rec / total_pairs
    return {
        "rec_rate": float(rec_rate),
        "det": det,
        "avg_diag": avg_diag,
        "ratio": det / rec_rate if rec_rate > 0 else 0.0,
        "ent": ent,
        "lam": lam,
        "trap_time": trap_time,
        "max_len": max_len,
        "mean_rec_time": mean_rec_time,
    }


def rqa_rr(rr, **kwargs) -> dict[str, float]:
    return rqa_measures(recurrence_matrix(rr, **kwargs))
