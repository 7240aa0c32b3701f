"""Higher-order (bispectral) features of the 4 Hz resampled tachogram.

Direct bispectrum estimate: 30 s Hann segments with 75% overlap, per-segment
mean removal, B(f1, f2) = mean over segments of X(f1) X(f2) X*(f1 + f2).
Features are computed on the non-redundant triangle 0 < f2 <= f1 <= 0.4 Hz.
LL / LH / HH average |B| over the sub-regions where both frequencies fall in
the LF band, (f1, f2) straddle HF/LF, or both fall in the HF band.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateSignalError, InsufficientDataError
from .linear import HF_BAND, LF_BAND

PHASE_BINS = 64


def bispectrum_triangle(
    x, fs: float = 4.0, seg_seconds: float = 30.0, overlap: float = 0.75, f_max: float = 0.4
):
    """Bispectrum on the non-redundant triangle; returns (f1, f2, B)."""
    x = np.asarray(x, dtype=float)
    nperseg = int(round(seg_seconds * fs))
    if x.size < nperseg:
        raise InsufficientDataError("bispectrum needs at least one full segment")
    step = nperseg - int(round(overlap * nperseg))
    starts = range(0, x.size - nperseg + 1, step)
    win = np.hanning(nperseg)
    freqs = np.fft.rfftfreq(nperseg, d=1.0 / fs)

    k_max = int(np.searchsorted(freqs, f_max + 1e-12))  # bins with f <= f_max
    k1, k2 = np.meshgrid(np.arange(1, k_max), np.arange(1, k_max), indexing="ij")
    tri = k2 <= k1
    k1, k2 = k1[tri], k2[tri]

    acc = np.zeros(k1.size, dtype=complex)
    n_seg = 0
    for s in starts:
        seg = x[s : s + nperseg]
        spec = np.fft.rfft((seg - seg.mean()) * win)
        acc += spec[k1] * spec[k2] * np.conj(spec[k1 + k2])
        n_seg += 1
    b = acc / n_seg
    return freqs[k1], freqs[k2], b


def bispectral_rr(rr4, fs: float = 4.0) -> dict[str, float]:
    rr4 = np.asarray(rr4, dtype=float)
    if rr4.size < 60 * fs:
        raise InsufficientDataError("bispectral features need >= 60 s of resampled RR")
    f1, f2, b = bispectrum_triangle(rr4, fs=fs)
    mag = np.abs(b)
    if not np.any(mag > 0):
        raise DegenerateSignalError("all-zero bispectrum")
    power = mag * mag
    n_pts = mag.size

    p_mag = mag / mag.sum()
    nz = p_mag[p_mag > 0]
    n_bis_ent = float(-np.sum(nz * np.log(nz)) / np.log(n_pts))
    p_pow = power / power.sum()
    nz = p_pow[p_pow > 0]
    n_bis_sq_ent = float(-np.sum(nz * np.log(nz)) / np.log(n_pts))

    biphase = np.angle(b)  # in (-pi, pi]
    edges = np.linspace(-np.pi, np.pi, PHASE_BINS + 1)
    counts, _ = np.histogram(biphase, bins=edges)
    p = counts[counts > 0] / counts.sum()
    phase_entr = float(-np.sum(p * np.log(p)))

    def region_mean(sel: np.ndarray) -> float:
        return float(mag[sel].mean()) if sel.any() else 0.0

    in_lf1 = (f1 >= LF_BAND[0]) & (f1 <= LF_BAND[1])
    in_lf2 = (f2 >= LF_BAND[0]) & (f2 <= LF_BAND[1])
    in_hf1 = (f1 > HF_BAND[0]) & (f1 <= HF_BAND[1])
    in_hf2 = (f2 > HF_BAND[0]) & (f2 <= HF_BAND[1])

    return {
        "Phase_Entr": phase_entr,
        "Mean_Magn": float(mag.mean()),
        "Mean_P": float(power.mean()),
        "std_P": float(np.std(power, ddof=1)),
        "N_Bis_Ent": n_bis_ent,
        "N_Bis_Sq_Ent": n_bis_sq_ent,
        "Sum_log_Amp": float(np.sum(np.log(mag[mag > 0]))),
        "LL": region_mean(in_lf1 & in_lf2),
        "LH": region_mean(in_hf1 & in_lf2),
        "HH": region_mean(in_hf1 & in_hf2),
    }
