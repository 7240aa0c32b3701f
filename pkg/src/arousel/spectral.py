"""Shared power-spectral-density helpers.

All RR and EDA spectral features run through the same two estimators so that
band powers are comparable across families:

* Welch: Hann segments (30 s by default), 75% overlap, per-segment mean
  removal, one-sided density scaling.
* Periodogram: single mean-detrended Hann-free rectangle window, one-sided
  density scaling.

Band powers integrate the density with the trapezoidal rule over the grid
points that fall inside the (inclusive) band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DataWarning, InsufficientDataError


@dataclass(frozen=True)
class SpectralEstimate:
    freqs: np.ndarray
    psd: np.ndarray
    method: str  # "welch" or "periodogram"


def periodogram_psd(x, fs: float) -> SpectralEstimate:
    """One-sided mean-detrended periodogram (density scaling)."""
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        raise InsufficientDataError(f"periodogram needs >= 4 samples, got {x.size}")
    freqs, psd = signal.periodogram(x, fs=fs, detrend="constant", scaling="density")
    return SpectralEstimate(freqs=freqs, psd=psd, method="periodogram")


def welch_psd(x, fs: float, seg_seconds: float = 30.0, overlap: float = 0.75) -> SpectralEstimate:
    """Welch PSD with Hann segments and per-segment mean removal.

    Falls back to a plain periodogram (with a DataWarning) when the signal is
    shorter than one segment, so short windows degrade gracefully instead of
    failing.
    """
    x = np.asarray(x, dtype=float)
    nperseg = int(round(seg_seconds * fs))
    if x.size < nperseg:
        warnings.warn(
            f"signal shorter than one {seg_seconds:g} s Welch segment "
            f"({x.size} < {nperseg} samples): falling back to periodogram",
            DataWarning,
            stacklevel=2,
        )
        est = periodogram_psd(x, fs)
        return SpectralEstimate(freqs=est.freqs, psd=est.psd, method="periodogram")
    noverlap = int(round(overlap * nperseg))
    freqs, psd = signal.welch(
        x,
        fs=fs,
        window="hann",
        nperseg=nperseg,
        noverlap=noverlap,
        detrend="constant",
        scaling="density",
    )
    return SpectralEstimate(freqs=freqs, psd=psd, method="welch")


def band_power(est: SpectralEstimate, lo: float, hi: float) -> float:
    """Trapezoidal band power over grid points with lo <= f <= hi."""
    mask = (est.freqs >= lo) & (est.freqs <= hi)
    if mask.sum() < 2:
        return 0.0
    return float(np.trapezoid(est.psd[mask], est.freqs[mask]))


def band_peak(est: SpectralEstimate, lo: float, hi: float) -> float:
    """Frequency of the maximum PSD value inside the band (first on ties)."""
    mask = (est.freqs >= lo) & (est.freqs <= hi)
    if not mask.any():
        return 0.0
    f, p = est.freqs[mask], est.psd[mask]
    return float(f[int(np.argmax(p))])
