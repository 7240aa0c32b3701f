"""Linear (time-, geometry- and frequency-domain) features.

Conventions shared across this module:

* sample statistics use ddof=1; skewness is the biased g1 and kurtosis is the
  Pearson definition (excess + 3);
* MAD is the raw median absolute deviation (no 1.4826 consistency factor);
* windowed statistics ("...Win") are the mean over non-overlapping segments
  of the per-segment statistic, with the trailing partial segment discarded;
* peaks in EDA components are local maxima with prominence >= 0.01 (z-scored
  units) separated by at least 1 s, and their amplitude is the signal value
  at the peak.
"""

from __future__ import annotations

import numpy as np
from scipy import signal, stats

from ..errors import ContractViolation, DegenerateSignalError, InsufficientDataError
from ..spectral import SpectralEstimate, band_peak, band_power, periodogram_psd, welch_psd

HIST_BIN_S = 1.0 / 128.0  # geometric-feature bin width (seconds)
LF_BAND = (0.04, 0.15)
HF_BAND = (0.15, 0.40)
TOTAL_BAND = (0.003, 0.40)
EDASYMP_BAND = (0.045, 0.25)
EDASYMP_TOTAL_BAND = (0.008, 0.25)
PEAK_PROMINENCE = 0.01
PEAK_SEPARATION_S = 1.0


# ---------------------------------------------------------------------------
# RR time domain


def temporal_rr(rr: np.ndarray) -> dict[str, float]:
    """Classic time-domain HRV statistics on RR intervals in ms."""
    rr = np.asarray(rr, dtype=float)
    n = rr.size
    if n < 3:
        raise InsufficientDataError(f"temporal features need >= 3 intervals, got {n}")
    d1 = np.diff(rr)
    d2 = np.diff(rr, n=2)
    nn50 = int(np.sum(np.abs(d1) > 50.0))
    degenerate = np.ptp(rr) == 0.0  # standardized moments undefined; report 0
    return {
        "meanRR": float(np.mean(rr)),
        "stdRR": float(np.std(rr, ddof=1)),
        "SDSD": float(np.std(d1, ddof=1)),
        "RMSSD": float(np.sqrt(np.mean(d1 * d1))),
        "NN50": float(nn50),
        "pNN50": 100.0 * nn50 / (n - 1),
        "meanDER1": float(np.mean(d1)),
        "stdDER1": float(np.std(d1, ddof=1)),
        "meanDER2": float(np.mean(d2)) if d2.size else 0.0,
        "stdDER2": float(np.std(d2, ddof=1)) if d2.size > 1 else 0.0,
        "SkewRR": 0.0 if degenerate else float(stats.skew(rr, bias=True)),
        "KurtRR": 0.0 if degenerate else float(stats.kurtosis(rr, fisher=False, bias=True)),
    }


def _rr_histogram(rr: np.ndarray):
    """Histogram of RR (ms) on the 1/128 s grid; returns (counts, edges)."""
    bin_ms = HIST_BIN_S * 1000.0
    lo = np.floor(rr.min() / bin_ms) * bin_ms
    hi = np.ceil(rr.max() / bin_ms) * bin_ms
    if hi <= lo:
        hi = lo + bin_ms
    edges = np.arange(lo, hi + bin_ms / 2, bin_ms)
    counts, _ = np.histogram(rr, bins=edges)
    return counts.astype(float), edges


def geometric_rr(rr: np.ndarray) -> dict[str, float]:
    """Triangular index and TINN from the 1/128 s histogram.

    TINN is the base width (ms) of the least-squares triangle with its apex
    pinned to the mode bin: apex height = mode count at the mode bin centre,
    feet swept over bin edges left/right of the mode bin, error evaluated at
    every bin centre (zero outside the feet).
    """
    rr = np.asarray(rr, dtype=float)
    if rr.size < 20:
        raise InsufficientDataError("geometric features need >= 20 intervals")
    counts, edges = _rr_histogram(rr)
    centers = 0.5 * (edges[:-1] + edges[1:])
    k_mode = int(np.argmax(counts))
    peak = counts[k_mode]
    tri_rr = rr.size / peak

    apex = centers[k_mode]
    left_feet = edges[: k_mode + 1]
    right_feet = edges[k_mode + 1 :]
    best = (np.inf, edges[k_mode], edges[k_mode + 1])
    for nfoot in left_feet:
        rise = np.zeros_like(centers)
        on = (centers > nfoot) & (centers <= apex)
        if apex > nfoot:
            rise[on] = peak * (centers[on] - nfoot) / (apex - nfoot)
        rise[centers == apex] = peak
        for mfoot in right_feet:
            tri = rise.copy()
            fall = (centers > apex) & (centers < mfoot)
            if mfoot > apex:
                tri[fall] = peak * (mfoot - centers[fall]) / (mfoot - apex)
            err = float(np.sum((counts - tri) ** 2))
            if err < best[0] - 1e-12:
                best = (err, nfoot, mfoot)
    tinn = best[2] - best[1]
    return {"TriRR": float(tri_rr), "TINN": float(tinn)}


# ---------------------------------------------------------------------------
# RR frequency domain


def spectral_rr(rr4: np.ndarray, fs: float = 4.0) -> dict[str, float]:
    """LF/HF band powers and peaks of the 4 Hz resampled tachogram (Welch)."""
    rr4 = np.asarray(rr4, dtype=float)
    if rr4.size < 60 * fs:
        raise InsufficientDataError("spectral features need >= 60 s of resampled RR")
    est = welch_psd(rr4, fs)
    lf = band_power(est, *LF_BAND)
    hf = band_power(est, *HF_BAND)
    total = band_power(est, *TOTAL_BAND)
    if total <= 0 or lf + hf <= 0:
        raise DegenerateSignalError("zero RR spectral power")
    return {
        "LF_power": lf,
        "HF_power": hf,
        "LF_perc": 100.0 * lf / total,
        "HF_perc": 100.0 * hf / total,
        "LF_nu": lf / (lf + hf),
        "HF_nu": hf / (lf + hf),
        "LF_HF": lf / hf if hf > 0 else np.inf,
        "LF_peak": band_peak(est, *LF_BAND),
        "HF_peak": band_peak(est, *HF_BAND),
    }


# ---------------------------------------------------------------------------
# EDA components


def _mad(x: np.ndarray) -> float:
    return float(np.median(np.abs(x - np.median(x))))


def _windowed(x: np.ndarray, fs: float, win_s: float, stat) -> float:
    """Mean of ``stat`` over complete non-overlapping ``win_s`` segments."""
    w = int(round(win_s * fs))
    n_seg = len(x) // w
    if n_seg == 0:
        raise InsufficientDataError(f"signal shorter than one {win_s:g} s segment")
    return float(np.mean([stat(x[i * w : (i + 1) * w]) for i in range(n_seg)]))


def _find_component_peaks(x: np.ndarray, fs: float):
    idx, _ = signal.find_peaks(
        x, prominence=PEAK_PROMINENCE, distance=max(1, int(round(PEAK_SEPARATION_S * fs)))
    )
    return idx


def _peak_stats(x: np.ndarray, fs: float) -> tuple[float, float, float]:
    """(n_peaks, max amplitude, amplitude sum); zeros when nothing qualifies."""
    idx = _find_component_peaks(x, fs)
    if idx.size == 0:
        return 0.0, 0.0, 0.0
    amps = x[idx]
    return float(idx.size), float(np.max(amps)), float(np.sum(amps))


def scl_features(scl: np.ndarray, fs: float = 50.0, win_s: float = 20.0) -> dict[str, float]:
    scl = np.asarray(scl, dtype=float)
    if scl.size < 2 * win_s * fs:
        raise InsufficientDataError(f"SCL features need >= {2 * win_s:g} s of signal")
    return {
        "SCL_mean": float(np.mean(scl)),
        "SCL_median": float(np.median(scl)),
        "SCL_std": float(np.std(scl, ddof=1)),
        "SCL_mad": _mad(scl),
        "SCL_meanWin": _windowed(scl, fs, win_s, np.mean),
        "SCL_medWin": _windowed(scl, fs, win_s, np.median),
        "SCL_stdWin": _windowed(scl, fs, win_s, lambda s: np.std(s, ddof=1)),
        "SCL_madWin": _windowed(scl, fs, win_s, _mad),
    }


def scr_features(scr: np.ndarray, fs: float = 50.0, win_s: float = 5.0) -> dict[str, float]:
    scr = np.asarray(scr, dtype=float)
    if scr.size < 2 * win_s * fs:
        raise InsufficientDataError(f"SCR features need >= {2 * win_s:g} s of signal")
    n_peaks, max_peak, amp_sum = _peak_stats(scr, fs)
    return {
        "SCR_mean": float(np.mean(scr)),
        "SCR_median": float(np.median(scr)),
        "SCR_std": float(np.std(scr, ddof=1)),
        "SCR_mad": _mad(scr),
        "SCR_npeaks": n_peaks,
        "SCR_maxpeak": max_peak,
        "SCR_ampsum": amp_sum,
        "SCR_meanWin": _windowed(scr, fs, win_s, np.mean),
        "SCR_medWin": _windowed(scr, fs, win_s, np.median),
        "SCR_stdWin": _windowed(scr, fs, win_s, lambda s: np.std(s, ddof=1)),
        "SCR_madWin": _windowed(scr, fs, win_s, _mad),
        "SCR_ampsumWin": _windowed(scr, fs, win_s, lambda s: _peak_stats(s, fs)[2]),
    }


def smna_features(smna: np.ndarray, fs: float = 50.0) -> dict[str, float]:
    smna = np.asarray(smna, dtype=float)
    if smna.size < 10 * fs:
        raise InsufficientDataError("SMNA features need >= 10 s of signal")
    n_peaks, max_peak, amp_sum = _peak_stats(smna, fs)
    return {
        "SMNA_mean": float(np.mean(smna)),
        "SMNA_maxpeak": max_peak,
        "SMNA_npeaks": n_peaks,
        "SMNA_ampsum": amp_sum,
    }


def _edasymp_triplet(est: SpectralEstimate, suffix: str) -> dict[str, float]:
    p = band_power(est, *EDASYMP_BAND)
    total = band_power(est, *EDASYMP_TOTAL_BAND)
    if total <= 0 or p <= 0:
        raise DegenerateSignalError("zero EDA spectral power in the sympathetic band")
    return {
        f"EDASymp{suffix}": p,
        f"EDASymp_db{suffix}": 10.0 * np.log10(p),
        f"EDASymp_nu{suffix}": p / total,
    }


def edasymp_features(scl: np.ndarray, scr: np.ndarray, fs: float = 50.0) -> dict[str, float]:
    """Sympathetic-band (0.045-0.25 Hz) power of scl + scr, periodogram and
    Welch variants, each raw / dB / normalized by 0.008-0.25 Hz power."""
    scl = np.asarray(scl, dtype=float)
    scr = np.asarray(scr, dtype=float)
    if scl.shape != scr.shape:
        raise ContractViolation("scl and scr must have equal length")
    x = scl + scr
    out = _edasymp_triplet(periodogram_psd(x, fs), "")
    out.update(_edasymp_triplet(welch_psd(x, fs), "_Welch"))
    return out


def combined_ratios(edasymp: float, edasymp_welch: float, hf_power: float) -> dict[str, float]:
    if hf_power <= 0:
        raise DegenerateSignalError("HF power must be positive for combined ratios")
    return {
        "EDASymp_HF": edasymp / hf_power,
        "EDASymp_Welch_HF": edasymp_welch / hf_power,
    }
