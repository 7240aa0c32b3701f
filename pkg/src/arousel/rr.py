"""R-peak detection and RR tachogram preparation.

The detector follows the classic Pan-Tompkins recipe: 5-15 Hz zero-phase
band-pass, five-point derivative, squaring, 150 ms moving-window integration,
adaptive dual thresholds with search-back, a 200 ms refractory period and a
360 ms slope test to reject T waves.  Peak instants are then refined to the
local extremum of the band-passed ECG so timing is not biased by the
integrator width.

RR intervals are expressed in milliseconds.  For spectral work the irregular
tachogram is resampled at 4 Hz with a shape-preserving monotone cubic
(PCHIP), which cannot overshoot the observed interval range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.interpolate import PchipInterpolator

from .errors import ContractViolation, InsufficientDataError, SignalQualityError

MIN_PEAKS = 3
REFRACTORY_S = 0.200
TWAVE_WINDOW_S = 0.360
INTEGRATION_S = 0.150


@dataclass(frozen=True)
class RRSeries:
    """RR tachogram: ``intervals[i]`` (ms) ends at ``beat_times[i + 1]`` (s)."""

    intervals: np.ndarray
    beat_times: np.ndarray

    def __post_init__(self):
        if len(self.beat_times) != len(self.intervals) + 1:
            raise ContractViolation("beat_times must have len(intervals) + 1 entries")

    @property
    def n(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class UniformSeries:
    """Evenly sampled series: sample i sits at ``t0 + i / fs``."""

    values: np.ndarray
    fs: float
    t0: float = 0.0

    @property
    def duration(self) -> float:
        return (len(self.values) - 1) / self.fs


def _bandpass(ecg: np.ndarray, fs: float) -> np.ndarray:
    sos = signal.butter(3, [5.0, 15.0], btype="bandpass", output="sos", fs=fs)
    return signal.sosfiltfilt(sos, ecg)


def _derivative(x: np.ndarray, fs: float) -> np.ndarray:
    # Pan-Tompkins five-point derivative, gain-normalized by the sample step.
    kernel = np.array([2.0, 1.0, 0.0, -1.0, -2.0]) / 8.0
    return np.convolve(x, kernel[::-1], mode="same") * fs


def _integrate(x: np.ndarray, fs: float) -> np.ndarray:
    w = max(1, int(round(INTEGRATION_S * fs)))
    return np.convolve(x, np.ones(w) / w, mode="same")


def detect_r_peaks(ecg, fs: float) -> np.ndarray:
    """Detect R-peak times (seconds) in a single-lead ECG.

    Parameters
    ----------
    ecg : sequence of float
        Raw ECG samples.
    fs : float
        Sampling rate in Hz (>= 100).

    Returns
    -------
    np.ndarray
        Strictly increasing peak times with successive gaps >= 200 ms.
    """
    ecg = np.asarray(ecg, dtype=float)
    if fs < 100:
        raise ContractViolation(f"detector needs fs >= 100 Hz, got {fs}")
    if ecg.size < 2 * fs:
        raise InsufficientDataError("detector needs at least 2 s of ECG")
    if not np.all(np.isfinite(ecg)):
        raise SignalQualityError("ECG contains non-finite samples")
    if np.ptp(ecg) == 0:
        raise SignalQualityError("ECG is constant")

    bp = _bandpass(ecg, fs)
    der = _derivative(bp, fs)
    mwi = _integrate(der * der, fs)

    refractory = int(round(REFRACTORY_S * fs))
    cand, _ = signal.find_peaks(mwi, distance=refractory)
    if cand.size == 0:
        raise SignalQualityError("no QRS candidates found")

    # Adaptive dual thresholds on the integrated signal (Pan-Tompkins).
    init = mwi[: int(2 * fs)]
    spki = float(np.max(init)) * 0.5
    npki = float(np.mean(init)) * 0.5
    twave_win = int(round(TWAVE_WINDOW_S * fs))

    accepted: list[int] = []
    slopes: dict[int, float] = {}

    def _slope_at(idx: int) -> float:
        lo, hi = max(0, idx - refractory // 2), min(len(der), idx + refractory // 2)
        return float(np.max(np.abs(der[lo:hi]))) if hi > lo else 0.0

    missed_limit = None
    rr_history: list[float] = []
    for idx in cand:
        thr1 = npki + 0.25 * (spki - npki)
        peak = mwi[idx]
        is_signal = peak > thr1
        if not is_signal and missed_limit is not None and accepted:
            # Search-back with the lowered threshold when a beat is overdue.
            if idx - accepted[-1] > missed_limit and peak > 0.5 * thr1:
                is_signal = True
        if is_signal and accepted:
            gap = idx - accepted[-1]
            if gap < refractory:
                is_signal = False
            elif gap < twave_win:
                # T-wave test: reject if the local slope collapsed.
                if _slope_at(idx) < 0.5 * slopes.get(accepted[-1], np.inf):
                    is_signal = False
        if is_signal:
            if accepted:
                rr_history.append(float(idx - accepted[-1]))
                rr_history = rr_history[-8:]
                missed_limit = int(1.66 * np.mean(rr_history))
            accepted.append(int(idx))
            slopes[int(idx)] = _slope_at(int(idx))
            spki = 0.125 * peak + 0.875 * spki
        else:
            npki = 0.125 * peak + 0.875 * npki

    if len(accepted) < MIN_PEAKS:
        raise SignalQualityError(
            f"only {len(accepted)} QRS complexes detected (need >= {MIN_PEAKS})"
        )

    # Refine each fiducial to the band-passed extremum near the candidate.
    half = int(round(0.100 * fs))
    refined: list[int] = []
    for idx in accepted:
        lo, hi = max(0, idx - half), min(len(bp), idx + half + 1)
        refined.append(lo + int(np.argmax(np.abs(bp[lo:hi]))))

    # Deduplicate refinements that collapsed onto the same extremum.
    refined_arr = np.array(sorted(set(refined)), dtype=int)
    keep = [int(refined_arr[0])]
    for idx in refined_arr[1:]:
        if idx - keep[-1] >= refractory:
            keep.append(int(idx))
        elif np.abs(bp[idx]) > np.abs(bp[keep[-1]]):
            keep[-1] = int(idx)
    if len(keep) < MIN_PEAKS:
        raise SignalQualityError(
            f"only {len(keep)} QRS complexes detected (need >= {MIN_PEAKS})"
        )
    return np.asarray(keep, dtype=float) / fs


def build_rr(beat_times) -> RRSeries:
    """Turn beat times (s) into an RR tachogram in milliseconds."""
    t = np.asarray(beat_times, dtype=float)
    if t.size < MIN_PEAKS:
        raise InsufficientDataError(f"need >= {MIN_PEAKS} beats, got {t.size}")
    d = np.diff(t)
    if np.any(d <= 0):
        bad = int(np.argmax(d <= 0))
        raise SignalQualityError(f"beat times not strictly increasing at index {bad + 1}")
    return RRSeries(intervals=d * 1000.0, beat_times=t)


def filter_ectopic(rr: RRSeries, threshold: float = 0.2) -> RRSeries:
    """Drop beats whose interval jumps more than ``threshold`` (fractional)
    relative to the previous accepted interval.

    Disabled by default in the pipeline; intended for recordings with
    occasional spurious detections.
    """
    times = list(rr.beat_times[:2])
    last = rr.intervals[0]
    for t in rr.beat_times[2:]:
        iv = (t - times[-1]) * 1000.0
        if abs(iv - last) <= threshold * last:
            times.append(t)
            last = iv
        # else: skip this beat; the next interval accumulates
    if len(times) < MIN_PEAKS:
        raise SignalQualityError("ectopic filter removed too many beats")
    return build_rr(np.asarray(times))


def resample_rr(rr: RRSeries, fs: float = 4.0) -> UniformSeries:
    """Resample the tachogram on a uniform grid with a monotone cubic.

    Knots are the interval completion times (the second beat of each pair);
    the grid runs from the first knot to the last so the interpolant is never
    extrapolated.  PCHIP cannot overshoot, so resampled values stay inside
    [min(intervals), max(intervals)].
    """
    if rr.n < 2:
        raise InsufficientDataError("resampling needs >= 2 intervals")
    knots = rr.beat_times[1:]
    n_out = int(np.floor((knots[-1] - knots[0]) * fs)) + 1
    if n_out < 2:
        raise InsufficientDataError(
            f"tachogram spans {knots[-1] - knots[0]:.3f} s; need at least {2 / fs:g} s"
        )
    interp = PchipInterpolator(knots, rr.intervals)
    t = knots[0] + np.arange(n_out) / fs
    return UniformSeries(values=interp(t), fs=fs, t0=float(knots[0]))
