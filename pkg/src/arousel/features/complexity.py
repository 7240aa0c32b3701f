"""Fractal, scaling, symbolic and entropy descriptors.

Covers: Sevcik fractal dimension, rescaled-range Hurst exponent, detrended
fluctuation slopes, symbolic-dynamics word statistics, attention (key-point
interval) entropy, sample/fuzzy/distribution entropy of RR, and the
distribution entropy of the phasic EDA phase space (ComEDA) with its
coarse-grained median variant (MComEDA).
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import FeatureWarning, InsufficientDataError

# ---------------------------------------------------------------------------
# fractal


def fracdim_sevcik(x) -> float:
    """Sevcik fractal dimension: map to the unit square, measure the path.

    FD = 1 + ln(L) / ln(2 (n - 1)); constant series map to FD = 1.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 64:
        raise InsufficientDataError("FracDim needs >= 64 samples")
    rng = np.ptp(x)
    if rng == 0:
        return 1.0
    ys = (x - x.min()) / rng
    xs = np.arange(n) / (n - 1)
    length = float(np.sum(np.hypot(np.diff(xs), np.diff(ys))))
    return 1.0 + np.log(length) / np.log(2.0 * (n - 1))


def hurst_rs(x) -> float:
    """Rescaled-range Hurst exponent over dyadic windows 8 .. n/2."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 64:
        raise InsufficientDataError("Hurst needs >= 64 samples")
    sizes = []
    w = 8
    while w <= n // 2:
        sizes.append(w)
        w *= 2
    log_w, log_rs = [], []
    for w in sizes:
        ratios = []
        for b in range(n // w):
            seg = x[b * w : (b + 1) * w]
            s = np.std(seg, ddof=1)
            if s == 0:
                continue
            c = np.cumsum(seg - np.mean(seg))
            r = float(np.max(c) - np.min(c))
            if r > 0:
                ratios.append(r / s)
        if ratios:
            log_w.append(np.log(w))
            log_rs.append(np.log(np.mean(ratios)))
    if len(log_w) < 2:
        warnings.warn("degenerate R/S statistics; Hurst set to 0.5", FeatureWarning, stacklevel=2)
        return 0.5
    return float(np.polyfit(log_w, log_rs, 1)[0])


def fractal_rr(rr) -> dict[str, float]:
    return {"FracDim": float(fracdim_sevcik(rr)), "HurstExp": float(hurst_rs(rr))}


# ---------------------------------------------------------------------------
# detrended fluctuation analysis


def _dfa_fluctuation(profile: np.ndarray, s: int) -> float:
    n_boxes = profile.size // s
    segs = profile[: n_boxes * s].reshape(n_boxes, s)
    t = np.arange(s, dtype=float)
    # per-box linear detrend via least squares on the shared abscissa
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    slopes = segs @ tc / denom
    means = segs.mean(axis=1)
    resid = segs - means[:, None] - slopes[:, None] * tc[None, :]
    return float(np.sqrt(np.mean(resid * resid)))


def dfa_rr(rr, short=(4, 16), long=(16, 64)) -> dict[str, float]:
    """DFA slopes of the integrated mean-centred series.

    alpha1 fits log F(s) over integer box sizes ``short``, alpha2 over
    ``long`` (both inclusive).
    """
    rr = np.asarray(rr, dtype=float)
    if rr.size < 100:
        raise InsufficientDataError("DFA needs >= 100 samples")
    profile = np.cumsum(rr - np.mean(rr))

    def slope(lo: int, hi: int) -> float:
        sizes = [s for s in range(lo, hi + 1) if profile.size // s >= 1]
        fl = np.array([_dfa_fluctuation(profile, s) for s in sizes])
        ok = fl > 0
        if ok.sum() < 2:
            warnings.warn("degenerate DFA fluctuations; slope set to 0", FeatureWarning, stacklevel=3)
            return 0.0
        return float(np.polyfit(np.log(np.array(sizes)[ok]), np.log(fl[ok]), 1)[0])

    return {"DFA_alpha1": slope(*short), "DFA_alpha2": slope(*long)}


# ---------------------------------------------------------------------------
# symbolic dynamics


def symbolic_rr(rr, a: float = 0.05) -> dict[str, float]:
    """Word statistics over 3-symbol words.

    v0/v2: percentage of words with zero / two level changes after uniform
    6-level quantization of the range.  c1v/c3v: fraction of words built
    solely from symbols {0,2} / {1,3} after the 4-level mu +/- a*sigma split.
    """
    rr = np.asarray(rr, dtype=float)
    if rr.size < 30:
        raise InsufficientDataError("symbolic features need >= 30 samples")
    rng = np.ptp(rr)
    if rng == 0:
        warnings.warn(
            "constant series: symbolic words degenerate (v0=100, c-statistics 0)",
            FeatureWarning,
            stacklevel=2,
        )
        return {"v0": 100.0, "v2": 0.0, "c1v": 0.0, "c3v": 0.0}

    levels = np.clip(np.floor((rr - rr.min()) / rng * 6.0).astype(int), 0, 5)
    w0, w1, w2 = levels[:-2], levels[1:-1], levels[2:]
    changes = (w0 != w1).astype(int) + (w1 != w2).astype(int)
    n_words = changes.size
    v0 = 100.0 * float(np.mean(changes == 0))
    v2 = 100.0 * float(np.mean(changes == 2))

    mu, sigma = np.mean(rr), np.std(rr, ddof=1)
    bounds = [mu - a * sigma, mu, mu + a * sigma]
    quad = np.digitize(rr, bounds)  # 0..3
    q0, q1, q2 = quad[:-2], quad[1:-1], quad[2:]
    in02 = np.isin(quad, (0, 2))
    in13 = ~in02
    c1v = float(np.mean(in02[:-2] & in02[1:-1] & in02[2:]))
    c3v = float(np.mean(in13[:-2] & in13[1:-1] & in13[2:]))
    assert n_words == q0.size
    return {"v0": v0, "v2": v2, "c1v": c1v, "c3v": c3v}


# ---------------------------------------------------------------------------
# attention entropy


def _shannon_nat(values: np.ndarray) -> float:
    """Shannon entropy (nats) of the empirical distribution of integers."""
    _, counts = np.unique(values, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def attention_entropy_rr(rr) -> dict[str, float]:
    """Entropies of intervals between strict local extrema.

    Four interval families: max->max and min->min (gaps within each key-point
    type) and max->min / min->max (gap from each key point to the next one of
    the other type).  The fifth feature is the mean of the four.  Families
    with fewer than two intervals contribute 0 with a warning.
    """
    x = np.asarray(rr, dtype=float)
    if x.size < 20:
        raise InsufficientDataError("attention entropy needs >= 20 samples")
    interior = x[1:-1]
    maxima = np.where((interior > x[:-2]) & (interior > x[2:]))[0] + 1
    minima = np.where((interior < x[:-2]) & (interior < x[2:]))[0] + 1

    def cross_intervals(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        if src.size == 0 or dst.size == 0:
            return np.array([], dtype=int)
        pos = np.searchsorted(dst, src, side="right")
        ok = pos < dst.size
        return dst[pos[ok]] - src[ok]

    families = {
        "AttnEn_maxmax": np.diff(maxima),
        "AttnEn_minmin": np.diff(minima),
        "AttnEn_maxmin": cross_intervals(maxima, minima),
        "AttnEn_minmax": cross_intervals(minima, maxima),
    }
    out: dict[str, float] = {}
    for name, iv in families.items():
        if iv.size < 2:
            warnings.warn(f"too few key points for {name}; set to 0", FeatureWarning, stacklevel=2)
            out[name] = 0.0
        else:
            out[name] = _shannon_nat(iv)
    out["AttnEn_avg"] = float(np.mean([out[k] for k in families]))
    return out


# ---------------------------------------------------------------------------
# template entropies


def _embed(x: np.ndarray, m: int, tau: int = 1) -> np.ndarray:
    n_t = x.size - (m - 1) * tau
    if n_t <= 0:
        raise InsufficientDataError("series too short for embedding")
    idx = np.arange(n_t)[:, None] + tau * np.arange(m)[None, :]
    return x[idx]


def sample_entropy(x, m: int = 2, r_frac: float = 0.2) -> float:
    """SampEn(m, r = r_frac * sd) with the Chebyshev norm.

    When no template pairs match at length m + 1 (or m), the documented upper
    bound ln(number of pairs) is returned with a warning.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 100:
        raise InsufficientDataError("SampEn needs >= 100 samples")
    r = r_frac * np.std(x, ddof=1)
    n_t = x.size - m  # same template count for both lengths
    tm = _embed(x, m)[:n_t]
    tm1 = _embed(x, m + 1)

    def pair_count(templates: np.ndarray) -> int:
        d = np.max(np.abs(templates[:, None, :] - templates[None, :, :]), axis=2)
        iu = np.triu_indices(templates.shape[0], k=1)
        return int(np.sum(d[iu] <= r))

    b = pair_count(tm)
    a = pair_count(tm1)
    n_pairs = n_t * (n_t - 1) // 2
    if a == 0 or b == 0:
        warnings.warn(
            "no matching templates; SampEn set to its upper bound ln(pairs)",
            FeatureWarning,
            stacklevel=2,
        )
        return float(np.log(n_pairs))
    return float(-np.log(a / b))


def fuzzy_entropy(x, m: int = 2, r_frac: float = 0.2, gradient: float = 2.0) -> float:
    """FuzzyEn(m, r, n): exponential membership of mean-centred templates."""
    x = np.asarray(x, dtype=float)
    if x.size < 100:
        raise InsufficientDataError("FuzzyEn needs >= 100 samples")
    sd = np.std(x, ddof=1)
    if sd == 0:
        warnings.warn("constant series; FuzzyEn set to 0", FeatureWarning, stacklevel=2)
        return 0.0
    r = r_frac * sd

    def phi(mm: int) -> float:
        t = _embed(x, mm)
        t = t - t.mean(axis=1, keepdims=True)
        d = np.max(np.abs(t[:, None, :] - t[None, :, :]), axis=2)
        iu = np.triu_indices(t.shape[0], k=1)
        return float(np.mean(np.exp(-(d[iu] ** gradient) / r)))

    return float(np.log(phi(m) / phi(m + 1)))


def _pairwise_chebyshev_hist(templates: np.ndarray, bins: int, chunk: int = 512):
    """Histogram of all pairwise (i < j) Chebyshev distances, chunked."""
    n = templates.shape[0]
    dmin, dmax = np.inf, -np.inf
    for lo in range(0, n - 1, chunk):
        hi = min(lo + chunk, n - 1)
        d = np.max(np.abs(templates[lo:hi, None, :] - templates[None, lo + 1 :, :]), axis=2)
        mask = np.arange(lo, hi)[:, None] < np.arange(lo + 1, n)[None, :]
        vals = d[mask]
        if vals.size:
            dmin = min(dmin, float(vals.min()))
            dmax = max(dmax, float(vals.max()))
    if not np.isfinite(dmin):
        return None
    if dmax <= dmin:
        return np.array([1.0])  # single spike: zero entropy
    counts = np.zeros(bins)
    for lo in range(0, n - 1, chunk):
        hi = min(lo + chunk, n - 1)
        d = np.max(np.abs(templates[lo:hi, None, :] - templates[None, lo + 1 :, :]), axis=2)
        mask = np.arange(lo, hi)[:, None] < np.arange(lo + 1, n)[None, :]
        c, _ = np.histogram(d[mask], bins=bins, range=(dmin, dmax))
        counts += c
    return counts / counts.sum()


def distribution_entropy(x, m: int = 2, tau: int = 1, bins: int = 512) -> float:
    """DistEn: normalized Shannon entropy of the template-distance histogram."""
    x = np.asarray(x, dtype=float)
    if x.size < 100:
        raise InsufficientDataError("DistEn needs >= 100 samples")
    templates = _embed(x, m, tau)
    p = _pairwise_chebyshev_hist(templates, bins)
    if p is None or p.size == 1:
        return 0.0
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)) / np.log2(bins))


def entropy_rr(rr) -> dict[str, float]:
    return {
        "SampEn": sample_entropy(rr),
        "FuzzyEn": fuzzy_entropy(rr),
        "DistEn": distribution_entropy(rr),
    }


# ---------------------------------------------------------------------------
# phasic EDA phase-space entropy


def _auto_mutual_information(x: np.ndarray, max_tau: int, bins: int = 16) -> np.ndarray:
    """I(x_t; x_{t+tau}) for tau = 1..max_tau via 2-D histograms."""
    ami = np.empty(max_tau)
    for tau in range(1, max_tau + 1):
        a, b = x[:-tau], x[tau:]
        joint, _, _ = np.histogram2d(a, b, bins=bins)
        pxy = joint / joint.sum()
        px = pxy.sum(axis=1, keepdims=True)
        py = pxy.sum(axis=0, keepdims=True)
        nz = pxy > 0
        ami[tau - 1] = float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))
    return ami


def _first_ami_minimum(x: np.ndarray, max_tau: int) -> int:
    ami = _auto_mutual_information(x, max_tau)
    for tau in range(2, max_tau + 1):
        if ami[tau - 1] > ami[tau - 2]:
            return tau - 1
    return max_tau


def comeda(scr, fs: float = 50.0, m: int = 3, bins: int = 256, max_lag_s: float = 2.0) -> float:
    """Distribution entropy of the phasic-driver phase space.

    The embedding delay is the first local minimum of the auto mutual
    information, capped at ``max_lag_s`` seconds.
    """
    x = np.asarray(scr, dtype=float)
    if x.size < 60 * fs:
        raise InsufficientDataError("ComEDA needs >= 60 s of phasic signal")
    if np.ptp(x) == 0:
        warnings.warn("constant phasic signal; ComEDA set to 0", FeatureWarning, stacklevel=2)
        return 0.0
    cap = max(1, int(round(max_lag_s * fs)))
    tau = _first_ami_minimum(x, cap)
    templates = _embed(x, m, tau)
    p = _pairwise_chebyshev_hist(templates, bins)
    if p is None or p.size == 1:
        return 0.0
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)) / np.log2(bins))


def mcomeda(scr, fs: float = 50.0, scales=range(1, 6), **kwargs) -> float:
    """Median of ComEDA over coarse-grained scales (non-overlapping means)."""
    x = np.asarray(scr, dtype=float)
    vals = []
    for s in scales:
        n_blocks = x.size // s
        coarse = x[: n_blocks * s].reshape(n_blocks, s).mean(axis=1)
        vals.append(comeda(coarse, fs=fs / s, **kwargs))
    return float(np.median(vals))


def comeda_features(scr, fs: float = 50.0) -> dict[str, float]:
    return {"ComEDA": comeda(scr, fs=fs), "MComEDA": mcomeda(scr, fs=fs)}
