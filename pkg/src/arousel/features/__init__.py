"""Feature battery orchestration.

``extract_all_features`` wires the extractor families to the prepared window
signals and returns the 162 canonical features in registry order.  A family
that cannot be computed (too few beats, degenerate component, ...) yields
NaN for its features plus a warning; downstream design assembly imputes
those cells by column median.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import DataError, FeatureWarning
from ..eda import EdaComponents
from ..rr import RRSeries, UniformSeries
from .bispectrum import bispectral_rr
from .complexity import (
    attention_entropy_rr,
    comeda_features,
    dfa_rr,
    entropy_rr,
    fractal_rr,
    symbolic_rr,
)
from .linear import (
    combined_ratios,
    edasymp_features,
    geometric_rr,
    scl_features,
    scr_features,
    smna_features,
    spectral_rr,
    temporal_rr,
)
from .poincare import lagged_poincare
from .registry import FEATURE_NAMES, N_FEATURES, REGISTRY, feature_names
from .rqa import rqa_rr
from .visibility import visibility_rr

__all__ = [
    "extract_all_features",
    "feature_names",
    "FEATURE_NAMES",
    "N_FEATURES",
    "REGISTRY",
]


def extract_all_features(
    rr: RRSeries | None, rr4: UniformSeries | None, eda: EdaComponents | None
) -> dict[str, float]:
    """Full battery; a ``None`` input NaN-fills the families that need it."""
    values: dict[str, float] = {}

    def run(family: str, func, *args, **kwargs):
        names = [d.name for d in REGISTRY if d.family == family]
        try:
            out = func(*args, **kwargs)
        except DataError as exc:
            warnings.warn(
                f"feature family '{family}' unavailable ({exc}); values set to NaN",
                FeatureWarning,
                stacklevel=2,
            )
            out = {n: np.nan for n in names}
        missing = set(names) - set(out)
        if missing:
            raise RuntimeError(f"extractor '{family}' missed features: {sorted(missing)}")
        values.update({n: float(out[n]) for n in names})

    def skip(families: tuple[str, ...], reason: str):
        names = [d.name for d in REGISTRY if d.family in families]
        warnings.warn(
            f"families {families} unavailable ({reason}); values set to NaN",
            FeatureWarning,
            stacklevel=2,
        )
        values.update({n: np.nan for n in names})

    if rr is None or rr4 is None:
        skip(
            ("rr_temporal", "rr_geometric", "rr_spectral", "rr_poincare", "rr_fractal",
             "rr_dfa", "rr_symbolic", "rr_attention", "rr_rqa", "rr_entropy",
             "rr_bispectrum", "rr_visibility"),
            "RR series missing",
        )
    else:
        intervals = rr.intervals
        rr_uniform = rr4.values
        run("rr_temporal", temporal_rr, intervals)
        run("rr_geometric", geometric_rr, intervals)
        run("rr_spectral", spectral_rr, rr_uniform, rr4.fs)
        run("rr_poincare", lagged_poincare, intervals)
        run("rr_fractal", fractal_rr, intervals)
        run("rr_dfa", dfa_rr, intervals)
        run("rr_symbolic", symbolic_rr, intervals)
        run("rr_attention", attention_entropy_rr, intervals)
        run("rr_rqa", rqa_rr, intervals)
        run("rr_entropy", entropy_rr, intervals)
        run("rr_bispectrum", bispectral_rr, rr_uniform, rr4.fs)
        run("rr_visibility", visibility_rr, intervals)

    if eda is None:
        skip(("scl", "scr", "smna", "edasymp", "comeda"), "EDA decomposition missing")
    else:
        run("scl", scl_features, eda.scl, eda.fs)
        run("scr", scr_features, eda.scr, eda.fs)
        run("smna", smna_features, eda.smna, eda.fs)
        run("edasymp", edasymp_features, eda.scl, eda.scr, eda.fs)
        run("comeda", comeda_features, eda.scr, eda.fs)

    def _ratios():
        return combined_ratios(values["EDASymp"], values["EDASymp_Welch"], values["HF_power"])

    if np.isfinite(values["HF_power"]) and values["HF_power"] > 0:
        run("combined", _ratios)
    else:
        warnings.warn(
            "combined ratios unavailable (HF power not positive); values set to NaN",
            FeatureWarning,
            stacklevel=2,
        )
        values["EDASymp_HF"] = np.nan
        values["EDASymp_Welch_HF"] = np.nan

    return {name: values[name] for name in FEATURE_NAMES}
