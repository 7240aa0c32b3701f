"""Canonical feature registry.

One entry per feature, in the canonical column order used by the design
matrix and ``features.csv``.  128 RR features, 32 EDA features, 2 combined
ratios: 162 in total.  Names are stable identifiers; definitions live in
FEATURES.md and in the extractor docstrings.
"""

from __future__ import annotations

from dataclasses import dataclass

POINCARE_LAGS = range(1, 11)


@dataclass(frozen=True)
class FeatureDef:
    name: str
    family: str  # extractor family, e.g. "rr_temporal", "scl"
    source: str  # "rr", "rr4" (4 Hz resampled), "scl", "scr", "smna", "eda", "combined"


def _build() -> tuple[FeatureDef, ...]:
    defs: list[FeatureDef] = []

    def add(names, family, source):
        defs.extend(FeatureDef(n, family, source) for n in names)

    add(
        [
            "meanRR", "stdRR", "SDSD", "RMSSD", "NN50", "pNN50",
            "meanDER1", "stdDER1", "meanDER2", "stdDER2", "SkewRR", "KurtRR",
        ],
        "rr_temporal",
        "rr",
    )
    add(["TriRR", "TINN"], "rr_geometric", "rr")
    add(
        [
            "LF_power", "HF_power", "LF_perc", "HF_perc",
            "LF_nu", "HF_nu", "LF_HF", "LF_peak", "HF_peak",
        ],
        "rr_spectral",
        "rr4",
    )
    for stem in ("SD1", "SD2", "SD12", "rhoRR", "P_surf", "SDRR"):
        add([f"{stem}_{m}" for m in POINCARE_LAGS], "rr_poincare", "rr")
    add(
        ["AUC_SD1", "AUC_SD2", "AUC_SD12", "AUC_rho_RR", "AUC_P_surf", "AUC_SDRR"],
        "rr_poincare",
        "rr",
    )
    add(["FracDim", "HurstExp"], "rr_fractal", "rr")
    add(["DFA_alpha1", "DFA_alpha2"], "rr_dfa", "rr")
    add(["v0", "v2", "c1v", "c3v"], "rr_symbolic", "rr")
    add(
        ["AttnEn_maxmax", "AttnEn_minmin", "AttnEn_maxmin", "AttnEn_minmax", "AttnEn_avg"],
        "rr_attention",
        "rr",
    )
    add(
        [
            "rec_rate", "det", "avg_diag", "ratio", "ent",
            "lam", "trap_time", "max_len", "mean_rec_time",
        ],
        "rr_rqa",
        "rr",
    )
    add(["SampEn", "FuzzyEn", "DistEn"], "rr_entropy", "rr")
    add(
        [
            "Phase_Entr", "Mean_Magn", "Mean_P", "std_P", "N_Bis_Ent",
            "N_Bis_Sq_Ent", "Sum_log_Amp", "LL", "LH", "HH",
        ],
        "rr_bispectrum",
        "rr4",
    )
    add(["ShortPathLen", "GlobClusterCoef", "LocalClusterCoef", "Degree"], "rr_visibility", "rr")

    add(
        [
            "SCL_mean", "SCL_median", "SCL_std", "SCL_mad",
            "SCL_meanWin", "SCL_medWin", "SCL_stdWin", "SCL_madWin",
        ],
        "scl",
        "scl",
    )
    add(
        [
            "SCR_mean", "SCR_median", "SCR_std", "SCR_mad",
            "SCR_npeaks", "SCR_maxpeak", "SCR_ampsum",
            "SCR_meanWin", "SCR_medWin", "SCR_stdWin", "SCR_madWin", "SCR_ampsumWin",
        ],
        "scr",
        "scr",
    )
    add(["SMNA_mean", "SMNA_maxpeak", "SMNA_npeaks", "SMNA_ampsum"], "smna", "smna")
    add(
        [
            "EDASymp", "EDASymp_db", "EDASymp_nu",
            "EDASymp_Welch", "EDASymp_db_Welch", "EDASymp_nu_Welch",
        ],
        "edasymp",
        "eda",
    )
    add(["ComEDA", "MComEDA"], "comeda", "scr")
    add(["EDASymp_HF", "EDASymp_Welch_HF"], "combined", "combined")
    return tuple(defs)


REGISTRY: tuple[FeatureDef, ...] = _build()
FEATURE_NAMES: tuple[str, ...] = tuple(d.name for d in REGISTRY)
N_FEATURES = len(REGISTRY)

assert N_FEATURES == 162, f"registry must hold 162 features, found {N_FEATURES}"


def feature_names() -> list[str]:
    return list(FEATURE_NAMES)


def families() -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for d in REGISTRY:
        out.setdefault(d.family, []).append(d.name)
    return out
