"""Pipeline configuration: a JSON file validated into a typed object.

Every output artifact embeds ``config_hash`` (sha256 of the canonical JSON)
so results can always be traced back to the exact parameters that produced
them.  Defaults follow the analysis protocol this package implements:
1000 Hz physiology, 20 Hz annotations, 116-second windows, 4 Hz RR
resampling, 50 Hz EDA decimation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

DEFAULT_SIGNAL_COLUMNS = {"time": "time", "ecg": "ecg", "eda": "eda"}
DEFAULT_ANNOTATION_COLUMNS = {"time": "time", "arousal": "arousal", "video": "video"}
DEFAULT_CVXEDA = {
    "tau0": 2.0,
    "tau1": 0.7,
    "delta_knot": 10.0,
    "alpha_sparse": 8e-4,
    "gamma_tonic": 1e-2,
}
_KNOWN_KEYS = {
    "sessions",
    "signal_columns",
    "annotation_columns",
    "time_scale",
    "fs_phys",
    "fs_annot",
    "window_seconds",
    "rr_resample_hz",
    "ectopic_filter",
    "eda_fs",
    "cvxeda",
    "selector",
    "robust",
    "video_classes",
    "out_dir",
}
_KNOWN_SELECTOR_KEYS = {"alpha", "alpha_grid", "k", "seed", "variant"}


@dataclass(frozen=True)
class SelectorConfig:
    alpha: float = 0.10
    alpha_grid: tuple[float, ...] = (0.05, 0.10, 0.15, 0.20, 0.25)
    k: int = 100
    seed: int = 42
    variant: str = "da-nn"


@dataclass(frozen=True)
class PipelineConfig:
    sessions: tuple[dict, ...] = ()
    signal_columns: dict = field(default_factory=lambda: dict(DEFAULT_SIGNAL_COLUMNS))
    annotation_columns: dict = field(
        default_factory=lambda: dict(DEFAULT_ANNOTATION_COLUMNS)
    )
    time_scale: float = 1.0  # seconds per unit of the files' time columns
    fs_phys: float = 1000.0
    fs_annot: float = 20.0
    window_seconds: float = 116.0
    rr_resample_hz: float = 4.0
    ectopic_filter: bool = False
    eda_fs: float = 50.0
    cvxeda: dict = field(default_factory=lambda: dict(DEFAULT_CVXEDA))
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    robust: bool = True
    video_classes: dict = field(default_factory=dict)
    out_dir: str = "out"

    def to_json_dict(self) -> dict:
        return {
            "sessions": [dict(s) for s in self.sessions],
            "signal_columns": dict(self.signal_columns),
            "annotation_columns": dict(self.annotation_columns),
            "time_scale": self.time_scale,
            "fs_phys": self.fs_phys,
            "fs_annot": self.fs_annot,
            "window_seconds": self.window_seconds,
            "rr_resample_hz": self.rr_resample_hz,
            "ectopic_filter": self.ectopic_filter,
            "eda_fs": self.eda_fs,
            "cvxeda": dict(self.cvxeda),
            "selector": {
                "alpha": self.selector.alpha,
                "alpha_grid": list(self.selector.alpha_grid),
                "k": self.selector.k,
                "seed": self.selector.seed,
                "variant": self.selector.variant,
            },
            "robust": self.robust,
            "video_classes": dict(self.video_classes),
            "out_dir": self.out_dir,
        }


def config_hash(cfg: PipelineConfig) -> str:
    canon = json.dumps(cfg.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _positive(doc: dict, key: str, default: float) -> float:
    value = doc.get(key, default)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a number, got {value!r}") from None
    if value <= 0:
        raise ConfigError(f"'{key}' must be positive, got {value}")
    return value


def _selector_from(doc: dict) -> SelectorConfig:
    unknown = set(doc) - _KNOWN_SELECTOR_KEYS
    if unknown:
        raise ConfigError(f"unknown selector keys: {sorted(unknown)}")
    base = SelectorConfig()
    alpha = float(doc.get("alpha", base.alpha))
    grid = tuple(float(a) for a in doc.get("alpha_grid", base.alpha_grid))
    for a in (alpha, *grid):
        if not 0.0 < a < 1.0:
            raise ConfigError(f"target FDR values must lie in (0, 1), got {a}")
    k = int(doc.get("k", base.k))
    if k < 2:
        raise ConfigError(f"selector k must be at least 2, got {k}")
    variant = str(doc.get("variant", base.variant))
    if variant not in ("plain", "da-nn"):
        raise ConfigError(f"selector variant must be 'plain' or 'da-nn', got {variant!r}")
    return SelectorConfig(
        alpha=alpha, alpha_grid=grid, k=k, seed=int(doc.get("seed", base.seed)), variant=variant
    )


def parse_config(doc: dict, base_dir: Path | None = None) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    sessions = []
    for i, entry in enumerate(doc.get("sessions", [])):
        if not isinstance(entry, dict) or not {"participant", "signals", "annotations"} <= set(entry):
            raise ConfigError(
                f"sessions[{i}] must have 'participant', 'signals' and 'annotations' keys"
            )
        entry = dict(entry)
        if base_dir is not None:
            for key in ("signals", "annotations"):
                entry[key] = str((base_dir / entry[key]).resolve())
        sessions.append(entry)

    sig_cols = {**DEFAULT_SIGNAL_COLUMNS, **doc.get("signal_columns", {})}
    ann_cols = {**DEFAULT_ANNOTATION_COLUMNS, **doc.get("annotation_columns", {})}
    for required in ("time", "arousal", "video"):
        if required not in ann_cols:
            raise ConfigError(f"annotation_columns must map '{required}'")

    cfg = PipelineConfig(
        sessions=tuple(sessions),
        signal_columns=sig_cols,
        annotation_columns=ann_cols,
        time_scale=_positive(doc, "time_scale", 1.0),
        fs_phys=_positive(doc, "fs_phys", 1000.0),
        fs_annot=_positive(doc, "fs_annot", 20.0),
        window_seconds=_positive(doc, "window_seconds", 116.0),
        rr_resample_hz=_positive(doc, "rr_resample_hz", 4.0),
        ectopic_filter=bool(doc.get("ectopic_filter", False)),
        eda_fs=_positive(doc, "eda_fs", 50.0),
        cvxeda={**DEFAULT_CVXEDA, **doc.get("cvxeda", {})},
        selector=_selector_from(doc.get("selector", {})),
        robust=bool(doc.get("robust", True)),
        video_classes={str(k): str(v) for k, v in doc.get("video_classes", {}).items()},
        out_dir=str(doc.get("out_dir", "out")),
    )
    extra_cvx = set(cfg.cvxeda) - set(DEFAULT_CVXEDA)
    if extra_cvx:
        raise ConfigError(f"unknown cvxeda keys: {sorted(extra_cvx)}")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(doc, base_dir=path.parent)


def check_data_paths(cfg: PipelineConfig) -> None:
    """Validate that every referenced data file exists (extraction-time check)."""
    if not cfg.sessions:
        raise ConfigError("config declares no sessions to extract")
    for entry in cfg.sessions:
        for key in ("signals", "annotations"):
            p = Path(entry[key])
            if not p.exists():
                raise ConfigError(f"{key} file for participant {entry['participant']!r} not found: {p}")
