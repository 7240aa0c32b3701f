"""Recording ingestion, analysis-window cutting and design-matrix assembly.

Files are delimited text with a header row; which columns hold time, ECG,
EDA, arousal and video labels is configuration, never hard-coded.
Annotations are linearly interpolated onto their native sampling grid when
timestamps are irregular.  The analysis window is the FINAL ``W`` seconds of
each stimulus segment, with the physiological and annotation windows sharing
the same end instant.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DataWarning, WindowError
from .features.registry import FEATURE_NAMES

AROUSAL_RANGE = (0.5, 9.5)


@dataclass(frozen=True)
class SessionRecording:
    participant_id: str
    channels: dict[str, np.ndarray]     # uniformly sampled at fs_phys
    fs_phys: float
    phys_t0: float                      # seconds, shared clock with annotations
    arousal: np.ndarray                 # uniformly sampled at fs_annot
    video_labels: np.ndarray            # one label per arousal sample
    fs_annot: float
    annot_t0: float

    def __post_init__(self):
        if self.fs_phys <= 0 or self.fs_annot <= 0:
            raise ConfigError("sampling rates must be positive")
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise DataError(f"channel lengths differ: {sorted(lengths)}")
        if len(self.arousal) != len(self.video_labels):
            raise DataError("arousal and video label lengths differ")


@dataclass(frozen=True)
class SessionWindow:
    participant_id: str
    video_id: str
    ecg_window: np.ndarray | None
    eda_window: np.ndarray | None
    fs_phys: float
    arousal_window: np.ndarray
    fs_annot: float


@dataclass
class FeatureMatrix:
    x: np.ndarray
    y: np.ndarray
    row_keys: list[tuple[str, str]]
    col_names: list[str]
    standardized: bool
    warnings: list[str] = field(default_factory=list)


def _read_table(path: Path) -> dict[str, list[str]]:
    text = path.read_text()
    first = text.splitlines()[0] if text.strip() else ""
    delim = "\t" if "\t" in first else ";" if ";" in first and "," not in first else ","
    rows = list(csv.reader(text.splitlines(), delimiter=delim))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise DataError(f"{path}: expected a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    columns: dict[str, list[str]] = {h: [] for h in header}
    for r in rows[1:]:
        for h, cell in zip(header, r):
            columns[h].append(cell.strip())
    return columns


def _column(columns: dict, name: str, role: str, path: Path) -> list[str]:
    if name not in columns:
        raise ConfigError(
            f"column {name!r} (mapped as {role}) not found in {path}; "
            f"available: {sorted(columns)}"
        )
    return columns[name]


def _as_float(values: list[str], role: str, path: Path) -> np.ndarray:
    try:
        return np.array([float(v) for v in values])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value in {role} column ({exc})") from None


def _check_monotone(t: np.ndarray, what: str, path: Path) -> None:
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise DataError(
            f"{path}: {what} time not strictly increasing at index {int(bad[0]) + 1}"
        )


def load_recording(
    signal_path,
    annotation_path,
    *,
    participant_id: str,
    signal_columns: dict,
    annotation_columns: dict,
    fs_phys: float,
    fs_annot: float,
    time_scale: float = 1.0,
) -> SessionRecording:
    signal_path, annotation_path = Path(signal_path), Path(annotation_path)
    sig = _read_table(signal_path)
    ann = _read_table(annotation_path)

    t_sig = _as_float(
        _column(sig, signal_columns["time"], "time", signal_path), "time", signal_path
    ) * time_scale
    _check_monotone(t_sig, "signal", signal_path)

    channels = {}
    for role in ("ecg", "eda"):
        name = signal_columns.get(role)
        if name is not None and name in sig:
            channels[role] = _as_float(sig[name], role, signal_path)
        elif name is not None and role == "ecg":
            raise ConfigError(
                f"column {name!r} (mapped as ecg) not found in {signal_path}; "
                f"available: {sorted(sig)}"
            )

    t_ann = _as_float(
        _column(ann, annotation_columns["time"], "time", annotation_path),
        "time",
        annotation_path,
    ) * time_scale
    _check_monotone(t_ann, "annotation", annotation_path)
    arousal = _as_float(
        _column(ann, annotation_columns["arousal"], "arousal", annotation_path),
        "arousal",
        annotation_path,
    )
    labels = np.array(
        _column(ann, annotation_columns["video"], "video", annotation_path), dtype=object
    )

    # regularize annotations onto their native grid (exact at on-grid samples)
    n_grid = int(round((t_ann[-1] - t_ann[0]) * fs_annot)) + 1
    t_grid = t_ann[0] + np.arange(n_grid) / fs_annot
    arousal_grid = np.interp(t_grid, t_ann, arousal)
    nearest = np.clip(np.searchsorted(t_ann, t_grid + 0.5 / fs_annot), 1, len(t_ann)) - 1
    labels_grid = labels[nearest]

    return SessionRecording(
        participant_id=str(participant_id),
        channels=channels,
        fs_phys=fs_phys,
        phys_t0=float(t_sig[0]),
        arousal=arousal_grid,
        video_labels=labels_grid,
        fs_annot=fs_annot,
        annot_t0=float(t_ann[0]),
    )


def video_ids(rec: SessionRecording) -> list[str]:
    """Stimulus labels in order of first appearance."""
    seen: dict[str, None] = {}
    for lab in rec.video_labels:
        seen.setdefault(str(lab), None)
    return list(seen)


def extract_window(rec: SessionRecording, video_id, w_seconds: float) -> SessionWindow:
    """Cut the final ``w_seconds`` of the stimulus segment for one video."""
    video_id = str(video_id)
    mask = np.array([str(lab) == video_id for lab in rec.video_labels])
    if not mask.any():
        raise DataError(f"video {video_id!r} not present in recording {rec.participant_id}")
    idx = np.flatnonzero(mask)
    first, last = int(idx[0]), int(idx[-1])

    n_annot = int(round(w_seconds * rec.fs_annot))
    available = (last - first + 1) / rec.fs_annot
    if last - first + 1 < n_annot:
        raise WindowError(
            f"segment for video {video_id!r} is {available:.2f} s, "
            f"shorter than the {w_seconds:g} s window"
        )
    arousal_window = rec.arousal[last - n_annot + 1 : last + 1]
    lo, hi = AROUSAL_RANGE
    if arousal_window.min() < lo - 1e-9 or arousal_window.max() > hi + 1e-9:
        raise DataError(
            f"arousal values outside [{lo}, {hi}] in video {video_id!r} "
            f"(range {arousal_window.min():.3f}..{arousal_window.max():.3f})"
        )

    t_end = rec.annot_t0 + last / rec.fs_annot  # shared end instant
    n_phys = int(round(w_seconds * rec.fs_phys))
    i_end = int(round((t_end - rec.phys_t0) * rec.fs_phys))

    def cut(channel: np.ndarray | None) -> np.ndarray | None:
        if channel is None:
            return None
        start = i_end - n_phys + 1
        if start < 0 or i_end >= len(channel):
            raise WindowError(
                f"physiological record covers {len(channel) / rec.fs_phys:.2f} s; "
                f"cannot cut {w_seconds:g} s ending at t={t_end:.2f} s"
            )
        return channel[start : i_end + 1].copy()

    return SessionWindow(
        participant_id=rec.participant_id,
        video_id=video_id,
        ecg_window=cut(rec.channels.get("ecg")),
        eda_window=cut(rec.channels.get("eda")),
        fs_phys=rec.fs_phys,
        arousal_window=arousal_window.copy(),
        fs_annot=rec.fs_annot,
    )


def compute_response(window: SessionWindow) -> float:
    if len(window.arousal_window) == 0:
        raise DataError("empty arousal window")
    return float(np.mean(window.arousal_window))


def _ordered_names(names: set[str]) -> list[str]:
    known = [n for n in FEATURE_NAMES if n in names]
    extra = sorted(names - set(known))
    return known + extra


def assemble_design(rows) -> FeatureMatrix:
    """Standardized design matrix and response from per-window feature maps.

    ``rows`` is an iterable of ``(row_key, feature_map, response)`` where
    ``row_key`` is ``(participant_id, video_id)``.  Rows are sorted by key so
    the result is invariant to input enumeration order.  Non-finite entries
    are imputed by column median; constant columns become all zeros.  Both
    happen with a recorded warning.
    """
    rows = sorted(rows, key=lambda r: (str(r[0][0]), str(r[0][1])))
    if not rows:
        raise DataError("no rows to assemble")
    keys = [(str(k[0]), str(k[1])) for k, _, _ in rows]
    if len(set(keys)) != len(keys):
        dup = next(k for i, k in enumerate(keys) if k in keys[:i])
        raise DataError(f"duplicate row key {dup}")

    name_set = set(rows[0][1])
    for key, fmap, _ in rows[1:]:
        if set(fmap) != name_set:
            raise DataError(f"row {key} has a different feature name set")
    names = _ordered_names(name_set)

    x = np.array([[float(fmap[n]) for n in names] for _, fmap, _ in rows])
    y = np.array([float(resp) for _, _, resp in rows])
    notes: list[str] = []

    for j, name in enumerate(names):
        col = x[:, j]
        bad = ~np.isfinite(col)
        if bad.any():
            finite = col[~bad]
            fill = float(np.median(finite)) if finite.size else 0.0
            col[bad] = fill
            note = f"imputed {int(bad.sum())} non-finite value(s) in {name!r} with median {fill:.6g}"
            notes.append(note)
            warnings.warn(note, DataWarning, stacklevel=2)

    if not np.isfinite(y).all():
        raise DataError("response contains non-finite values")

    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1) if len(rows) > 1 else np.zeros(x.shape[1])
    for j, name in enumerate(names):
        if sd[j] > 0:
            x[:, j] = (x[:, j] - mu[j]) / sd[j]
        else:
            x[:, j] = 0.0
            note = f"feature {name!r} is constant; column set to zeros"
            notes.append(note)
            warnings.warn(note, DataWarning, stacklevel=2)

    sy = y.std(ddof=1) if len(rows) > 1 else 0.0
    if sy <= 0:
        raise DataError("response is constant; nothing to model")
    y = (y - y.mean()) / sy

    return FeatureMatrix(
        x=x, y=y, row_keys=keys, col_names=names, standardized=True, warnings=notes
    )


def write_features_csv(rows, path, *, config_echo: dict | None = None, config_hash: str = "") -> None:
    """Write raw (unstandardized) features; floats at 17 significant digits."""
    rows = sorted(rows, key=lambda r: (str(r[0][0]), str(r[0][1])))
    if not rows:
        raise DataError("no feature rows to write")
    names = _ordered_names(set(rows[0][1]))
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant", "video", "response", *names])
        for (part, vid), fmap, resp in rows:
            writer.writerow(
                [str(part), str(vid), format(float(resp), ".17g")]
                + [format(float(fmap[n]), ".17g") for n in names]
            )
    meta = {
        "config_hash": config_hash,
        "n_rows": len(rows),
        "n_features": len(names),
        "columns": ["participant", "video", "response", *names],
    }
    if config_echo is not None:
        meta["config"] = config_echo
    meta_path = path.with_name(path.stem + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_features_csv(path):
    """Parse features.csv back into assemble_design rows."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"features file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header[:3] != ["participant", "video", "response"]:
            raise DataError(f"{path}: line 1: expected header starting participant,video,response")
        names = header[3:]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                resp = float(rec[2])
                fmap = {n: float(v) for n, v in zip(names, rec[3:])}
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            rows.append(((rec[0], rec[1]), fmap, resp))
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows
