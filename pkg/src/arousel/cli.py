"""Command-line pipeline: extract -> select -> fit -> report, plus synth-bench.

Each stage reads and writes files only, so stages can be re-run and composed
independently.  Outputs are deterministic for a fixed config and seed (no
timestamps), and every artifact embeds the config hash.

Exit codes: 0 success, 2 data error, 3 numeric error, 4 config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, check_data_paths, config_hash, load_config
from .dataset import (
    assemble_design,
    compute_response,
    extract_window,
    load_recording,
    read_features_csv,
    video_ids,
    write_features_csv,
)
from .eda import cvxeda_decompose, normalize_and_decimate
from .errors import ArouselError, ConfigError, DataError, DependencyError
from .mixedlm import fit_lmer, fit_rlmer, model_summary, save_model
from .rr import build_rr, detect_r_peaks, filter_ectopic, resample_rr
from .svg import bar_chart, effects_plot
from .synth import DEFAULT_ALPHAS, FAMILIES, acceptance_spec, run_fdr_experiment, write_fdr_csv
from .trex import calibrate_and_select, load_selection


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _resolve_out(args, cfg: PipelineConfig | None) -> Path:
    out = args.out or (cfg.out_dir if cfg else "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_cfg(args, required: bool = False) -> PipelineConfig | None:
    if args.config:
        return load_config(args.config)
    if required:
        raise ConfigError("this command requires --config")
    return None


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        return args.threads
    return os.cpu_count() or 1


# ---------------------------------------------------------------- extract


def _window_features(window, cfg: PipelineConfig):
    """Feature map for one window; a failed signal degrades to NaN families."""
    notes = []
    rr = rr4 = None
    if window.ecg_window is not None:
        try:
            beats = detect_r_peaks(window.ecg_window, cfg.fs_phys)
            rr = build_rr(beats)
            if cfg.ectopic_filter:
                rr = filter_ectopic(rr)
            rr4 = resample_rr(rr, cfg.rr_resample_hz)
        except ArouselError as exc:
            notes.append(f"ECG unusable: {exc}")
            rr = rr4 = None
    else:
        notes.append("no ECG channel")

    eda = None
    if window.eda_window is not None:
        try:
            eda50 = normalize_and_decimate(window.eda_window, cfg.fs_phys, cfg.eda_fs)
            eda = cvxeda_decompose(eda50, fs=cfg.eda_fs, **cfg.cvxeda)
        except ArouselError as exc:
            notes.append(f"EDA unusable: {exc}")
            eda = None
    else:
        notes.append("no EDA channel")

    if rr is None and eda is None:
        raise DataError("; ".join(notes) or "no usable signals")

    from .features import extract_all_features

    return extract_all_features(rr, rr4, eda), notes


def cmd_extract(args) -> int:
    cfg = _load_cfg(args, required=True)
    check_data_paths(cfg)
    out = _resolve_out(args, cfg)
    n_threads = _threads(args)

    tasks = []
    for entry in cfg.sessions:
        rec = load_recording(
            entry["signals"],
            entry["annotations"],
            participant_id=entry["participant"],
            signal_columns=cfg.signal_columns,
            annotation_columns=cfg.annotation_columns,
            fs_phys=cfg.fs_phys,
            fs_annot=cfg.fs_annot,
            time_scale=cfg.time_scale,
        )
        for vid in video_ids(rec):
            tasks.append((rec, vid))

    def one(task):
        rec, vid = task
        key = (rec.participant_id, vid)
        window = extract_window(rec, vid, cfg.window_seconds)
        response = compute_response(window)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fmap, notes = _window_features(window, cfg)
        return key, fmap, response, notes

    rows, skipped = [], []
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        futures = [(task, pool.submit(one, task)) for task in tasks]
        for (rec, vid), fut in futures:
            key = (rec.participant_id, vid)
            try:
                k, fmap, response, notes = fut.result()
            except DataError as exc:
                skipped.append((key, str(exc)))
                _log(f"skipping {key}: {exc}")
                continue
            for note in notes:
                _log(f"{key}: {note}")
            rows.append((k, fmap, response))

    if not rows:
        raise DataError("no windows could be extracted")
    write_features_csv(
        rows, out / "features.csv", config_echo=cfg.to_json_dict(), config_hash=config_hash(cfg)
    )
    _log(f"wrote {out / 'features.csv'} ({len(rows)} rows)")
    if skipped:
        _log(f"{len(skipped)} window(s) skipped")
        return 2
    return 0


# ----------------------------------------------------------------- select


def _selector_params(args, cfg: PipelineConfig | None):
    base = cfg.selector if cfg else PipelineConfig().selector
    alpha = args.alpha if args.alpha is not None else base.alpha
    grid = (
        tuple(float(a) for a in args.alpha_grid.split(","))
        if args.alpha_grid
        else base.alpha_grid
    )
    for a in (alpha, *grid):
        if not 0.0 < a < 1.0:
            raise ConfigError(f"target FDR values must lie in (0, 1), got {a}")
    k = args.k if args.k is not None else base.k
    seed = args.seed if args.seed is not None else base.seed
    variant = args.variant or base.variant
    if variant not in ("plain", "da-nn"):
        raise ConfigError(f"unknown selector variant {variant!r}")
    return alpha, grid, k, seed, variant


def cmd_select(args) -> int:
    cfg = _load_cfg(args)
    out = _resolve_out(args, cfg)
    alpha, grid, k, seed, variant = _selector_params(args, cfg)

    features_path = Path(args.features) if args.features else out / "features.csv"
    design = assemble_design(read_features_csv(features_path))
    result = calibrate_and_select(
        design.x,
        design.y,
        alpha=alpha,
        k=k,
        seed=seed,
        variant=variant,
        feature_names=design.col_names,
        alpha_grid=grid,
        threads=_threads(args),
    )
    chash = config_hash(cfg) if cfg else ""
    result.save(out / "selection.json", extra={"config_hash": chash})

    sweep = sorted(result.alpha_sweep, key=lambda e: e["alpha"])
    bar_chart(
        out / "alpha_sweep.svg",
        categories=[f"{e['alpha']:g}" for e in sweep],
        values=[e["percent_selected"] for e in sweep],
        title="Selected features vs target FDR",
        xlabel="target FDR",
        ylabel="% of features selected",
        config_hash=chash,
    )
    if result.selected:
        _log(f"alpha={alpha:g}: selected {len(result.selected)} feature(s): "
             + ", ".join(result.selected))
    else:
        _log(f"alpha={alpha:g}: no features selected")
    _log(f"wrote {out / 'selection.json'} and {out / 'alpha_sweep.svg'}")
    return 0


# -------------------------------------------------------------------- fit


def cmd_fit(args) -> int:
    cfg = _load_cfg(args)
    out = _resolve_out(args, cfg)
    features_path = Path(args.features) if args.features else out / "features.csv"
    selection_path = out / "selection.json"
    if not selection_path.exists():
        raise DependencyError(f"selection stage output missing: {selection_path}")

    selection = load_selection(selection_path)
    selected = list(selection["selected"])
    if not selected:
        print("nothing to fit: selection is empty at the target FDR")
        return 0

    design = assemble_design(read_features_csv(features_path))
    col_index = {n: j for j, n in enumerate(design.col_names)}
    missing = [n for n in selected if n not in col_index]
    if missing:
        raise DataError(f"selected features absent from features file: {missing}")
    idx = [col_index[n] for n in selected]
    x_sel = design.x[:, idx]
    groups = [participant for participant, _ in design.row_keys]

    classical = fit_lmer(design.y, x_sel, groups, names=selected)
    fits = {"classical": classical}
    if cfg is None or cfg.robust:
        fits["robust"] = fit_rlmer(design.y, x_sel, groups, names=selected)

    chash = config_hash(cfg) if cfg else ""
    doc = {name: fit.to_json_dict() for name, fit in fits.items()}
    doc["config_hash"] = chash
    doc["selected"] = selected
    (out / "model.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    class_map = cfg.video_classes if cfg else {}
    videos = [video for _, video in design.row_keys]
    classes = [class_map[v] for v in videos] if class_map and all(v in class_map for v in videos) else None
    panels = [
        {
            "name": name,
            "x": design.x[:, col_index[name]],
            "y": design.y,
            "slope": float(classical.beta[i + 1]),
            "intercept": float(classical.beta[0]),
            "classes": classes,
        }
        for i, name in enumerate(selected)
    ]
    effects_plot(
        out / "effects.svg",
        panels,
        title="Estimated effects on mean arousal",
        config_hash=chash,
    )
    for name, fit in fits.items():
        _log(f"[{name}]\n{model_summary(fit)}")
    _log(f"wrote {out / 'model.json'} and {out / 'effects.svg'}")
    return 0


# ----------------------------------------------------------------- report


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise DependencyError(f"missing output of the {stage} stage: {path}")
    return path


def cmd_report(args) -> int:
    cfg = _load_cfg(args)
    out = _resolve_out(args, cfg)

    meta_path = _require(out / "features.meta.json", "extract")
    selection_path = _require(out / "selection.json", "select")
    meta = json.loads(meta_path.read_text())
    selection = load_selection(selection_path)

    lines = ["arousal feature-selection pipeline report", ""]
    lines.append(f"config hash: {selection.get('config_hash') or meta.get('config_hash') or 'none'}")
    lines.append(
        f"design: {meta['n_rows']} rows x {meta['n_features']} features"
    )
    lines.append(
        "selector: alpha={alpha:g}, K={k}, seed={seed}, variant={variant}".format(**{
            "alpha": selection["alpha"], "k": selection["k"],
            "seed": selection["seed"], "variant": selection["variant"],
        })
    )
    lines.append("")

    selected = list(selection["selected"])
    if selected:
        pct = 100.0 * len(selected) / meta["n_features"]
        lines.append(
            f"selection at alpha={selection['alpha']:g}: {len(selected)} feature(s) ({pct:.2f}%)"
        )
        lines.append(f"  {'feature':<28}{'phi':>8}{'phi_adj':>9}")
        phi = selection.get("phi") or {}
        phi_adj = selection.get("phi_adjusted") or phi
        for name in selected:
            lines.append(
                f"  {name:<28}{phi.get(name, float('nan')):>8.3f}"
                f"{phi_adj.get(name, float('nan')):>9.3f}"
            )
    else:
        lines.append(
            f"no discoveries at target FDR alpha={selection['alpha']:g}"
        )
    lines.append("")
    lines.append("alpha sweep:")
    lines.append(f"  {'alpha':>6}{'selected':>10}{'percent':>9}")
    for entry in sorted(selection["alpha_sweep"], key=lambda e: e["alpha"]):
        lines.append(
            f"  {entry['alpha']:>6g}{entry['n_selected']:>10d}{entry['percent_selected']:>8.2f}%"
        )

    model_path = out / "model.json"
    if selected:
        _require(model_path, "fit")
    if model_path.exists():
        model = json.loads(model_path.read_text())
        for kind in ("classical", "robust"):
            if kind not in model:
                continue
            fit = model[kind]
            lines.append("")
            lines.append(f"{kind} mixed model: {fit['formula']}")
            lines.append(
                f"  {'term':<28}{'estimate':>9}{'se':>8}{'t':>8}{'p_adj':>10}"
            )
            for row in fit["coefficients"]:
                lines.append(
                    f"  {row['name']:<28}{row['estimate']:>9.3f}{row['se']:>8.3f}"
                    f"{row['t']:>8.3f}{row['p_adj']:>10.3g}"
                )
            lines.append(
                f"  sigma_u={fit['sigma_u']:.3f} sigma_e={fit['sigma_e']:.3f} "
                f"ICC={fit['icc']:.3f} R2m={fit['r2_marginal']:.3f} "
                f"R2c={fit['r2_conditional']:.3f} RMSE={fit['rmse']:.3f}"
            )
            lines.append(f"  AIC={fit['aic']:.1f} BIC={fit['bic']:.1f}")
        slope_rows = [
            row
            for kind in ("classical", "robust") if kind in model
            for row in model[kind]["coefficients"][1:]
        ]
        if slope_rows and all(row["p_adj"] < 0.05 for row in slope_rows):
            lines.append("")
            lines.append(
                "100% confirmation rate: every selected predictor has adjusted p < 0.05"
            )

    figures = [p.name for p in sorted(out.glob("*.svg"))]
    if figures:
        lines.append("")
        lines.append("figures: " + ", ".join(figures))

    report_path = out / "report.txt"
    report_path.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    _log(f"wrote {report_path}")
    return 0


# ------------------------------------------------------------ synth-bench


def cmd_synth_bench(args) -> int:
    out = _resolve_out(args, None)
    designs = args.designs.split(",") if args.designs else ["null", *FAMILIES]
    alphas = (
        tuple(float(a) for a in args.alphas.split(",")) if args.alphas else DEFAULT_ALPHAS
    )
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ConfigError(f"target FDR values must lie in (0, 1), got {a}")
    seed = args.seed if args.seed is not None else 0
    k = args.k if args.k is not None else 50
    variants = ("plain", "da-nn") if args.paired else ("da-nn",)

    rows = []
    for design in designs:
        spec = acceptance_spec(design.strip(), n=args.n, p=args.p)
        _log(f"running {design}: n={spec.n} p={spec.p} reps={args.reps} K={k}")
        rows.extend(
            run_fdr_experiment(
                spec,
                alphas=alphas,
                repetitions=args.reps,
                seed=seed,
                k=k,
                variants=variants,
                threads=_threads(args),
            )
        )
    path = out / "fdr_benchmark.csv"
    write_fdr_csv(rows, path)
    for row in rows:
        _log(
            f"{row['family']:<12} {row['variant']:<6} alpha={row['alpha']:<5g} "
            f"fdr={row['fdr']:.3f} (se {row['fdr_se']:.3f}) "
            f"strict={row['fdr_strict']:.3f} tpr={row['tpr']:.3f}"
        )
    _log(f"wrote {path}")
    return 0


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arousel",
        description="Physiological feature extraction, FDR-controlled selection and mixed-model fitting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default: config out_dir or ./out)")
        p.add_argument("--threads", type=int, help="worker pool size (default: all cores)")

    p = sub.add_parser("extract", help="cut windows and write features.csv")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("select", help="calibrate the selector and write selection.json")
    common(p)
    p.add_argument("--features", help="features.csv path (default: <out>/features.csv)")
    p.add_argument("--alpha", type=float, help="target FDR")
    p.add_argument("--alpha-grid", help="comma-separated alphas for the sweep")
    p.add_argument("--k", type=int, help="number of dummy experiments")
    p.add_argument("--seed", type=int, help="dummy-generation seed")
    p.add_argument("--variant", choices=("plain", "da-nn"), help="selector variant")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("fit", help="fit mixed models on the selected features")
    common(p)
    p.add_argument("--features", help="features.csv path (default: <out>/features.csv)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="write a plain-text summary of a completed run")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth-bench", help="empirical FDR benchmark on synthetic designs")
    common(p)
    p.add_argument("--designs", help="comma list from: null,independent,ar1,duplicated")
    p.add_argument("--alphas", help="comma-separated target FDR values")
    p.add_argument("--reps", type=int, default=100, help="repetitions per design")
    p.add_argument("--n", type=int, default=240, help="rows per repetition")
    p.add_argument("--p", type=int, default=164, help="features per repetition")
    p.add_argument("--k", type=int, help="dummy experiments per selection (default 50)")
    p.add_argument("--seed", type=int, help="benchmark seed (default 0)")
    p.add_argument("--paired", action="store_true", help="run plain and da-nn on shared banks")
    p.set_defaults(func=cmd_synth_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ArouselError as exc:
        _log(f"error: {exc}")
        return getattr(exc, "exit_code", 3)


if __name__ == "__main__":
    raise SystemExit(main())
