"""End-to-end pipeline CLI: extract -> select -> fit -> report, synth-bench,
exit codes and byte-level determinism of every artifact."""

import csv
import io
import json
import shutil
import subprocess
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from arousel.cli import main
from arousel.config import config_hash, load_config
from arousel.dataset import write_features_csv
from arousel.synth import CSV_COLUMNS

# tiny designs here legitimately produce constant-column/degenerate warnings
pytestmark = [
    pytest.mark.filterwarnings("ignore::arousel.errors.DataWarning"),
    pytest.mark.filterwarnings("ignore::arousel.errors.FeatureWarning"),
]


def _good_session(path_sig, path_ann, seed):
    """95 s of synthetic ECG (spike train ~70 bpm) and EDA (tonic + pulses)."""
    rng = np.random.default_rng(seed)
    fs, total = 100.0, 95.0
    n = int(total * fs)
    t = np.arange(n) / fs
    ecg = 0.02 * rng.standard_normal(n)
    beat = 0.3
    while beat < total - 0.5:
        ecg += 1.2 * np.exp(-0.5 * ((t - beat) / 0.018) ** 2)
        beat += 0.85 + 0.08 * np.sin(beat / 4.0) + 0.02 * rng.standard_normal()
    eda = 2.0 + 0.4 * np.sin(2 * np.pi * t / total)
    for onset in rng.uniform(3, total - 6, size=8):
        i = int(onset * fs)
        w = int(4 * fs)
        eda[i : i + w] += 0.3 * np.exp(-np.arange(min(w, n - i)) / (1.2 * fs))
    eda += 0.01 * rng.standard_normal(n)
    lines = ["time,ecg,eda"] + [
        f"{t[i]:.4f},{ecg[i]:.6f},{eda[i]:.6f}" for i in range(n)
    ]
    path_sig.write_text("\n".join(lines) + "\n")
    annot = ["time,arousal,video"] + [
        f"{i / 2.0},{4.0 + 1.5 * np.sin(i / 18.0 + seed):.3f},clip1" for i in range(190)
    ]
    path_ann.write_text("\n".join(annot) + "\n")


def _flat_session(path_sig, path_ann):
    fs = 100.0
    n = int(95.0 * fs)
    path_sig.write_text(
        "\n".join(["time,ecg,eda"] + [f"{i / fs:.4f},0.0,1.0" for i in range(n)]) + "\n"
    )
    path_ann.write_text(
        "\n".join(["time,arousal,video"] + [f"{i / 2.0},5.0,clip1" for i in range(190)])
        + "\n"
    )


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the whole pipeline once on two good sessions plus one flat one."""
    root = tmp_path_factory.mktemp("pipeline")
    _good_session(root / "p01_sig.csv", root / "p01_ann.csv", 11)
    _good_session(root / "p02_sig.csv", root / "p02_ann.csv", 22)
    _flat_session(root / "p03_sig.csv", root / "p03_ann.csv")
    cfg = {
        "sessions": [
            {"participant": p, "signals": f"{p}_sig.csv", "annotations": f"{p}_ann.csv"}
            for p in ("p01", "p02", "p03")
        ],
        "fs_phys": 100.0,
        "fs_annot": 2.0,
        "window_seconds": 90.0,
        "eda_fs": 50.0,
        "out_dir": str(root / "out"),
    }
    cfg_path = root / "pipeline.json"
    cfg_path.write_text(json.dumps(cfg))

    rc = {}
    rc["extract"] = main(["extract", "--config", str(cfg_path), "--threads", "2"])
    rc["extract_again"] = main(
        ["extract", "--config", str(cfg_path), "--out", str(root / "out2"), "--threads", "1"]
    )
    rc["select"] = main(
        ["select", "--config", str(cfg_path), "--threads", "1", "--k", "12", "--seed", "3"]
    )
    rc["fit"] = main(["fit", "--config", str(cfg_path)])
    rc["report"] = main(["report", "--config", str(cfg_path)])
    return {"root": root, "cfg_path": cfg_path, "out": root / "out", "rc": rc}


def _read_rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


def test_extract_skips_unusable_session_with_exit_2(pipeline):
    assert pipeline["rc"]["extract"] == 2  # one window skipped
    rows = _read_rows(pipeline["out"] / "features.csv")
    assert [r["participant"] for r in rows] == ["p01", "p02"]
    assert rows[0]["response"] != rows[1]["response"]


def test_extract_computes_every_feature(pipeline):
    rows = _read_rows(pipeline["out"] / "features.csv")
    header = (pipeline["out"] / "features.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 3 + 162
    nan_cells = [k for row in rows for k, v in row.items() if v == "nan"]
    assert nan_cells == []
    for row in rows:
        assert 700 < float(row["meanRR"]) < 1000
        assert float(row["SCR_npeaks"]) >= 1


def test_extract_is_byte_deterministic_across_threads(pipeline):
    a = (pipeline["out"] / "features.csv").read_bytes()
    b = (pipeline["root"] / "out2" / "features.csv").read_bytes()
    assert pipeline["rc"]["extract_again"] == 2
    assert a == b


def test_extract_meta_echoes_config(pipeline):
    meta = json.loads((pipeline["out"] / "features.meta.json").read_text())
    cfg = load_config(pipeline["cfg_path"])
    assert meta["config_hash"] == config_hash(cfg)
    assert meta["n_rows"] == 2 and meta["n_features"] == 162
    assert meta["config"]["window_seconds"] == 90.0


# ---------------------------------------------------------------------------
# select / fit / report on the real (null) extraction
# ---------------------------------------------------------------------------


def test_select_writes_selection_and_sweep(pipeline):
    assert pipeline["rc"]["select"] == 0
    sel = json.loads((pipeline["out"] / "selection.json").read_text())
    assert sel["selected"] == []  # two noise rows: nothing survives alpha=0.1
    assert sel["alpha"] == 0.1 and sel["variant"] == "da-nn" and sel["k"] == 12
    sweep = sorted(sel["alpha_sweep"], key=lambda e: e["alpha"])
    counts = [e["n_selected"] for e in sweep]
    assert counts == sorted(counts)  # looser alpha never selects fewer
    svg = (pipeline["out"] / "alpha_sweep.svg").read_text()
    assert f"config-hash: {sel['config_hash']}" in svg


def test_fit_reports_nothing_to_fit(pipeline, capsys):
    assert pipeline["rc"]["fit"] == 0
    assert not (pipeline["out"] / "model.json").exists()
    assert main(["fit", "--config", str(pipeline["cfg_path"])]) == 0
    assert "nothing to fit" in capsys.readouterr().out


def test_report_summarizes_null_run(pipeline):
    assert pipeline["rc"]["report"] == 0
    text = (pipeline["out"] / "report.txt").read_text()
    assert "no discoveries at target FDR alpha=0.1" in text
    assert "design: 2 rows x 162 features" in text
    assert "alpha sweep:" in text
    cfg = load_config(pipeline["cfg_path"])
    assert f"config hash: {config_hash(cfg)}" in text


# ---------------------------------------------------------------------------
# select / fit / report on planted features
# ---------------------------------------------------------------------------


def _planted_features(path):
    rng = np.random.default_rng(8)
    names = [f"f{j:02d}" for j in range(20)]
    raw = rng.standard_normal((40, 20))
    groups = np.repeat(np.arange(10), 4)
    y = 1.2 * raw[:, 3] + 0.9 * raw[:, 11]
    y = y + 0.6 * rng.standard_normal(10)[groups] + 0.5 * rng.standard_normal(40)
    rows = [
        (
            (f"p{groups[i]:02d}", f"v{i % 4}"),
            {n: float(raw[i, j]) for j, n in enumerate(names)},
            float(y[i]),
        )
        for i in range(40)
    ]
    write_features_csv(rows, path, config_hash="t35t")


@pytest.fixture()
def planted(tmp_path):
    _planted_features(tmp_path / "features.csv")
    args = ["select", "--out", str(tmp_path), "--alpha", "0.1", "--k", "12",
            "--seed", "3", "--alpha-grid", "0.05,0.1,0.2", "--threads", "1"]
    assert main(args) == 0
    return tmp_path


def test_select_recovers_planted_features(planted):
    sel = json.loads((planted / "selection.json").read_text())
    assert sel["selected"] == ["f03", "f11"]
    assert sel["fdp_hat"] <= 0.1
    assert set(sel["phi"]) == {f"f{j:02d}" for j in range(20)}
    assert sel["phi"]["f03"] == 1.0 and sel["phi"]["f11"] == 1.0
    sweep = {e["alpha"]: e["n_selected"] for e in sel["alpha_sweep"]}
    assert set(sweep) == {0.05, 0.1, 0.2}


def test_select_is_byte_deterministic_across_threads(tmp_path):
    for sub, threads in (("a", "1"), ("b", "4")):
        out = tmp_path / sub
        out.mkdir()
        _planted_features(out / "features.csv")
        assert main(["select", "--out", str(out), "--alpha", "0.1", "--k", "12",
                     "--seed", "3", "--threads", threads]) == 0
    assert (tmp_path / "a" / "selection.json").read_bytes() == (
        tmp_path / "b" / "selection.json"
    ).read_bytes()
    assert (tmp_path / "a" / "alpha_sweep.svg").read_bytes() == (
        tmp_path / "b" / "alpha_sweep.svg"
    ).read_bytes()


def test_fit_writes_models_and_effects(planted):
    assert main(["fit", "--out", str(planted)]) == 0
    model = json.loads((planted / "model.json").read_text())
    assert model["selected"] == ["f03", "f11"]
    for kind in ("classical", "robust"):
        coefs = {c["name"]: c for c in model[kind]["coefficients"]}
        assert set(coefs) == {"(Intercept)", "f03", "f11"}
        assert coefs["f03"]["estimate"] == pytest.approx(0.68, abs=0.1)
        assert coefs["f11"]["estimate"] == pytest.approx(0.61, abs=0.1)
        assert coefs["f03"]["p_adj"] < 1e-6 and coefs["f11"]["p_adj"] < 1e-6
        assert model[kind]["n_groups"] == 10
    root = ET.parse(planted / "effects.svg").getroot()
    assert len(root.findall("{http://www.w3.org/2000/svg}circle")) == 80  # 40 pts x 2 panels


def test_report_on_confirmed_fit(planted, capsys):
    assert main(["fit", "--out", str(planted)]) == 0
    assert main(["report", "--out", str(planted)]) == 0
    text = (planted / "report.txt").read_text()
    assert capsys.readouterr().out.strip().startswith("arousal feature-selection")
    assert "selection at alpha=0.1: 2 feature(s) (10.00%)" in text
    assert "f03" in text and "f11" in text
    assert "100% confirmation rate" in text
    assert "robust mixed model" in text
    assert "figures: alpha_sweep.svg, effects.svg" in text


def test_fit_skips_when_stricter_alpha_empties_selection(tmp_path, capsys):
    _planted_features(tmp_path / "features.csv")
    assert main(["select", "--out", str(tmp_path), "--alpha", "0.05", "--k", "12",
                 "--seed", "3", "--threads", "1"]) == 0
    sel = json.loads((tmp_path / "selection.json").read_text())
    assert sel["selected"] == []
    assert main(["fit", "--out", str(tmp_path)]) == 0
    assert "nothing to fit" in capsys.readouterr().out
    assert not (tmp_path / "model.json").exists()


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------


def test_missing_config_file_exits_4(tmp_path):
    assert main(["extract", "--config", str(tmp_path / "nope.json")]) == 4


def test_extract_without_config_exits_4(tmp_path):
    assert main(["extract", "--out", str(tmp_path)]) == 4


def test_missing_data_files_exit_4(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sessions": [
        {"participant": "p", "signals": "no_s.csv", "annotations": "no_a.csv"}
    ]}))
    assert main(["extract", "--config", str(cfg)]) == 4


def test_malformed_data_file_exits_2(tmp_path):
    (tmp_path / "s.csv").write_text("time,ecg,eda\n")  # header only
    (tmp_path / "a.csv").write_text("time,arousal,video\n0,5,v\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "sessions": [{"participant": "p", "signals": "s.csv", "annotations": "a.csv"}],
        "out_dir": str(tmp_path / "out"),
    }))
    assert main(["extract", "--config", str(cfg)]) == 2


def test_invalid_alpha_exits_4(tmp_path):
    assert main(["select", "--out", str(tmp_path), "--alpha", "1.5"]) == 4


def test_invalid_threads_exit_4(pipeline):
    assert main(["extract", "--config", str(pipeline["cfg_path"]), "--threads", "0"]) == 4


def test_fit_without_selection_exits_2(tmp_path):
    assert main(["fit", "--out", str(tmp_path)]) == 2


def test_report_without_stages_exits_2(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 2


def test_unknown_benchmark_design_exits_4(tmp_path):
    assert main(["synth-bench", "--out", str(tmp_path), "--designs", "bogus",
                 "--reps", "1", "--n", "60", "--p", "24"]) == 4


def test_synth_bench_invalid_alpha_exits_4(tmp_path):
    assert main(["synth-bench", "--out", str(tmp_path), "--alphas", "1.2",
                 "--reps", "1", "--n", "60", "--p", "24"]) == 4


# ---------------------------------------------------------------------------
# synth-bench
# ---------------------------------------------------------------------------


def test_synth_bench_smoke_paired(tmp_path):
    args = ["synth-bench", "--out", str(tmp_path), "--designs", "independent",
            "--alphas", "0.2", "--reps", "2", "--n", "60", "--p", "24",
            "--k", "8", "--seed", "1", "--threads", "1", "--paired"]
    assert main(args) == 0
    path = tmp_path / "fdr_benchmark.csv"
    rows = _read_rows(path)
    assert path.read_text().splitlines()[0].split(",") == CSV_COLUMNS
    assert [(r["variant"], r["family"]) for r in rows] == [
        ("plain", "independent"),
        ("da-nn", "independent"),
    ]
    first = path.read_bytes()
    assert main(args) == 0
    assert path.read_bytes() == first


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "arousel" in capsys.readouterr().out


def test_unknown_command_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0


@pytest.mark.skipif(shutil.which("arousel") is None, reason="console script not installed")
def test_console_script_runs():
    out = subprocess.run(
        ["arousel", "--version"], capture_output=True, text=True, timeout=60
    )
    assert out.returncode == 0
    assert out.stdout.startswith("arousel ")
