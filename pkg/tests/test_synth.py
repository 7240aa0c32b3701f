"""Synthetic design generator and the Monte-Carlo FDR harness."""

import numpy as np
import pytest

from arousel.errors import ConfigError
from arousel.synth import (
    CSV_COLUMNS,
    SynthSpec,
    SynthTruth,
    acceptance_spec,
    generate,
    read_fdr_csv,
    run_fdr_experiment,
    write_fdr_csv,
)


# ---------------------------------------------------------------------------
# generate(): the three correlation families
# ---------------------------------------------------------------------------


def test_independent_columns_nearly_uncorrelated():
    x, _, truth = generate(SynthSpec(n=500, p=30, family="independent", seed=7))
    c = np.corrcoef(x, rowvar=False)
    off = np.abs(c[~np.eye(30, dtype=bool)])
    assert off.max() < 0.2
    assert truth.lag_cut == 0 and truth.dup_of == {}


def test_ar1_adjacent_correlation_near_rho():
    x, _, truth = generate(SynthSpec(n=500, p=30, family="ar1", rho=0.8, seed=3))
    for j in range(29):
        rho_hat = np.corrcoef(x[:, j], x[:, j + 1])[0, 1]
        assert abs(rho_hat - 0.8) < 0.1
    # 0.8^3 = 0.512 >= 0.5 > 0.8^4: neighbours up to lag 3 count as one cluster
    assert truth.lag_cut == 3


def test_ar1_rho_zero_has_no_cluster_lag():
    _, _, truth = generate(SynthSpec(n=100, p=8, family="ar1", rho=0.0, seed=1))
    assert truth.lag_cut == 0


def test_duplicated_family_appends_twins_of_support():
    spec = SynthSpec(
        n=2000, p=20, support=(2, 5, 11), family="duplicated", rho_dup=0.99, seed=9
    )
    x, _, truth = generate(spec)
    assert truth.dup_of == {17: 2, 18: 5, 19: 11}
    for dup, orig in truth.dup_of.items():
        rho_hat = np.corrcoef(x[:, dup], x[:, orig])[0, 1]
        assert abs(rho_hat - 0.99) < 0.01


def test_outputs_are_standardized():
    x, y, _ = generate(SynthSpec(n=200, p=15, support=(1, 4), seed=5))
    assert np.abs(x.mean(axis=0)).max() < 1e-9
    assert np.abs(x.std(axis=0, ddof=1) - 1.0).max() < 1e-9
    assert abs(y.mean()) < 1e-9
    assert abs(y.std(ddof=1) - 1.0) < 1e-9


def test_empty_support_response_independent_of_design():
    x, y, truth = generate(SynthSpec(n=500, p=30, support=(), seed=11))
    r = np.abs(x.T @ y) / ((500 - 1) * y.std(ddof=1))
    assert r.max() < 0.2
    assert truth.support == frozenset()


def test_generate_reproducible_from_spec():
    spec = SynthSpec(n=80, p=10, support=(2,), family="ar1", seed=42)
    xa, ya, _ = generate(spec)
    xb, yb, _ = generate(spec)
    assert np.array_equal(xa, xb)
    assert np.array_equal(ya, yb)


def test_generate_seed_changes_data():
    xa, _, _ = generate(SynthSpec(n=80, p=10, seed=1))
    xb, _, _ = generate(SynthSpec(n=80, p=10, seed=2))
    assert not np.array_equal(xa, xb)


def test_group_effects_widen_group_means():
    base = dict(n=80, p=5, support=(), n_groups=4, seed=2)
    _, y0, _ = generate(SynthSpec(group_sd=0.0, **base))
    _, y5, _ = generate(SynthSpec(group_sd=5.0, **base))
    labels = np.arange(80) % 4
    spread0 = np.std([y0[labels == g].mean() for g in range(4)])
    spread5 = np.std([y5[labels == g].mean() for g in range(4)])
    assert spread5 > 3 * spread0


# ---------------------------------------------------------------------------
# SynthTruth scoring: strict vs cluster-aware
# ---------------------------------------------------------------------------


def test_score_counts_duplicates_as_their_original():
    truth = SynthTruth(frozenset({2, 5}), "duplicated", dup_of={9: 2})
    s = truth.score([9, 5, 7])
    assert s["fdp"] == pytest.approx(1 / 3)  # clusters {2, 5, 7}, one false
    assert s["fdp_strict"] == pytest.approx(2 / 3)  # raw picks 9 and 7 are false
    assert s["tpr"] == 1.0
    assert s["n_selected"] == 3


def test_score_ar1_neighbours_within_lag():
    truth = SynthTruth(frozenset({10}), "ar1", lag_cut=3)
    assert truth.score([12])["fdp"] == 0.0  # |12-10| <= 3: same cluster
    assert truth.score([12])["fdp_strict"] == 1.0
    assert truth.score([14])["fdp"] == 1.0  # |14-10| > 3: a real false pick
    assert truth.score([10, 14])["tpr"] == 1.0


def test_score_empty_selection():
    truth = SynthTruth(frozenset({1}), "independent")
    s = truth.score([])
    assert s["fdp"] == 0.0 and s["fdp_strict"] == 0.0
    assert s["tpr"] == 0.0 and s["n_selected"] == 0


def test_score_null_truth_has_nan_tpr():
    truth = SynthTruth(frozenset(), "independent")
    assert np.isnan(truth.score([3])["tpr"])
    assert truth.score([3])["fdp"] == 1.0


# ---------------------------------------------------------------------------
# SynthSpec validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(family="student"), "unknown family"),
        (dict(family="ar1", rho=1.0), "rho"),
        (dict(family="ar1", rho=-0.1), "rho"),
        (dict(noise_sd=0.0), "noise_sd"),
        (dict(p=5, support=(0, 1, 2, 3, 4)), "support"),
        (dict(support=(1, 2), coefs=(1.0,)), "coefs"),
    ],
)
def test_spec_rejects_invalid_parameters(kwargs, match):
    with pytest.raises(ConfigError, match=match):
        SynthSpec(**kwargs)


def test_duplicated_support_must_leave_room_for_twins():
    with pytest.raises(ConfigError, match="duplicated"):
        SynthSpec(p=10, support=(7, 8), family="duplicated")
    # one slot below the reserved tail is fine
    SynthSpec(p=10, support=(6, 7), family="duplicated")


# ---------------------------------------------------------------------------
# acceptance_spec(): canonical benchmark designs
# ---------------------------------------------------------------------------


def test_acceptance_spec_designs():
    null = acceptance_spec("null")
    assert null.support == () and null.family == "independent"
    indep = acceptance_spec("independent")
    assert indep.support == (20, 80, 140) and (indep.n, indep.p) == (240, 164)
    ar1 = acceptance_spec("ar1")
    assert ar1.family == "ar1" and ar1.rho == 0.8
    dup = acceptance_spec("duplicated")
    assert dup.family == "duplicated" and dup.support == (20, 80, 140)


def test_acceptance_spec_scales_support_to_width():
    spec = acceptance_spec("independent", n=100, p=50)
    assert spec.support == (6, 24, 43)


def test_acceptance_spec_rejects_unknown_and_tiny():
    with pytest.raises(ConfigError, match="unknown benchmark design"):
        acceptance_spec("bogus")
    with pytest.raises(ConfigError, match="too small"):
        acceptance_spec("independent", n=40, p=6)


# ---------------------------------------------------------------------------
# run_fdr_experiment(): the Monte-Carlo harness
# ---------------------------------------------------------------------------

SMOKE = SynthSpec(n=120, p=20, support=(3, 11, 16), family="independent", seed=1)


def _smoke_rows(**overrides):
    kwargs = dict(
        alphas=(0.1, 0.2),
        repetitions=5,
        seed=4,
        k=16,
        variants=("da-nn", "plain"),
    )
    kwargs.update(overrides)
    return run_fdr_experiment(SMOKE, **kwargs)


def test_experiment_rows_cover_variant_alpha_grid():
    rows = _smoke_rows()
    assert [(r["variant"], r["alpha"]) for r in rows] == [
        ("da-nn", 0.1),
        ("da-nn", 0.2),
        ("plain", 0.1),
        ("plain", 0.2),
    ]
    for row in rows:
        assert set(row) == set(CSV_COLUMNS)
        assert row["repetitions"] == 5 and row["k"] == 16
        assert row["family"] == "independent"
        assert 0.0 <= row["fdr"] <= 1.0
        assert 0.0 <= row["tpr"] <= 1.0
        assert row["fdr_se"] >= 0.0 and row["tpr_se"] >= 0.0


def test_experiment_reproducible_from_spec_and_seed():
    assert _smoke_rows() == _smoke_rows()


def test_experiment_seed_changes_outcome():
    a = _smoke_rows(repetitions=3)
    b = _smoke_rows(repetitions=3, seed=77)
    assert any(
        ra["mean_selected"] != rb["mean_selected"] or ra["fdr"] != rb["fdr"]
        for ra, rb in zip(a, b)
    )


def test_experiment_null_design_labelled_null():
    spec = SynthSpec(n=80, p=12, support=(), family="independent", seed=6)
    rows = run_fdr_experiment(
        spec, alphas=(0.1,), repetitions=2, seed=1, k=8, variants=("da-nn",)
    )
    assert rows[0]["family"] == "null"
    assert np.isnan(rows[0]["tpr"])
    assert rows[0]["fdr"] == rows[0]["fdr_strict"]


def test_experiment_rejects_zero_repetitions():
    with pytest.raises(ConfigError, match="repetitions"):
        run_fdr_experiment(SMOKE, repetitions=0)


def test_more_lenient_alpha_selects_no_fewer():
    rows = _smoke_rows(variants=("da-nn",))
    assert rows[0]["mean_selected"] <= rows[1]["mean_selected"]


# ---------------------------------------------------------------------------
# CSV report round-trip
# ---------------------------------------------------------------------------


def test_fdr_csv_round_trip(tmp_path):
    rows = _smoke_rows(repetitions=2)
    path = tmp_path / "fdr_report.csv"
    write_fdr_csv(rows, path)

    header = path.read_text().splitlines()[0]
    assert header.split(",") == CSV_COLUMNS

    parsed = read_fdr_csv(path)
    assert len(parsed) == len(rows)
    for raw, row in zip(parsed, rows):
        assert raw["family"] == row["family"]
        assert raw["variant"] == row["variant"]
        assert int(raw["n"]) == row["n"] and int(raw["p"]) == row["p"]
        for key in ("alpha", "fdr", "fdr_strict", "tpr", "mean_selected"):
            assert float(raw[key]) == pytest.approx(row[key], rel=1e-4, nan_ok=True)
