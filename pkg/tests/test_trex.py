"""Dummy-vote selector: occurrences, penalization, FDP estimate, calibration."""

import warnings

import numpy as np
import pytest

from arousel.errors import ContractViolation, DataWarning
from arousel.trex import (
    ExperimentBank,
    calibrate_and_select,
    da_nn_penalize,
    estimate_fdp,
    exchangeability_bound,
    generate_dummies,
    load_selection,
    standardize_columns,
)


# ---------------------------------------------------------------------------
# dummies


def test_dummies_deterministic_and_standardized():
    a = generate_dummies(200, 8, seed=123, experiment_index=4)
    b = generate_dummies(200, 8, seed=123, experiment_index=4)
    np.testing.assert_array_equal(a, b)
    assert np.abs(a.mean(axis=0)).max() < 1e-9
    np.testing.assert_allclose(a.std(axis=0, ddof=1), 1.0, atol=1e-9)


def test_dummies_substreams_differ():
    a = generate_dummies(50, 4, seed=9, experiment_index=0)
    b = generate_dummies(50, 4, seed=9, experiment_index=1)
    assert not np.array_equal(a, b)
    c = generate_dummies(50, 4, seed=10, experiment_index=0)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# occurrences


def _toy_bank(k: int = 20) -> ExperimentBank:
    rng = np.random.default_rng(0)
    x = standardize_columns(rng.standard_normal((80, 12)))
    y = x[:, 2] + 0.8 * x[:, 7] + 0.5 * rng.standard_normal(80)
    return ExperimentBank(x, y, k=k, seed=31, n_dummies=12)


def test_occurrences_monotone_in_budget():
    bank = _toy_bank()
    bank.extend_all(3, allow_exhaustion=True)
    prev_r = prev_d = None
    for t in (1, 2, 3):
        phi_r, phi_d = bank.occurrences(t)
        assert ((phi_r >= 0) & (phi_r <= 1)).all()
        if prev_r is not None:
            assert (phi_r >= prev_r - 1e-15).all()
            assert (phi_d >= prev_d - 1e-15).all()
        prev_r, prev_d = phi_r, phi_d


def test_strong_signal_has_full_occurrence():
    bank = _toy_bank()
    bank.extend_all(1, allow_exhaustion=True)
    phi_r, _ = bank.occurrences(1)
    assert phi_r[2] == 1.0  # enters before any dummy in every experiment


def test_selected_size_antimonotone_in_v():
    bank = _toy_bank()
    bank.extend_all(2, allow_exhaustion=True)
    phi_r, _ = bank.occurrences(2)
    sizes = [int(np.sum(phi_r > v)) for v in np.linspace(0.5, 0.99, 25)]
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


# ---------------------------------------------------------------------------
# DA-NN penalization


def test_da_nn_identity_correlation_is_noop():
    phi = np.array([0.1, 0.6, 0.9])
    out = da_nn_penalize(phi, np.eye(3), rho_thr=0.5)
    np.testing.assert_array_equal(out, phi)


def test_da_nn_perfect_twins_fully_penalized():
    corr = np.array([[1.0, 1.0], [1.0, 1.0]])
    out = da_nn_penalize(np.array([0.7, 0.7]), corr, rho_thr=0.5)
    np.testing.assert_allclose(out, [0.0, 0.0], atol=1e-15)


def test_da_nn_hand_value():
    corr = np.array([[1.0, 0.9], [0.9, 1.0]])
    out = da_nn_penalize(np.array([0.6, 0.6]), corr, rho_thr=0.5)
    np.testing.assert_allclose(out, [0.6 * (1 - 0.9)] * 2, atol=1e-12)


def test_da_nn_below_threshold_untouched():
    corr = np.array([[1.0, 0.4], [0.4, 1.0]])
    phi = np.array([0.6, 0.6])
    np.testing.assert_array_equal(da_nn_penalize(phi, corr, rho_thr=0.5), phi)


def test_da_nn_never_amplifies():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((40, 6))
    corr = np.corrcoef(a.T)
    phi = rng.uniform(0, 1, 6)
    out = da_nn_penalize(phi, corr, rho_thr=0.3)
    assert (out <= phi + 1e-15).all()
    assert (out >= 0).all()


def test_da_nn_asymmetric_corr_rejected():
    bad = np.array([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(ContractViolation):
        da_nn_penalize(np.array([0.5, 0.5]), bad, rho_thr=0.5)


# ---------------------------------------------------------------------------
# FDP estimate + exchangeability bound


def test_fdp_no_dummies_above_v():
    phi_r = np.array([0.9, 0.8, 0.2])
    phi_d = np.array([0.1, 0.2, 0.3])
    assert estimate_fdp(phi_r, phi_d, v=0.5, p=3, n_dummies=3) == 0.0


def test_fdp_no_reals_above_v_clamps_denominator():
    phi_r = np.array([0.1, 0.2])
    phi_d = np.array([0.9, 0.8, 0.1, 0.1])
    # V_hat = (2/4) * 2 = 1.0, denominator clamps to 1
    assert estimate_fdp(phi_r, phi_d, v=0.5, p=2, n_dummies=4) == 1.0


def test_fdp_hand_value_quarter():
    # p = L, 2 dummies and 8 reals above v -> (p/L * 2) / 8 = 0.25
    phi_r = np.r_[np.full(8, 0.9), np.full(8, 0.1)]
    phi_d = np.r_[np.full(2, 0.9), np.full(14, 0.1)]
    assert estimate_fdp(phi_r, phi_d, v=0.5, p=16, n_dummies=16) == 0.25


def test_exchangeability_bound_shrinks_with_more_dummies():
    vals = [exchangeability_bound(2, 50, t=1, n_dummies=L) for L in (50, 100, 200, 400)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_exchangeability_bound_grows_with_budget():
    vals = [exchangeability_bound(2, 50, t=t, n_dummies=100) for t in (1, 2, 4, 8)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# end-to-end calibration


def _planted(seed: int = 3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((100, 50))
    beta = np.zeros(50)
    beta[[4, 17, 33]] = 1.2
    y = x @ beta + rng.standard_normal(100)
    return x, y


def test_planted_signals_recovered():
    x, y = _planted()
    for variant in ("plain", "da-nn"):
        res = calibrate_and_select(x, y, alpha=0.1, k=50, seed=5, variant=variant)
        assert sorted(res.selected_idx) == [4, 17, 33]
        assert res.fdp_hat <= 0.1
        assert res.selected == ["x4", "x17", "x33"]


def test_pure_noise_selects_nothing():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((60, 20))
    y = rng.standard_normal(60)
    for variant in ("plain", "da-nn"):
        res = calibrate_and_select(x, y, alpha=0.05, k=50, seed=11, variant=variant)
        assert res.selected == []


def test_selector_deterministic():
    x, y = _planted()
    a = calibrate_and_select(x, y, alpha=0.1, k=50, seed=5)
    b = calibrate_and_select(x, y, alpha=0.1, k=50, seed=5)
    assert a.selected == b.selected
    assert a.v == b.v and a.t == b.t and a.fdp_hat == b.fdp_hat
    assert a.phi == b.phi and a.phi_adjusted == b.phi_adjusted


def test_selector_scale_invariant():
    x, y = _planted()
    a = calibrate_and_select(x, y, alpha=0.1, k=50, seed=5)
    b = calibrate_and_select(x, 3.7 * y, alpha=0.1, k=50, seed=5)
    assert a.selected_idx == b.selected_idx


def test_alpha_sweep_structure():
    x, y = _planted()
    res = calibrate_and_select(x, y, alpha=0.1, k=50, seed=5, alpha_grid=(0.05, 0.1, 0.2))
    alphas = [row["alpha"] for row in res.alpha_sweep]
    assert alphas == sorted(alphas)
    assert 0.1 in alphas
    for row in res.alpha_sweep:
        assert row["percent_selected"] == pytest.approx(100.0 * row["n_selected"] / 50)


def test_phi_keyed_by_feature_names():
    x, y = _planted()
    names = [f"f{j:02d}" for j in range(50)]
    res = calibrate_and_select(x, y, alpha=0.1, k=50, seed=5, feature_names=names)
    assert set(res.phi) == set(names)
    assert res.selected == ["f04", "f17", "f33"]
    assert all(0.0 <= v <= 1.0 for v in res.phi.values())
    for name in names:
        assert res.phi_adjusted[name] <= res.phi[name] + 1e-15


def test_selection_round_trip(tmp_path):
    x, y = _planted()
    res = calibrate_and_select(x, y, alpha=0.1, k=50, seed=5)
    path = tmp_path / "selection.json"
    res.save(path, extra={"config_hash": "abc123"})
    doc = load_selection(path)
    assert doc["selected"] == res.selected
    assert doc["config_hash"] == "abc123"
    assert doc["alpha"] == 0.1


def test_constant_response_rejected():
    x, _ = _planted()
    with pytest.raises(ContractViolation):
        calibrate_and_select(x, np.ones(100), alpha=0.1, k=10, seed=0)


def test_constant_column_warns():
    x, y = _planted()
    x = x.copy()
    x[:, 9] = 5.0
    with pytest.warns(DataWarning):
        res = calibrate_and_select(x, y, alpha=0.1, k=20, seed=5)
    assert 9 not in res.selected_idx


def test_unknown_variant_rejected():
    x, y = _planted()
    with pytest.raises(ContractViolation):
        calibrate_and_select(x, y, variant="bogus", k=10)
