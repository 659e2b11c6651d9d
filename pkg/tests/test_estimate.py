"""Distance bins, the fitting criterion, and the estimator."""

import json
import os
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from stkrig import (DistanceBin, DistanceBins, FitConfig, ModelParams,
                    SimulationSpec, asymptotic_covariance, build_distance_bins,
                    cov_freq, dft_panel, fit, fourier_frequencies,
                    simulate_panel, variogram_model, whittle_criterion)
from stkrig.estimate import (EstimationError, EvaluationError,
                             SingularHessianError, _criterion_terms)

FIXTURES = json.load(open(os.path.join(os.path.dirname(__file__), "fixtures",
                                       "pilot_thresholds.json")))


def test_distance_bin_validation():
    b = DistanceBin(1.0, ((0, 1), (1, 2)))
    assert b.distance == 1.0 and len(b.pairs) == 2
    with pytest.raises(ValueError):
        DistanceBin(-1.0, ((0, 1),))
    with pytest.raises(ValueError):
        DistanceBin(1.0, ())
    with pytest.raises(ValueError):
        DistanceBins([DistanceBin(1.0, ((0, 1),)), DistanceBin(2.0, ((0, 1),))])


def test_exact_bins_on_unit_square():
    # four corners: distance 1 four times, sqrt(2) twice
    locs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    bins = build_distance_bins(locs)
    assert len(bins) == 2
    assert_allclose(bins.distances(), [1.0, np.sqrt(2.0)])
    assert list(bins.pair_counts()) == [4, 2]
    summary = bins.summary()
    assert summary["n_bins"] == 2
    assert summary["pair_counts"] == [4, 2]


def test_exact_bins_merge_near_ties():
    locs = np.array([[0.0, 0.0], [1.0, 0.0], [2.0 + 1e-12, 0.0]])
    bins = build_distance_bins(locs)
    assert len(bins) == 2  # 1.0 twice (0-1, 1-2), 2.0 once (0-2)
    assert list(bins.pair_counts()) == [2, 1]


def test_exact_bins_assign_to_nearest_representative():
    rng = np.random.default_rng(17)
    locs = rng.uniform(0.0, 3.0, (9, 2))
    bins = build_distance_bins(locs, tolerance=0.25)
    reps = bins.distances()
    for b in bins:
        for i, j in b.pairs:
            d = float(np.linalg.norm(locs[i] - locs[j]))
            nearest = reps[np.argmin(np.abs(reps - d))]
            assert nearest == b.distance


def test_quantile_bins_partition_all_pairs():
    rng = np.random.default_rng(11)
    locs = rng.uniform(0.0, 1.0, (20, 2))
    bins = build_distance_bins(locs, mode="quantile", n_bins=4)
    counts = sorted(int(c) for c in bins.pair_counts())
    assert counts == [47, 47, 48, 48]
    assert int(bins.pair_counts().sum()) == 190
    assert np.all(np.diff(bins.distances()) > 0.0)


def test_bins_reject_bad_input():
    locs = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        build_distance_bins(locs)
    good = np.array([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        build_distance_bins(good, mode="quantile")  # n_bins missing
    with pytest.raises(ValueError):
        build_distance_bins(good, mode="nope")


def _toy_panel(seed=0, m=6, n=64):
    rng = np.random.default_rng(seed)
    locs = rng.uniform(0.0, 3.0, (m, 2))
    params = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.3, 0.5), d=2)
    panel = simulate_panel(SimulationSpec(locations=locs, n=n, params=params,
                                          seed=seed + 1))
    return panel, params


def test_criterion_terms_at_exact_variogram():
    # data equal to the model variogram: each term collapses to log g + 1
    params = ModelParams(sigma_e2=1.2, nu=1.1, c_coeffs=(0.2, 0.3), d=2)
    dists = np.array([0.7, 1.9])
    freqs = fourier_frequencies(32)
    g = np.asarray(variogram_model(dists[:, None], freqs[None, :], params))
    terms = _criterion_terms(g, dists, freqs, params)
    assert_allclose(terms, np.log(g) + 1.0, rtol=1e-12)


def test_criterion_rejects_nonfinite():
    params = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.0,), d=2)
    dists = np.array([1.0])
    freqs = fourier_frequencies(16)
    bad = np.ones((1, freqs.size))
    bad[0, 3] = np.inf
    with pytest.raises(EvaluationError):
        _criterion_terms(bad, dists, freqs, params)
    # overflowing parameters fail upstream, inside the covariance evaluation
    huge = ModelParams(sigma_e2=1e300, nu=1.0, c_coeffs=(700.0,), d=2)
    with pytest.raises(FloatingPointError):
        _criterion_terms(np.ones((1, freqs.size)), dists, freqs, huge)


def test_criterion_prefers_truth_on_average():
    truth = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.3, 0.5), d=2)
    bumped = ModelParams(sigma_e2=1.5, nu=1.0, c_coeffs=(0.3, 0.5), d=2)
    rng = np.random.default_rng(23)
    locs = rng.uniform(0.0, 3.0, (6, 2))
    bins = build_distance_bins(locs)
    diffs = []
    for rep in range(50):
        panel = simulate_panel(SimulationSpec(locations=locs, n=128, params=truth,
                                              seed=5600 + rep))
        spectral = dft_panel(panel)
        diffs.append(whittle_criterion(spectral, bins, truth)
                     - whittle_criterion(spectral, bins, bumped))
    assert np.mean(diffs) < 0.0


def test_criterion_frequency_truncation_and_bounds():
    panel, params = _toy_panel(seed=3)
    spectral = dft_panel(panel)
    bins = build_distance_bins(panel.locations)
    full = whittle_criterion(spectral, bins, params)
    head = whittle_criterion(spectral, bins, params, n_frequencies=10)
    assert np.isfinite(full) and np.isfinite(head) and full != head
    with pytest.raises(ValueError):
        whittle_criterion(spectral, bins, params, n_frequencies=0)
    with pytest.raises(ValueError):
        whittle_criterion(spectral, bins, params, n_frequencies=10 ** 6)


def test_approximate_criterion_is_comparable_near_truth():
    panel, params = _toy_panel(seed=4)
    spectral = dft_panel(panel)
    bins = build_distance_bins(panel.locations)
    exact = whittle_criterion(spectral, bins, params)
    approx = whittle_criterion(spectral, bins, params, approximate=True)
    assert np.isfinite(approx) and approx != exact


def test_fit_recovers_simulated_truth():
    truth = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.5, 0.8), d=2)
    rng = np.random.default_rng(77)
    locs = rng.uniform(0.0, 10.0, (10, 2))
    panel = simulate_panel(SimulationSpec(locations=locs, n=256, params=truth,
                                          seed=78))
    res = fit(panel, FitConfig(n_coeffs=1, nu_fixed=1.0, multistart=2,
                               compute_covariance=False))
    assert res.converged
    assert abs(res.params.sigma_e2 - 1.0) < 0.35
    assert abs(res.params.c_coeffs[0] - 0.5) < 0.35
    assert abs(res.params.c_coeffs[1] - 0.8) < 0.30
    assert res.params.nu == 1.0 and res.params.nugget == 0.0
    assert res.n_restarts == 2
    assert res.param_names == ["sigma_e2", "b0", "b1"]


def test_fit_flat_truth_puts_b1_near_zero():
    fx = FIXTURES["flat_truth_b1"]
    flat = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.3, 0.0), d=2)
    cfg = FitConfig(n_coeffs=1, nu_fixed=1.0, multistart=2,
                    compute_covariance=False)
    b1s = []
    for rep in range(fx["replicates"]):
        rng = np.random.default_rng(fx["site_seed_base"] + rep)
        locs = rng.uniform(0.0, 5.0, (10, 2))
        panel = simulate_panel(SimulationSpec(
            locations=locs, n=256, params=flat,
            seed=fx["panel_seed_base"] + rep))
        b1s.append(fit(panel, cfg).params.c_coeffs[1])
    assert np.median(np.abs(b1s)) <= fx["tolerance_abs"]


def test_fit_with_nugget_recovers_measurement_error():
    truth = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.3,), nugget=0.5, d=2)
    rng = np.random.default_rng(881)
    locs = rng.uniform(0.0, 4.0, (12, 2))
    panel = simulate_panel(SimulationSpec(locations=locs, n=256, params=truth,
                                          seed=882, include_measurement_error=True))
    res = fit(panel, FitConfig(n_coeffs=0, nu_fixed=1.0, fit_nugget=True,
                               multistart=2, compute_covariance=False))
    assert 0.25 <= res.params.nugget <= 1.0
    assert abs(res.params.sigma_e2 - 1.0) < 0.5


def test_fit_free_smoothness_reproduces_covariance_function():
    truth = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.3,), nugget=0.5, d=2)
    rng = np.random.default_rng(881)
    locs = rng.uniform(0.0, 4.0, (12, 2))
    panel = simulate_panel(SimulationSpec(locations=locs, n=256, params=truth,
                                          seed=882, include_measurement_error=True))
    res = fit(panel, FitConfig(n_coeffs=0, fit_nugget=True, multistart=2,
                               compute_covariance=False))
    assert res.params.nu > 0.5
    om = np.array([0.5, 1.5, 2.5])
    for h in (0.5, 1.0, 2.0):
        ratio = cov_freq(h, om, res.params) / cov_freq(h, om, truth)
        assert np.all((ratio > 0.6) & (ratio < 1.6))


def test_fit_result_serializes():
    panel, _ = _toy_panel(seed=6)
    res = fit(panel, FitConfig(n_coeffs=0, nu_fixed=1.0, multistart=1,
                               compute_covariance=False))
    blob = json.dumps(res.to_dict())
    back = json.loads(blob)
    assert back["params"]["sigma_e2"] == pytest.approx(res.params.sigma_e2)
    assert back["criterion"] == pytest.approx(res.criterion)
    assert back["covariance"] is None


def test_fit_raises_when_every_restart_fails(monkeypatch):
    import stkrig.estimate as est

    def always_fails(*args, **kwargs):
        raise EvaluationError("forced failure")

    panel, _ = _toy_panel(seed=7)
    monkeypatch.setattr(est, "_criterion_terms", always_fails)
    with pytest.raises(EstimationError):
        fit(panel, FitConfig(n_coeffs=0, nu_fixed=1.0, multistart=2,
                             compute_covariance=False))


def test_asymptotic_covariance_properties():
    panel, params = _toy_panel(seed=8, m=8, n=128)
    bins = build_distance_bins(panel.locations)
    res = fit(panel, FitConfig(n_coeffs=1, nu_fixed=1.0, multistart=2,
                               compute_covariance=False))
    cov = asymptotic_covariance(panel, bins, res.params, nu_fixed=1.0)
    assert cov.shape == (3, 3)
    assert_allclose(cov, cov.T, atol=1e-12)
    assert np.all(np.isfinite(cov))
    assert np.all(np.diag(cov) > 0.0)


def test_wald_intervals_cover_sigma():
    fx = FIXTURES["wald_coverage"]
    truth = ModelParams(sigma_e2=1.0, nu=1.0, c_coeffs=(0.4,), d=2)
    cfg = FitConfig(n_coeffs=0, nu_fixed=1.0, multistart=1)
    hits = 0
    for rep in range(fx["replicates"]):
        rng = np.random.default_rng(fx["site_seed_base"] + rep)
        locs = rng.uniform(0.0, 5.0, (10, 2))
        panel = simulate_panel(SimulationSpec(
            locations=locs, n=128, params=truth,
            seed=fx["panel_seed_base"] + rep))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit(panel, cfg)
        if res.covariance is None:
            continue
        se = float(np.sqrt(res.covariance[0, 0]))
        if abs(res.params.sigma_e2 - 1.0) <= 1.96 * se:
            hits += 1
    assert hits >= fx["min_covered"]


def test_singular_hessian_error_type():
    assert issubclass(SingularHessianError, RuntimeError)
    err = SingularHessianError("x", np.array([0.0, 1.0]))
    assert err.eigenvalues[0] == 0.0
