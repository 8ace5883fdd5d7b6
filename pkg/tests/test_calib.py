import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alacs.calib import (
    DataSample,
    RansacConfig,
    best_consensus,
    compare_methods,
    fit,
    format_table,
    linear_init,
    objective,
    ransac_calibrate,
    refine,
    residual,
    residual_jacobian,
    residuals,
)
from alacs.errors import NoConsensusError, RankDeficiencyError, SingularRayError
from alacs.scanner import ExtrinsicParams

TRUTH = ExtrinsicParams.from_units(19.07, 381.98, 0.69)
Z_AXIS = 1.1691246297533955138  # L0 / sin(alpha), mpmath
INV_SIN_ALPHA = 3.0606959258427025337  # d z_hat / d L0 on the optical axis, mpmath


def exact_samples(p, n=30, seed=0, u_range=(-0.33, 0.0), v_range=(-0.4, 0.4)):
    rng = np.random.default_rng(seed)
    u = rng.uniform(*u_range, n)
    v = rng.uniform(*v_range, n)
    z = p.L0 / (np.sin(p.alpha) - u * np.cos(p.alpha) - v * np.tan(p.beta))
    return np.column_stack([u, v, z])


def assert_params_close(a, b, tol):
    assert abs(a.alpha - b.alpha) < tol
    assert abs(a.L0 - b.L0) < tol
    assert abs(a.beta - b.beta) < tol


# residual ---------------------------------------------------------------------


def test_residual_zero_on_generated_sample():
    u, v, z = exact_samples(TRUTH, n=1)[0]
    assert residual(DataSample(u, v, z), TRUTH) == pytest.approx(0.0, abs=1e-15)


def test_residual_nominal_axis_sample():
    assert residual(DataSample(0.0, 0.0, Z_AXIS), TRUTH) * 1e3 == pytest.approx(0.0, abs=1e-9)
    # rounded to 0.1 mm the sample is still within 0.05 mm of the model
    assert abs(residual(DataSample(0.0, 0.0, 1.1691), TRUTH)) < 5e-5


def test_residual_l0_perturbation():
    s = DataSample(0.0, 0.0, Z_AXIS)
    bumped = ExtrinsicParams(TRUTH.alpha, TRUTH.L0 + 1e-3, TRUTH.beta)
    r = residual(s, bumped)
    assert r * 1e3 == pytest.approx(-INV_SIN_ALPHA, rel=1e-12)
    # finite-difference oracle on the depth model
    h = 1e-6
    plus = residual(s, ExtrinsicParams(TRUTH.alpha, TRUTH.L0 + h, TRUTH.beta))
    minus = residual(s, ExtrinsicParams(TRUTH.alpha, TRUTH.L0 - h, TRUTH.beta))
    assert r == pytest.approx((plus - minus) / (2 * h) * 1e-3, rel=1e-6)


def test_residual_singular():
    p = ExtrinsicParams(math.radians(30), 0.2, 0.0)
    with pytest.raises(SingularRayError):
        residual(DataSample(math.tan(math.radians(30)), 0.0, 1.0), p)


# jacobian ---------------------------------------------------------------------


def test_jacobian_matches_central_differences():
    rng = np.random.default_rng(7)
    h = 1e-7
    worst = 0.0
    for _ in range(100):
        theta = np.array([rng.uniform(0.15, 1.2), rng.uniform(0.1, 0.8), rng.uniform(-0.3, 0.3)])
        data = np.array([[rng.uniform(-0.3, 0.0), rng.uniform(-0.4, 0.4), rng.uniform(0.5, 1.5)]])
        den = np.sin(theta[0]) - data[0, 0] * np.cos(theta[0]) - data[0, 1] * np.tan(theta[2])
        if den < 0.05:
            continue
        J = residual_jacobian(theta, data)[0]
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            p_plus = ExtrinsicParams(*(theta + e))
            p_minus = ExtrinsicParams(*(theta - e))
            fd = (residual(DataSample(*data[0]), p_plus) - residual(DataSample(*data[0]), p_minus)) / (2 * h)
            worst = max(worst, abs(J[k] - fd) / max(abs(fd), 1e-8))
    assert worst < 1e-5


# linear_init ------------------------------------------------------------------


def test_linear_init_exact_recovery():
    est = linear_init(exact_samples(TRUTH))
    assert_params_close(est, TRUTH, 1e-10)


@given(
    alpha=st.floats(math.radians(10), math.radians(70)),
    L0=st.floats(0.1, 0.6),
    beta=st.floats(math.radians(-5), math.radians(5)),
    seed=st.integers(0, 2**16),
)
@settings(max_examples=100, deadline=None)
def test_linear_init_exact_recovery_random_truth(alpha, L0, beta, seed):
    truth = ExtrinsicParams(alpha, L0, beta)
    u_hi = 0.9 * math.tan(alpha)
    est = linear_init(exact_samples(truth, n=12, seed=seed, u_range=(-0.3, u_hi)))
    assert_params_close(est, truth, 1e-10)


def test_linear_init_beta_zero():
    truth = ExtrinsicParams(TRUTH.alpha, TRUTH.L0, 0.0)
    est = linear_init(exact_samples(truth))
    assert abs(est.beta) < 1e-10


def test_linear_init_two_samples():
    with pytest.raises(RankDeficiencyError):
        linear_init(exact_samples(TRUTH, n=2))


def test_linear_init_constant_u():
    data = exact_samples(TRUTH, n=10)
    data[:, 0] = -0.1
    with pytest.raises(RankDeficiencyError):
        linear_init(data)


# refine -----------------------------------------------------------------------


def test_refine_at_truth_is_fixed_point():
    data = exact_samples(TRUTH)
    assert refine(data, TRUTH) == TRUTH


def test_refine_recovers_truth_from_perturbed_start():
    data = exact_samples(TRUTH)
    init = ExtrinsicParams(TRUTH.alpha + math.radians(2), TRUTH.L0 + 0.02, TRUTH.beta + math.radians(0.5))
    assert_params_close(refine(data, init), TRUTH, 1e-8)


def test_low_fidelity_fit_is_worse_when_beta_nonzero():
    data = exact_samples(TRUTH, seed=3)
    high = fit(data, fit_beta=True)
    low = fit(data, fit_beta=False)
    assert low.beta == 0.0
    assert np.mean(np.abs(residuals(data, low))) > np.mean(np.abs(residuals(data, high))) + 1e-4


def test_refine_reduces_objective_on_noisy_data():
    rng = np.random.default_rng(12)
    for seed in range(20):
        data = exact_samples(TRUTH, seed=seed)
        data[:, 2] += rng.normal(0, 0.002, len(data))
        init = linear_init(data)
        out = refine(data, init)
        assert objective(data, out) <= objective(data, init)


@given(
    da=st.floats(-0.05, 0.05),
    dl=st.floats(-0.03, 0.03),
    db=st.floats(-0.02, 0.02),
    seed=st.integers(0, 1000),
)
@settings(max_examples=60, deadline=None)
def test_refine_never_increases_objective(da, dl, db, seed):
    data = exact_samples(TRUTH, seed=seed)
    data[:, 2] += np.random.default_rng(seed).normal(0, 0.003, len(data))
    init = ExtrinsicParams(TRUTH.alpha + da, TRUTH.L0 + dl, TRUTH.beta + db)
    assert objective(data, refine(data, init)) <= objective(data, init)


def test_refine_low_fidelity_pins_beta():
    data = exact_samples(TRUTH)
    out = refine(data, ExtrinsicParams(TRUTH.alpha, TRUTH.L0, 0.3), fit_beta=False)
    assert out.beta == 0.0


# ransac -----------------------------------------------------------------------


def planted(seed, n_clean=24, n_out=6, shift=0.03, noise=0.0):
    rng = np.random.default_rng(seed)
    data = exact_samples(TRUTH, n=n_clean + n_out, seed=seed)
    data[:, 2] += rng.normal(0, noise, len(data)) if noise else 0.0
    bad = rng.choice(len(data), n_out, replace=False)
    data[bad, 2] += shift
    return data, sorted(set(range(len(data))) - set(bad.tolist()))


def test_ransac_all_exact():
    data = exact_samples(TRUTH)
    rep = ransac_calibrate(data, RansacConfig(k_max=20, epsilon=0.002))
    assert rep.inliers == list(range(30))
    full = fit(data)
    assert_params_close(rep.params, full, 1e-12)


def test_ransac_planted_outliers():
    data, clean = planted(seed=1)
    rep = ransac_calibrate(data, RansacConfig(k_max=100, epsilon=0.002, rng_seed=1))
    assert rep.inliers == clean
    assert abs(math.degrees(rep.params.alpha - TRUTH.alpha)) < 0.05
    assert abs(rep.params.L0 - TRUTH.L0) < 0.5e-3
    assert abs(math.degrees(rep.params.beta - TRUTH.beta)) < 0.05


def test_ransac_kmax_zero():
    with pytest.raises(NoConsensusError):
        ransac_calibrate(exact_samples(TRUTH), RansacConfig(k_max=0))


def test_ransac_too_few_samples():
    with pytest.raises(RankDeficiencyError):
        ransac_calibrate(exact_samples(TRUTH, n=3), RansacConfig())


def test_ransac_deterministic_and_thread_invariant():
    data, _ = planted(seed=4, noise=0.0005)
    a = ransac_calibrate(data, RansacConfig(k_max=60, rng_seed=9))
    b = ransac_calibrate(data, RansacConfig(k_max=60, rng_seed=9))
    c = ransac_calibrate(data, RansacConfig(k_max=60, rng_seed=9, workers=4))
    assert a.to_dict() == b.to_dict() == c.to_dict()


def test_best_consensus_ties_keep_first():
    first = np.array([0, 1, 2, 3])
    second = np.array([4, 5, 6, 7])
    assert best_consensus([None, first, second]) is first
    assert best_consensus([first, np.array([1, 2, 3, 4, 5])])[0] == 1
    assert best_consensus([None, None]) is None


def test_ransac_breakdown_40_percent():
    successes = 0
    for seed in range(100):
        data, _ = planted(seed=100 + seed, n_clean=18, n_out=12, shift=0.03, noise=0.0003)
        rep = ransac_calibrate(data, RansacConfig(k_max=200, epsilon=0.002, rng_seed=seed))
        ok = (
            abs(math.degrees(rep.params.alpha - TRUTH.alpha)) <= 0.1
            and abs(rep.params.L0 - TRUTH.L0) <= 1e-3
            and abs(math.degrees(rep.params.beta - TRUTH.beta)) <= 0.1
        )
        successes += ok
    assert successes >= 99


# compare_methods --------------------------------------------------------------


def test_compare_clean_beta_nonzero():
    reps = compare_methods(exact_samples(TRUTH), RansacConfig(k_max=30))
    m = [r.mean_abs_residual for r in reps]
    assert m[2] < 1e-9 and m[3] < 1e-9
    assert m[0] > 1e-5 and m[1] > 1e-5
    assert [r.method for r in reps] == [1, 2, 3, 4]
    assert not reps[0].fit_beta and reps[2].fit_beta


def test_compare_with_outliers_ordering():
    data, _ = planted(seed=2, noise=0.0003)
    m = [r.mean_abs_residual for r in compare_methods(data, RansacConfig(k_max=100, rng_seed=2))]
    assert m[3] < m[2]
    assert m[1] < m[0]


def test_compare_beta_zero_all_agree():
    truth = ExtrinsicParams(TRUTH.alpha, TRUTH.L0, 0.0)
    reps = compare_methods(exact_samples(truth), RansacConfig(k_max=20))
    for r in reps:
        assert_params_close(r.params, truth, 1e-8)


def test_report_mean_error_conventions():
    data, clean = planted(seed=5)
    reps = compare_methods(data, RansacConfig(k_max=50, rng_seed=5))
    for r in reps:
        res = np.abs(r.residuals)
        assert r.mean_abs_residual == pytest.approx(np.mean(res[r.inliers]))
        assert r.mean_abs_residual_all == pytest.approx(np.mean(res))
    assert reps[0].inliers == list(range(30)) and reps[2].inliers == list(range(30))
    assert reps[3].inliers == clean


def test_report_json_and_table():
    reps = compare_methods(exact_samples(TRUTH), RansacConfig(k_max=10))
    d = reps[3].to_dict()
    assert d["alpha_deg"] == pytest.approx(19.07)
    assert d["L0_mm"] == pytest.approx(381.98)
    assert d["beta_deg"] == pytest.approx(0.69)
    assert reps[0].to_dict()["beta_deg"] is None
    assert len(d["residuals_mm"]) == 30
    table = format_table(reps)
    lines = table.splitlines()
    assert "alpha (deg)" in lines[1] and "Mean Error" in lines[1]
    row4 = [ln for ln in lines if ln.startswith("Method 4")][0]
    assert "19.07" in row4 and "381.98" in row4 and "0.69" in row4
    row1 = [ln for ln in lines if ln.startswith("Method 1")][0]
    assert " / " in row1 + " "


def test_ransac_config_units():
    cfg = RansacConfig.from_dict({"k_max": 50, "epsilon_mm": 3, "rng_seed": 4})
    assert cfg.epsilon == pytest.approx(0.003)
    assert cfg.to_dict()["epsilon_mm"] == pytest.approx(3.0)
    with pytest.raises(ValueError):
        RansacConfig(subset_size=2)
