import numpy as np
import pytest

from scov import (
    Estimator,
    McConfig,
    covariance_tilde,
    make_model,
    mc_mean,
    mc_mean_variance,
    mean_derivative_fd,
    ht_mean,
    ht_mean_deriv,
    sample_observation,
)
from scov.errors import NegativeCoefficientError, UnsupportedOrderError, ValidationError
from scov.simulate import _block_moments, _merge_moments, block_generator


def test_noise_only_sample_covariance():
    model = make_model(3, 1, 1.0)
    rng = block_generator(99, 0)
    n = 100_000
    ys = np.array([sample_observation(model, np.zeros(3), rng) for _ in range(n)])
    sample_cov = ys.T @ ys / n
    dev = np.max(np.abs(sample_cov - np.eye(3)))
    assert dev < 5 * 1.0 * np.sqrt(2.0 / n) * 3


def test_sampling_is_deterministic():
    model = make_model(4, 2, 0.7)
    x = np.array([1.0, 0.0, 2.0, 0.0])
    y1 = sample_observation(model, x, block_generator(123, 0))
    y2 = sample_observation(model, x, block_generator(123, 0))
    assert np.array_equal(y1, y2)


def test_sample_matches_target_covariance():
    rng = np.random.default_rng(55)
    basis = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    model = make_model(2, 1, 0.8, ranks=(1, 2), basis=basis, m=4)
    x = np.array([1.5, 0.0])
    gen = block_generator(5, 0)
    n = 200_000
    ys = np.array([sample_observation(model, x, gen) for _ in range(n)])
    target = covariance_tilde(model, x)
    dev = np.max(np.abs(ys.T @ ys / n - target))
    assert dev < 3 * np.max(target) * np.sqrt(2.0 / n) * 5


def test_empirical_variance_of_signal_direction():
    model = make_model(5, 1, 1.0)
    x = np.array([1.0, 0, 0, 0, 0])
    report = mc_mean_variance(Estimator("naive"), model, x, McConfig(n_samples=200_000, seed=3))
    # Var(y_1) = x_1 + sigma2 = 2; the naive estimate has mean x_1.
    assert abs(report.mean[0] - 1.0) <= 3 * report.stderr_mean[0]


def test_negative_coefficients_rejected():
    model = make_model(2, 1, 1.0)
    with pytest.raises(NegativeCoefficientError):
        sample_observation(model, np.array([-0.1, 0.0]), block_generator(1, 0))
    with pytest.raises(NegativeCoefficientError):
        mc_mean_variance(Estimator("naive"), model, [-1.0, 0.0], McConfig(n_samples=10, seed=1))


def test_mc_config_validation():
    with pytest.raises(ValidationError):
        McConfig(n_samples=0, seed=1)
    with pytest.raises(ValidationError):
        McConfig(n_samples=10, seed=1, n_shards=11)
    with pytest.raises(ValidationError):
        McConfig(n_samples=10, seed=1, fd_step=0.0)


def test_report_identical_across_shard_counts():
    model = make_model(3, 1, 1.0)
    x = np.array([0.5, 0, 0])
    est = Estimator("ht", tau=1.0)
    reports = [
        mc_mean_variance(est, model, x, McConfig(n_samples=30_000, seed=11, n_shards=shards))
        for shards in (1, 2, 5)
    ]
    for other in reports[1:]:
        assert np.array_equal(reports[0].mean, other.mean)
        assert np.array_equal(reports[0].var_per_k, other.var_per_k)
        assert reports[0].stderr_var_total == other.stderr_var_total


def test_constant_estimator_has_exactly_zero_variance():
    model = make_model(3, 1, 1.0)
    report = mc_mean_variance(
        Estimator("oracle", supp=()), model, np.zeros(3), McConfig(n_samples=20_000, seed=2)
    )
    assert report.var_total == 0.0
    assert np.all(report.var_per_k == 0.0)
    assert report.stderr_var_total == 0.0


def test_naive_variance_matches_closed_form():
    model = make_model(3, 2, 1.0, ranks=(1, 2, 3))
    x = np.array([1.0, 0.5, 0.0])
    report = mc_mean_variance(Estimator("naive"), model, x, McConfig(n_samples=400_000, seed=8))
    expected = 2.0 / np.array([1, 2, 3]) * (x + 1.0) ** 2
    assert np.all(np.abs(report.var_per_k - expected) <= 3 * report.stderr_var)


def test_moment_merge_matches_two_pass():
    rng = np.random.default_rng(77)
    data = rng.standard_normal((5000, 3)) * np.array([1.0, 2.0, 0.5]) + 1.0
    chunks = np.array_split(data, 7)
    mom = _block_moments(chunks[0])
    for chunk in chunks[1:]:
        mom = _merge_moments(mom, _block_moments(chunk))
    mean = data.mean(axis=0)
    d = data - mean
    assert mom.n == 5000
    assert np.allclose(mom.mean, mean, rtol=1e-12)
    assert np.allclose(mom.m2, (d**2).sum(axis=0), rtol=1e-10)
    assert np.allclose(mom.m3, (d**3).sum(axis=0), rtol=1e-9, atol=1e-6)
    assert np.allclose(mom.m4, (d**4).sum(axis=0), rtol=1e-9)
    aug = np.concatenate([data, (data**2).sum(axis=1)[:, None]], axis=1)
    da = aug - aug.mean(axis=0)
    assert np.allclose(mom.across, da.T @ da, rtol=1e-9)


def test_total_variance_stderr_against_direct_computation():
    # One block of samples, regenerated explicitly: the stderr of the total
    # variance must match sqrt(Var(sum_k (X_k - mean_k)^2) / n), which picks
    # up cross-component correlation (the s1mvu components share a common
    # damping factor).
    from scov.simulate import _column_std, _draw_block

    model = make_model(3, 1, 1.0)
    x = np.array([1.0, 0, 0])
    est = Estimator("s1mvu", anchor=(1.0, 0.0, 0.0))
    cfg = McConfig(n_samples=8192, seed=31)
    report = mc_mean_variance(est, model, x, cfg)
    y = _draw_block(model, _column_std(model, x), 8192, block_generator(31, 0))
    ests = est.estimate(model, y)
    z = ((ests - ests.mean(axis=0)) ** 2).sum(axis=1)
    direct = float(np.sqrt(z.var() / 8192))
    assert report.stderr_var_total == pytest.approx(direct, rel=1e-10)
    # and it differs from the independence approximation here
    rss = float(np.sqrt((report.stderr_var**2).sum()))
    assert abs(report.stderr_var_total - rss) > 0.005 * rss


def test_mean_derivative_zeroth_order_is_mc_mean():
    model = make_model(3, 1, 1.0)
    cfg = McConfig(n_samples=20_000, seed=6)
    est = Estimator("naive")
    base = np.array([0.5, 0, 0])
    assert np.array_equal(
        mean_derivative_fd(est, model, base, (0, 0, 0), cfg), mc_mean(est, model, base, cfg)
    )


def test_mean_derivative_naive_is_identity():
    model = make_model(3, 1, 1.0)
    cfg = McConfig(n_samples=100_000, seed=6)
    est = Estimator("naive")
    for base in (np.array([1.0, 0, 0]), np.zeros(3)):
        for k in range(3):
            p = [0, 0, 0]
            p[k] = 1
            deriv = mean_derivative_fd(est, model, base, p, cfg)
            assert deriv[k] == pytest.approx(1.0, abs=1e-2)


def test_mean_derivative_ht_matches_analytic():
    model = make_model(2, 1, 1.0)
    cfg = McConfig(n_samples=500_000, seed=16, fd_step=0.02)
    est = Estimator("ht", tau=1.0)
    base = np.array([1.0, 0.0])
    deriv = mean_derivative_fd(est, model, base, (1, 0), cfg)
    assert deriv[0] == pytest.approx(ht_mean_deriv(model, base, 1.0, 0), abs=1e-2)
    mean = mean_derivative_fd(est, model, base, (0, 0), cfg)
    assert mean[0] == pytest.approx(ht_mean(model, base, 1.0, 0), abs=1e-2)


def test_mean_derivative_second_order():
    # HT mean is curved in x_k; check d2/dx_k2 against differencing the
    # closed form.
    model = make_model(2, 1, 1.0)
    cfg = McConfig(n_samples=400_000, seed=9, fd_step=0.05)
    est = Estimator("ht", tau=2.0)
    base = np.array([1.0, 0.0])
    got = mean_derivative_fd(est, model, base, (2, 0), cfg)[0]
    h = 1e-4
    ref = (
        ht_mean(model, base + [h, 0], 2.0, 0)
        - 2 * ht_mean(model, base, 2.0, 0)
        + ht_mean(model, base - [h, 0], 2.0, 0)
    ) / h**2
    assert got == pytest.approx(ref, abs=0.05)


def test_mean_derivative_order_cap():
    model = make_model(2, 1, 1.0)
    cfg = McConfig(n_samples=100, seed=1)
    with pytest.raises(UnsupportedOrderError):
        mean_derivative_fd(Estimator("naive"), model, np.zeros(2), (2, 1), cfg)


def test_stderr_scales_with_sample_count():
    model = make_model(2, 1, 1.0)
    est = Estimator("naive")
    x = np.array([1.0, 0.0])
    ratios = []
    for rep in range(20):
        full = mc_mean_variance(est, model, x, McConfig(n_samples=4096, seed=1000 + rep))
        half = mc_mean_variance(est, model, x, McConfig(n_samples=2048, seed=1000 + rep))
        ratios.append(half.stderr_var[0] / full.stderr_var[0])
    assert 1.2 <= float(np.mean(ratios)) <= 1.7
