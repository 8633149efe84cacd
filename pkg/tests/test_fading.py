import math

import numpy as np
import pytest
from scipy import stats

from forestlink import (
    DegenerateDataError,
    FadingFit,
    Family,
    best_fit,
    empirical_cdf,
    fade_depth,
    fit_family,
    is_worse_than_rayleigh,
    log_likelihood,
    quantile_nearest_rank,
    sample_envelope,
)
from forestlink.fading import family_geometric_mean, family_median, pdf


def _fit(family, **params):
    return FadingFit(family=Family(family), params=params, log_likelihood=0.0, sample_count=0)


# ---------------------------------------------------------------------------
# empirical CDF


def test_ecdf_single_value():
    cdf = empirical_cdf([5.0])
    assert cdf(4.999) == 0.0
    assert cdf(5.0) == 1.0


def test_ecdf_rank_counting():
    cdf = empirical_cdf([1.0, 2.0, 3.0, 4.0])
    assert cdf(2.5) == 0.5
    assert cdf(0.0) == 0.0
    assert cdf(4.0) == 1.0


def test_ecdf_normal_median():
    rng = np.random.default_rng(12)
    cdf = empirical_cdf(rng.standard_normal(100_000))
    assert cdf(0.0) == pytest.approx(0.5, abs=0.01)


def test_ecdf_monotone_and_bounded():
    rng = np.random.default_rng(13)
    cdf = empirical_cdf(rng.normal(3, 2, size=500))
    grid = np.linspace(-10, 15, 300)
    values = cdf(grid)
    assert np.all(np.diff(values) >= 0)
    assert values[0] == 0.0
    assert values[-1] == 1.0


# ---------------------------------------------------------------------------
# fade depth


def test_fade_depth_constant_samples():
    with pytest.warns(UserWarning):
        report = fade_depth([2.5] * 10)
    assert report.depth_db == 0.0
    assert report.max_fade_db == 2.5


def test_fade_depth_engineered_levels():
    # 50 values at the median level, 49 at the 99 % level, one maximum
    data = np.concatenate([np.full(50, 0.5), np.full(49, 20.75), [21.6]])
    report = fade_depth(data)
    assert report.level_50_db == 0.5
    assert report.level_99_db == 20.75
    assert report.depth_db == 20.25
    assert report.max_fade_db == 21.6


def test_fade_depth_identity_is_exact():
    rng = np.random.default_rng(14)
    for _ in range(10):
        data = np.abs(rng.normal(0, 5, size=rng.integers(100, 5000)))
        report = fade_depth(data)
        assert report.depth_db == report.level_99_db - report.level_50_db
        assert report.max_fade_db >= report.level_99_db


def test_fade_depth_half_normal_oracle():
    rng = np.random.default_rng(15)
    data = np.abs(rng.normal(0.0, 4.0, size=100_000))
    report = fade_depth(data)
    expected = 4.0 * (stats.norm.ppf(0.995) - stats.norm.ppf(0.75))
    assert report.depth_db == pytest.approx(expected, abs=0.15)


def test_fade_depth_warns_below_hundred_samples():
    with pytest.warns(UserWarning, match="99"):
        fade_depth([1.0, 2.0, 3.0])


def test_quantile_nearest_rank():
    values = [3.0, 1.0, 2.0, 4.0]
    assert quantile_nearest_rank(values, 0.5) == 2.0
    assert quantile_nearest_rank(values, 0.75) == 3.0
    assert quantile_nearest_rank(values, 1.0) == 4.0
    assert quantile_nearest_rank(values, 0.01) == 1.0


# ---------------------------------------------------------------------------
# maximum-likelihood fits


def test_rayleigh_fit_closed_form():
    rng = np.random.default_rng(16)
    x = rng.rayleigh(scale=1.0, size=10_000)
    fit = fit_family("rayleigh", x)
    assert fit.params["sigma"] == pytest.approx(1.0, abs=0.02)
    assert fit.params["sigma"] == pytest.approx(math.sqrt(np.mean(x**2) / 2), abs=1e-12)


def test_nakagami_fit_recovers_severe_fading():
    rng = np.random.default_rng(17)
    x = sample_envelope(_fit("nakagami", mu=0.64, omega=32.27), 10_000, rng)
    fit = fit_family("nakagami", x)
    assert fit.params["mu"] == pytest.approx(0.64, abs=0.05)
    assert fit.params["omega"] == pytest.approx(32.27, abs=1.0)


def test_nakagami_fit_on_rayleigh_data_gives_unit_shape():
    rng = np.random.default_rng(18)
    x = rng.rayleigh(scale=2.0, size=10_000)
    fit = fit_family("nakagami", x)
    assert fit.params["mu"] == pytest.approx(1.0, abs=0.05)


def test_weibull_fit_recovery():
    rng = np.random.default_rng(19)
    x = 2.5 * rng.weibull(1.7, size=10_000)
    fit = fit_family("weibull", x)
    assert fit.params["shape"] == pytest.approx(1.7, abs=0.05)
    assert fit.params["scale"] == pytest.approx(2.5, abs=0.05)


def test_rician_fit_recovery():
    rng = np.random.default_rng(20)
    x = sample_envelope(_fit("rician", k_factor=5.0, sigma=1.0), 20_000, rng)
    fit = fit_family("rician", x)
    assert fit.params["k_factor"] == pytest.approx(5.0, abs=0.35)
    assert fit.params["sigma"] == pytest.approx(1.0, abs=0.03)


def test_log_logistic_fit_recovery():
    rng = np.random.default_rng(21)
    x = sample_envelope(_fit("log-logistic", alpha=2.0, beta=4.0), 20_000, rng)
    fit = fit_family("log-logistic", x)
    assert fit.params["alpha"] == pytest.approx(2.0, abs=0.05)
    assert fit.params["beta"] == pytest.approx(4.0, abs=0.1)


@pytest.mark.parametrize(
    "family,maker,scipy_fit",
    [
        (
            "nakagami",
            lambda rng: sample_envelope(_fit("nakagami", mu=0.8, omega=4.0), 4000, rng),
            lambda x: stats.nakagami.fit(x, floc=0),
        ),
        (
            "weibull",
            lambda rng: 1.5 * rng.weibull(2.2, size=4000),
            lambda x: stats.weibull_min.fit(x, floc=0),
        ),
        (
            "log-logistic",
            lambda rng: sample_envelope(_fit("log-logistic", alpha=1.5, beta=3.0), 4000, rng),
            lambda x: stats.fisk.fit(x, floc=0),
        ),
    ],
)
def test_fits_agree_with_scipy_oracle(family, maker, scipy_fit):
    rng = np.random.default_rng(22)
    x = maker(rng)
    mine = fit_family(family, x)
    theirs = scipy_fit(x)
    if family == "nakagami":
        assert mine.params["mu"] == pytest.approx(theirs[0], rel=0.02)
        assert mine.params["omega"] == pytest.approx(theirs[2] ** 2, rel=0.02)
    elif family == "weibull":
        assert mine.params["shape"] == pytest.approx(theirs[0], rel=0.02)
        assert mine.params["scale"] == pytest.approx(theirs[2], rel=0.02)
    else:
        assert mine.params["beta"] == pytest.approx(theirs[0], rel=0.02)
        assert mine.params["alpha"] == pytest.approx(theirs[2], rel=0.02)


def test_rician_fit_agrees_with_scipy_on_strong_los():
    rng = np.random.default_rng(23)
    x = sample_envelope(_fit("rician", k_factor=4.0, sigma=0.8), 4000, rng)
    mine = fit_family("rician", x)
    b, _, scale = stats.rice.fit(x, floc=0)
    assert mine.params["sigma"] == pytest.approx(scale, rel=0.03)
    assert mine.params["k_factor"] == pytest.approx(b**2 / 2.0, rel=0.10)


def test_fit_refit_reproducibility():
    rng = np.random.default_rng(24)
    x = sample_envelope(_fit("nakagami", mu=0.7, omega=3.0), 3000, rng)
    for family in Family:
        a = fit_family(family, x)
        b = fit_family(family, x.copy())
        assert a.params == b.params


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_family("rayleigh", [])
    with pytest.raises(ValueError):
        fit_family("rayleigh", [1.0, -2.0])
    with pytest.raises(ValueError):
        fit_family("rayleigh", [0.0, 1.0])
    with pytest.raises(DegenerateDataError):
        fit_family("nakagami", [2.0] * 50)


def test_local_optimality_of_every_family():
    rng = np.random.default_rng(25)
    x = sample_envelope(_fit("nakagami", mu=0.9, omega=2.5), 4000, rng)
    for family in Family:
        fit = fit_family(family, x)
        base = fit.log_likelihood
        perturb_rng = np.random.default_rng(26)
        for _ in range(100):
            jitter = {
                key: value * float(perturb_rng.uniform(0.97, 1.03))
                for key, value in fit.params.items()
            }
            if family is Family.RICIAN and fit.params["k_factor"] == 0.0:
                jitter["k_factor"] = float(perturb_rng.uniform(0.0, 0.05))
            try:
                contender = log_likelihood(family, jitter, x)
            except ValueError:
                continue
            assert contender <= base + 1e-7 * abs(base)


def test_nakagami_unit_shape_matches_rayleigh_density():
    sigma = 1.3
    grid = np.linspace(0.01, 6.0, 500)
    rayleigh = pdf(Family.RAYLEIGH, {"sigma": sigma}, grid)
    nakagami = pdf(Family.NAKAGAMI, {"mu": 1.0, "omega": 2 * sigma**2}, grid)
    assert np.max(np.abs(rayleigh - nakagami)) < 1e-12


# ---------------------------------------------------------------------------
# model selection


def test_best_fit_selects_nakagami_on_severe_data():
    rng = np.random.default_rng(27)
    x = sample_envelope(_fit("nakagami", mu=0.64, omega=32.27), 5000, rng)
    assert best_fit(x).family is Family.NAKAGAMI


def test_rician_on_rayleigh_collapses_to_zero_k():
    rng = np.random.default_rng(28)
    x = rng.rayleigh(scale=1.0, size=20_000)
    rice = fit_family("rician", x)
    ray = fit_family("rayleigh", x)
    assert rice.params["k_factor"] < 0.1
    assert abs(rice.log_likelihood - ray.log_likelihood) <= 1e-3 * abs(ray.log_likelihood)


def test_best_fit_rejects_constant_samples():
    with pytest.raises(DegenerateDataError):
        best_fit([3.0] * 200)


def test_severity_flag():
    rng = np.random.default_rng(29)
    severe = sample_envelope(_fit("nakagami", mu=0.64, omega=32.27), 8000, rng)
    assert is_worse_than_rayleigh(severe)
    benign = sample_envelope(_fit("rician", k_factor=5.0, sigma=1.0), 8000, rng)
    assert not is_worse_than_rayleigh(benign)


# ---------------------------------------------------------------------------
# samplers


def test_nakagami_unit_shape_sampler_matches_rayleigh():
    rng = np.random.default_rng(30)
    a = sample_envelope(_fit("nakagami", mu=1.0, omega=2.0), 100_000, rng)
    b = sample_envelope(_fit("rayleigh", sigma=1.0), 100_000, rng)
    statistic = stats.ks_2samp(a, b).statistic
    assert statistic < 0.02


def test_sampler_seed_determinism():
    fit = _fit("nakagami", mu=0.64, omega=32.27)
    a = sample_envelope(fit, 1000, np.random.default_rng(55))
    b = sample_envelope(fit, 1000, np.random.default_rng(55))
    assert np.array_equal(a, b)


def test_sample_then_fit_round_trip():
    rng = np.random.default_rng(31)
    x = sample_envelope(_fit("nakagami", mu=0.64, omega=32.27), 100_000, rng)
    fit = fit_family("nakagami", x)
    assert fit.params["mu"] == pytest.approx(0.64, abs=0.03)
    assert fit.params["omega"] == pytest.approx(32.27, abs=0.6)


def test_nakagami_second_moment_identity():
    rng = np.random.default_rng(32)
    x = sample_envelope(_fit("nakagami", mu=0.64, omega=32.27), 100_000, rng)
    assert np.mean(x**2) == pytest.approx(32.27, rel=0.01)


@pytest.mark.parametrize(
    "family,params",
    [
        ("rayleigh", {"sigma": 1.4}),
        ("nakagami", {"mu": 0.64, "omega": 32.27}),
        ("weibull", {"shape": 1.8, "scale": 2.2}),
        ("rician", {"k_factor": 3.0, "sigma": 0.9}),
        ("log-logistic", {"alpha": 1.7, "beta": 5.0}),
    ],
)
def test_family_centers_match_monte_carlo(family, params):
    rng = np.random.default_rng(33)
    fit = _fit(family, **params)
    x = sample_envelope(fit, 200_000, rng)
    assert family_median(fit.family, params) == pytest.approx(
        float(np.median(x)), rel=0.02
    )
    assert family_geometric_mean(fit.family, params) == pytest.approx(
        float(np.exp(np.mean(np.log(x)))), rel=0.02
    )


def test_fading_fit_serialization():
    fit = _fit("nakagami", mu=0.64, omega=32.27)
    clone = FadingFit.from_dict(fit.to_dict())
    assert clone.family == fit.family
    assert clone.params == fit.params
    minimal = FadingFit.from_dict({"family": "rayleigh", "params": {"sigma": 1.0}})
    assert minimal.params["sigma"] == 1.0
