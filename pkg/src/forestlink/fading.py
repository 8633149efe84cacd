"""Small-scale fading statistics: empirical CDFs, fade depth, and
maximum-likelihood fits of five standard envelope families.

Fits run on the linear-scale envelope (strictly positive values); fade-depth
summaries run on dB magnitudes.  Iterative estimators stop when the relative
parameter change drops below 1e-8 or after 500 iterations, whichever comes
first, and report the last iterate if they had to stop early.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

REL_TOL = 1e-8
MAX_ITER = 500

# Nakagami shape below this is rejected outright; values below 0.5 are kept
# but flagged, since the classical validity range starts at one half.
MU_FLOOR = 0.1
MU_CLASSICAL_FLOOR = 0.5


class Family(str, enum.Enum):
    RAYLEIGH = "rayleigh"
    NAKAGAMI = "nakagami"
    WEIBULL = "weibull"
    RICIAN = "rician"
    LOG_LOGISTIC = "log-logistic"


# Tie-break order for equal log-likelihoods: fewer parameters first, then
# this fixed precedence.
_SELECTION_ORDER = {
    Family.RAYLEIGH: 0,
    Family.NAKAGAMI: 1,
    Family.WEIBULL: 2,
    Family.RICIAN: 3,
    Family.LOG_LOGISTIC: 4,
}

_PARAM_COUNT = {
    Family.RAYLEIGH: 1,
    Family.NAKAGAMI: 2,
    Family.WEIBULL: 2,
    Family.RICIAN: 2,
    Family.LOG_LOGISTIC: 2,
}


class DegenerateDataError(ValueError):
    """Raised when the input has no usable statistical spread."""


@dataclass(frozen=True)
class FadingFit:
    """Fitted family, parameters, and the log-likelihood it achieved."""

    family: Family
    params: dict
    log_likelihood: float
    sample_count: int
    notes: tuple = ()

    def __post_init__(self):
        if not math.isfinite(self.log_likelihood):
            raise ValueError("log-likelihood must be finite")
        _validate_params(self.family, self.params)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": dict(self.params),
            "log_likelihood": self.log_likelihood,
            "n": self.sample_count,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FadingFit":
        # log_likelihood/n default to zero so hand-written generator configs
        # stay minimal: {"family": ..., "params": {...}}
        return cls(
            family=Family(data["family"]),
            params={k: float(v) for k, v in data["params"].items()},
            log_likelihood=float(data.get("log_likelihood", 0.0)),
            sample_count=int(data.get("n", 0)),
            notes=tuple(data.get("notes", ())),
        )


def _validate_params(family: Family, params: dict) -> None:
    def positive(key):
        if params[key] <= 0 or not math.isfinite(params[key]):
            raise ValueError(f"{family.value} parameter {key} must be positive and finite")

    if family is Family.RAYLEIGH:
        positive("sigma")
    elif family is Family.NAKAGAMI:
        positive("mu")
        positive("omega")
        if params["mu"] < MU_FLOOR:
            raise ValueError(f"nakagami mu below the accepted floor {MU_FLOOR}")
    elif family is Family.WEIBULL:
        positive("shape")
        positive("scale")
    elif family is Family.RICIAN:
        positive("sigma")
        if params["k_factor"] < 0 or not math.isfinite(params["k_factor"]):
            raise ValueError("rician k_factor must be finite and non-negative")
    elif family is Family.LOG_LOGISTIC:
        positive("alpha")
        positive("beta")
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown family {family!r}")


def _check_envelope(samples, require_spread: bool = False) -> np.ndarray:
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("empty sample set")
    if not np.all(np.isfinite(x)):
        raise ValueError("envelope samples must be finite")
    if np.any(x <= 0):
        raise ValueError("envelope samples must be strictly positive")
    if require_spread and np.min(x) == np.max(x):
        raise DegenerateDataError("zero-variance input is not fittable")
    return x


# ---------------------------------------------------------------------------
# densities and likelihoods


def log_pdf(family: Family, params: dict, x) -> np.ndarray:
    """Elementwise log-density; -inf outside the support."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    ok = x > 0
    xs = x[ok]
    if family is Family.RAYLEIGH:
        s2 = params["sigma"] ** 2
        out[ok] = np.log(xs) - math.log(s2) - xs**2 / (2.0 * s2)
    elif family is Family.NAKAGAMI:
        mu, omega = params["mu"], params["omega"]
        out[ok] = (
            math.log(2.0)
            + mu * math.log(mu / omega)
            - special.gammaln(mu)
            + (2.0 * mu - 1.0) * np.log(xs)
            - mu * xs**2 / omega
        )
    elif family is Family.WEIBULL:
        k, lam = params["shape"], params["scale"]
        z = xs / lam
        out[ok] = math.log(k / lam) + (k - 1.0) * np.log(z) - z**k
    elif family is Family.RICIAN:
        sigma, k_factor = params["sigma"], params["k_factor"]
        s2 = sigma**2
        nu = sigma * math.sqrt(2.0 * k_factor)
        z = xs * nu / s2
        # log I0 computed from the exponentially scaled Bessel for stability
        out[ok] = (
            np.log(xs)
            - math.log(s2)
            - (xs**2 + nu**2) / (2.0 * s2)
            + np.log(special.i0e(z))
            + z
        )
    elif family is Family.LOG_LOGISTIC:
        alpha, beta = params["alpha"], params["beta"]
        z = np.log(xs / alpha) * beta
        # -2*log(1+e^z) written via logaddexp to survive large |z|
        out[ok] = math.log(beta) - np.log(xs) + z - 2.0 * np.logaddexp(0.0, z)
    else:  # pragma: no cover
        raise ValueError(f"unknown family {family!r}")
    return out


def pdf(family: Family, params: dict, x) -> np.ndarray:
    return np.exp(log_pdf(family, params, x))


def log_likelihood(family: Family, params: dict, samples) -> float:
    x = _check_envelope(samples)
    return float(np.sum(log_pdf(family, params, x)))


# ---------------------------------------------------------------------------
# per-family maximum-likelihood fits


def _fit_rayleigh(x: np.ndarray) -> tuple[dict, tuple]:
    # closed form: sigma^2 = mean(x^2)/2
    sigma = math.sqrt(float(np.mean(x**2)) / 2.0)
    return {"sigma": sigma}, ()


def _fit_nakagami(x: np.ndarray) -> tuple[dict, tuple]:
    omega = float(np.mean(x**2))
    delta = math.log(omega) - float(np.mean(np.log(x**2)))
    if delta <= 0:
        raise DegenerateDataError("samples have no spread in log power")
    # gamma-shape starting point, then Newton on log(mu) - digamma(mu) = delta
    mu = (3.0 - delta + math.sqrt((delta - 3.0) ** 2 + 24.0 * delta)) / (12.0 * delta)
    notes = []
    for iteration in range(MAX_ITER):
        f = math.log(mu) - special.digamma(mu) - delta
        fp = 1.0 / mu - special.polygamma(1, mu)
        step = f / fp
        new_mu = mu - step
        if new_mu <= 0:
            new_mu = mu / 2.0
        if abs(new_mu - mu) <= REL_TOL * abs(new_mu):
            mu = new_mu
            break
        mu = new_mu
    else:
        notes.append(f"nakagami shape solve stopped at {MAX_ITER} iterations (mu={mu!r})")
    if mu < MU_FLOOR:
        mu = MU_FLOOR
        notes.append(f"nakagami mu clamped to the accepted floor {MU_FLOOR}")
    elif mu < MU_CLASSICAL_FLOOR:
        notes.append("nakagami mu below 0.5: outside the classical validity range")
    return {"mu": float(mu), "omega": omega}, tuple(notes)


def _fit_weibull(x: np.ndarray) -> tuple[dict, tuple]:
    # Newton on the profile equation for the shape; scale follows in closed form.
    ln_x = np.log(x)
    mean_ln = float(np.mean(ln_x))
    k = 1.0
    notes = []
    for iteration in range(MAX_ITER):
        xk = x**k
        xk_ln = xk * ln_x
        sum_xk = float(np.sum(xk))
        sum_xk_ln = float(np.sum(xk_ln))
        f = sum_xk_ln / sum_xk - mean_ln - 1.0 / k
        fp = (
            float(np.sum(xk_ln * ln_x)) / sum_xk
            - (sum_xk_ln / sum_xk) ** 2
            + 1.0 / (k * k)
        )
        new_k = k - f / fp
        if not math.isfinite(new_k) or new_k <= 0:
            new_k = k / 2.0
        if abs(new_k - k) <= REL_TOL * abs(new_k):
            k = new_k
            break
        k = new_k
    else:
        notes.append(f"weibull shape solve stopped at {MAX_ITER} iterations (k={k!r})")
    lam = float(np.mean(x**k)) ** (1.0 / k)
    return {"shape": float(k), "scale": float(lam)}, tuple(notes)


def _rician_moment_k(x: np.ndarray) -> float:
    # mean/variance of the squared envelope pin the K factor:
    # E[x^4]/E[x^2]^2 - 1 = (1+2K)/(1+K)^2
    m2 = float(np.mean(x**2))
    r = float(np.mean(x**4)) / (m2 * m2) - 1.0
    if r >= 1.0 or r <= 0.0:
        return 0.0
    return max(((1.0 - r) + math.sqrt(1.0 - r)) / r, 0.0)


def _fit_rician(x: np.ndarray) -> tuple[dict, tuple]:
    """Moment-seeded fixed-point iteration for the Rician pair (nu, sigma).

    The location update averages x weighted by the Bessel ratio I1/I0, the
    classic latent-phase scheme.  A vanishing K sits on a likelihood ridge
    shared with the Rayleigh family, so when the iterate's gain over the
    nested K=0 fit is negligible the fit collapses onto K=0.
    """
    m2 = float(np.mean(x**2))
    k0 = _rician_moment_k(x)
    sigma2 = m2 / (2.0 * (1.0 + k0))
    nu = math.sqrt(2.0 * k0 * sigma2)
    notes = []
    converged = k0 == 0.0
    for iteration in range(MAX_ITER):
        if nu == 0.0:
            converged = True
            break
        z = x * (nu / sigma2)
        ratio = special.i1e(z) / special.i0e(z)
        new_nu = float(np.mean(x * ratio))
        new_sigma2 = max(m2 / 2.0 - new_nu**2 / 2.0, 1e-300)
        if abs(new_nu - nu) <= REL_TOL * max(abs(new_nu), 1e-12) and abs(
            new_sigma2 - sigma2
        ) <= REL_TOL * new_sigma2:
            nu, sigma2 = new_nu, new_sigma2
            converged = True
            break
        nu, sigma2 = new_nu, new_sigma2
    if not converged:
        notes.append(f"rician fixed point stopped at {MAX_ITER} iterations (nu={nu!r})")
    params = {"k_factor": nu**2 / (2.0 * sigma2), "sigma": math.sqrt(sigma2)}
    # prefer the nested K=0 solution when the ridge gain is negligible
    null_params = {"k_factor": 0.0, "sigma": math.sqrt(m2 / 2.0)}
    ll = float(np.sum(log_pdf(Family.RICIAN, params, x)))
    ll_null = float(np.sum(log_pdf(Family.RICIAN, null_params, x)))
    if ll - ll_null <= 1e-6 * max(1.0, abs(ll_null)):
        return null_params, tuple(notes)
    return params, tuple(notes)


def _fit_log_logistic(x: np.ndarray) -> tuple[dict, tuple]:
    """Newton iteration for the logistic law of log-envelope values."""
    y = np.log(x)
    mu = float(np.mean(y))
    s = max(float(np.std(y)) * math.sqrt(3.0) / math.pi, 1e-12)
    n = y.size
    notes = []

    def negloglik(mu_, s_):
        z = (y - mu_) / s_
        return float(np.sum(z + 2.0 * np.logaddexp(0.0, -z) + math.log(s_)))

    current = negloglik(mu, s)
    converged = False
    for iteration in range(MAX_ITER):
        z = (y - mu) / s
        p = special.expit(z)
        w = p * (1.0 - p)
        g_mu = float(np.sum(2.0 * p - 1.0)) / s
        g_s = (-n + float(np.sum(z * (2.0 * p - 1.0)))) / s
        h_mm = -2.0 * float(np.sum(w)) / (s * s)
        h_ms = -(float(np.sum(2.0 * p - 1.0)) + 2.0 * float(np.sum(w * z))) / (s * s)
        h_ss = -(
            -n + 2.0 * float(np.sum(z * (2.0 * p - 1.0))) + 2.0 * float(np.sum(w * z * z))
        ) / (s * s)
        det = h_mm * h_ss - h_ms * h_ms
        if not math.isfinite(det) or det == 0.0:
            break
        step_mu = (h_ss * g_mu - h_ms * g_s) / det
        step_s = (h_mm * g_s - h_ms * g_mu) / det
        # damped Newton: halve until the objective does not get worse
        scale_step = 1.0
        for _ in range(40):
            new_mu = mu - scale_step * step_mu
            new_s = s - scale_step * step_s
            if new_s > 0:
                candidate = negloglik(new_mu, new_s)
                if candidate <= current + 1e-12:
                    break
            scale_step /= 2.0
        else:
            converged = True
            break
        moved = max(abs(new_mu - mu), abs(new_s - s))
        mu, s, current = new_mu, new_s, candidate
        if moved <= REL_TOL * max(abs(mu), abs(s), 1e-12):
            converged = True
            break
    if not converged:
        notes.append(f"log-logistic solve stopped at {MAX_ITER} iterations")
    return {"alpha": math.exp(mu), "beta": 1.0 / s}, tuple(notes)


_FITTERS = {
    Family.RAYLEIGH: _fit_rayleigh,
    Family.NAKAGAMI: _fit_nakagami,
    Family.WEIBULL: _fit_weibull,
    Family.RICIAN: _fit_rician,
    Family.LOG_LOGISTIC: _fit_log_logistic,
}


def fit_family(family: Family | str, samples) -> FadingFit:
    """Maximum-likelihood fit of one family on strictly positive envelope values."""
    family = Family(family)
    x = _check_envelope(samples, require_spread=True)
    params, notes = _FITTERS[family](x)
    ll = float(np.sum(log_pdf(family, params, x)))
    return FadingFit(
        family=family,
        params=params,
        log_likelihood=ll,
        sample_count=int(x.size),
        notes=notes,
    )


def best_fit(samples) -> FadingFit:
    """Fit all five families and keep the highest log-likelihood.

    Ties go to the family with fewer parameters, then to the fixed selection
    order.  Families whose fit fails are excluded and recorded on the winner.
    """
    x = _check_envelope(samples, require_spread=True)
    fits: list[FadingFit] = []
    failures: list[str] = []
    for family in Family:
        try:
            fits.append(fit_family(family, x))
        except DegenerateDataError:
            raise
        except (ValueError, FloatingPointError) as exc:
            failures.append(f"{family.value}: {exc}")
    if not fits:
        raise DegenerateDataError("no fading family could be fitted")
    winner = min(
        fits,
        key=lambda f: (-f.log_likelihood, _PARAM_COUNT[f.family], _SELECTION_ORDER[f.family]),
    )
    if failures:
        winner = FadingFit(
            family=winner.family,
            params=winner.params,
            log_likelihood=winner.log_likelihood,
            sample_count=winner.sample_count,
            notes=winner.notes + tuple(f"excluded {msg}" for msg in failures),
        )
    return winner


def is_worse_than_rayleigh(samples) -> bool:
    """True when the Nakagami shape comes out below 1 (severe multipath)."""
    return fit_family(Family.NAKAGAMI, samples).params["mu"] < 1.0


# ---------------------------------------------------------------------------
# sampling


def sample_envelope(fit: FadingFit, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` independent envelope values from a fitted family."""
    if n < 1:
        raise ValueError("n must be at least 1")
    p = fit.params
    if fit.family is Family.RAYLEIGH:
        return rng.rayleigh(scale=p["sigma"], size=n)
    if fit.family is Family.NAKAGAMI:
        # squared envelope is gamma with shape mu and mean omega
        return np.sqrt(rng.gamma(shape=p["mu"], scale=p["omega"] / p["mu"], size=n))
    if fit.family is Family.WEIBULL:
        return p["scale"] * rng.weibull(p["shape"], size=n)
    if fit.family is Family.RICIAN:
        nu = p["sigma"] * math.sqrt(2.0 * p["k_factor"])
        i = nu + p["sigma"] * rng.standard_normal(n)
        q = p["sigma"] * rng.standard_normal(n)
        return np.hypot(i, q)
    if fit.family is Family.LOG_LOGISTIC:
        u = rng.random(n)
        return p["alpha"] * (u / (1.0 - u)) ** (1.0 / p["beta"])
    raise ValueError(f"unknown family {fit.family!r}")  # pragma: no cover


def family_median(family: Family, params: dict) -> float:
    """Median of a fitted envelope family."""
    family = Family(family)
    p = params
    if family is Family.RAYLEIGH:
        return p["sigma"] * math.sqrt(2.0 * math.log(2.0))
    if family is Family.NAKAGAMI:
        return math.sqrt(p["omega"] * special.gammaincinv(p["mu"], 0.5) / p["mu"])
    if family is Family.WEIBULL:
        return p["scale"] * math.log(2.0) ** (1.0 / p["shape"])
    if family is Family.RICIAN:
        from scipy import stats

        b = math.sqrt(2.0 * p["k_factor"])
        return float(stats.rice.median(b, scale=p["sigma"]))
    if family is Family.LOG_LOGISTIC:
        return p["alpha"]
    raise ValueError(f"unknown family {family!r}")  # pragma: no cover


def family_geometric_mean(family: Family, params: dict) -> float:
    """exp(E[ln envelope]) of a fitted family.

    Normalizing an envelope by this value makes its dB transform zero-mean,
    which keeps arithmetic dB averaging (the moving-window separation)
    unbiased.  Closed forms exist for all families except the Rician one,
    which is integrated numerically.
    """
    family = Family(family)
    p = params
    if family is Family.RAYLEIGH:
        # ln e^2 is ln(2 sigma^2) shifted by an exponential log-moment
        return p["sigma"] * math.sqrt(2.0) * math.exp(-np.euler_gamma / 2.0)
    if family is Family.NAKAGAMI:
        mu, omega = p["mu"], p["omega"]
        return math.sqrt(omega / mu) * math.exp(special.digamma(mu) / 2.0)
    if family is Family.WEIBULL:
        return p["scale"] * math.exp(-np.euler_gamma / p["shape"])
    if family is Family.RICIAN:
        from scipy import integrate, stats

        b = math.sqrt(2.0 * p["k_factor"])
        dist = stats.rice(b, scale=p["sigma"])
        value, _ = integrate.quad(
            lambda x: math.log(x) * dist.pdf(x), 0.0, dist.ppf(1.0 - 1e-12)
        )
        return math.exp(value)
    if family is Family.LOG_LOGISTIC:
        # log-envelope is symmetric, so geometric mean and median coincide
        return p["alpha"]
    raise ValueError(f"unknown family {family!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# empirical statistics


class EmpiricalCdf:
    """Right-continuous step CDF of a sample set."""

    def __init__(self, values):
        data = np.asarray(values, dtype=float).reshape(-1)
        if data.size == 0:
            raise ValueError("empty sample set")
        if np.any(np.isnan(data)):
            raise ValueError("sample set contains NaN")
        self._sorted = np.sort(data)
        self.support, counts = np.unique(self._sorted, return_counts=True)
        self.fractions = np.cumsum(counts) / data.size

    @property
    def sample_count(self) -> int:
        return self._sorted.size

    def __call__(self, x):
        """Fraction of samples <= x (scalar or array)."""
        pos = np.searchsorted(self._sorted, np.asarray(x, dtype=float), side="right")
        out = pos / self._sorted.size
        if out.ndim == 0:
            return float(out)
        return out


def empirical_cdf(values) -> EmpiricalCdf:
    return EmpiricalCdf(values)


def quantile_nearest_rank(values, p: float) -> float:
    """Nearest-rank quantile (no interpolation), reproducible across tooling."""
    if not 0.0 < p <= 1.0:
        raise ValueError("quantile level must be in (0, 1]")
    data = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if data.size == 0:
        raise ValueError("empty sample set")
    rank = max(math.ceil(p * data.size), 1)
    return float(data[rank - 1])


@dataclass(frozen=True)
class FadeDepthReport:
    """Spread of fading magnitudes between their median and 99 % levels."""

    level_50_db: float
    level_99_db: float
    depth_db: float
    max_fade_db: float

    def to_dict(self) -> dict:
        return {
            "level_50_db": self.level_50_db,
            "level_99_db": self.level_99_db,
            "fade_depth_db": self.depth_db,
            "max_fade_db": self.max_fade_db,
        }


def fade_depth(fading_magnitudes_db) -> FadeDepthReport:
    """Summarize fading magnitudes (dB) by their 50 %/99 % levels and maximum."""
    data = np.asarray(fading_magnitudes_db, dtype=float).reshape(-1)
    if data.size == 0:
        raise ValueError("empty sample set")
    if data.size < 100:
        warnings.warn(
            f"only {data.size} samples: the 99 % level is unreliable below 100",
            stacklevel=2,
        )
    level_50 = quantile_nearest_rank(data, 0.50)
    level_99 = quantile_nearest_rank(data, 0.99)
    return FadeDepthReport(
        level_50_db=level_50,
        level_99_db=level_99,
        depth_db=level_99 - level_50,
        max_fade_db=float(np.max(data)),
    )
