"""Early estimate of a post's final comment count.

After ``tau`` minutes a post has ``n_obs`` comments.  A log-normal fitted to
those early intervals, right-truncated at ``tau``, gives the share
``F(tau)`` of all comments expected by then, and the estimate is
``n_obs / F(tau)``.  Early intervals say little about the spread of the
full distribution, so the log-scale ``sigma`` carries a Gaussian prior
centred on the typical ``sigma`` of the corpus' other posts.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import distributions as dist
from .errors import FitError, NoActivityError
from .intervals import ZERO_CLAMP

MIN_EARLY = 5
FREE_SIGMA_MIN = 20  # below this many early comments sigma is fixed at the prior
PRIOR_MIN_COMMENTS = 20
DEFAULT_PRIOR_SIGMA = math.log(4.5)
DEFAULT_PRIOR_WIDTH = 0.1
METHOD_NOTE = ("N = n_obs / F(tau); F is a log-normal fitted to the intervals up to tau "
               "(right-truncated likelihood, Gaussian prior on sigma)")


@dataclass(frozen=True)
class Forecast:
    post_id: str | None
    tau: float
    n_obs: int
    estimate: float
    low: float
    high: float
    model: dist.LogNormal
    mass_observed: float
    prior_sigma: float
    sigma_fixed: bool
    n_boot: int
    level: float
    method: str = METHOD_NOTE


def forecast_total(n_obs, model, tau):
    """``n_obs / F(tau)``, read at the upper end of minute bin ``tau``."""
    mass = float(model.cdf(tau + 0.5))
    if not mass > 0:
        raise FitError("fitted model puts no mass before the horizon")
    return n_obs / mass


def _fit_early(t, tau, prior_sigma, prior_width, start=None):
    """MAP log-normal for intervals observed only up to ``tau``."""
    y = np.log(t)
    n = y.size
    log_edge = math.log(tau + 0.5)
    inv_root2 = 1.0 / math.sqrt(2.0)

    def nll(mu, sigma):
        z = (y - mu) / sigma
        log_f = -0.5 * float(z @ z) - n * math.log(sigma)
        mass = 0.5 * float(dist.erfc(-(log_edge - mu) / sigma * inv_root2))
        if not mass > 0:
            return np.inf
        return -log_f + n * math.log(mass) + 0.5 * ((sigma - prior_sigma) / prior_width) ** 2

    mu0 = float(y.mean()) if start is None else start[0]
    if n < FREE_SIGMA_MIN:
        res = minimize_scalar(lambda m: nll(m, prior_sigma), bracket=(mu0, mu0 + 1.0))
        return dist.LogNormal(float(res.x), prior_sigma)
    s0 = prior_sigma if start is None else start[1]

    def objective(p):
        if not -10 < p[1] < 5:
            return np.inf
        return nll(p[0], math.exp(p[1]))

    res = minimize(objective, [mu0, math.log(s0)], method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-8, "maxfev": 4000})
    if not math.isfinite(res.fun):
        raise FitError("early-interval fit failed")
    return dist.LogNormal(float(res.x[0]), math.exp(res.x[1]))


def early_intervals(corpus, post_id, tau):
    post = corpus.post(post_id)
    lags = np.array([c.ts - post.ts for c in corpus.comments_by_post[post_id]], dtype=float)
    lags = lags[lags <= tau]
    return np.where(lags == 0, ZERO_CLAMP, lags)


def prior_sigma_from_corpus(corpus, exclude=None, min_comments=PRIOR_MIN_COMMENTS):
    """Median log-normal ``sigma`` over posts with at least ``min_comments``."""
    sigmas = []
    for pid, comments in corpus.comments_by_post.items():
        if pid == exclude or len(comments) < min_comments:
            continue
        post_ts = corpus.posts[pid].ts
        y = np.log(np.maximum([c.ts - post_ts for c in comments], ZERO_CLAMP))
        if y.std() > 0:
            sigmas.append(float(y.std()))
    return float(np.median(sigmas)) if sigmas else DEFAULT_PRIOR_SIGMA


def forecast_intervals(t, tau, prior_sigma=DEFAULT_PRIOR_SIGMA, prior_width=DEFAULT_PRIOR_WIDTH,
                       n_boot=200, level=0.9, seed=0, post_id=None):
    """Forecast from the early intervals ``t`` (all ``<= tau``)."""
    t = np.asarray(t, dtype=float)
    if not tau > 0:
        raise ValueError("tau must be positive")
    if np.any(t > tau) or np.any(t <= 0):
        raise ValueError("early intervals must lie in (0, tau]")
    if t.size < MIN_EARLY:
        raise NoActivityError(
            f"only {t.size} comments within tau={tau:g} min; at least {MIN_EARLY} are needed, "
            "try a larger tau")
    model = _fit_early(t, tau, prior_sigma, prior_width)
    estimate = forecast_total(t.size, model, tau)
    low = high = estimate
    if n_boot > 0:
        rng = np.random.default_rng(seed)
        boots = np.empty(n_boot)
        for i in range(n_boot):
            resample = rng.choice(t, size=t.size, replace=True)
            fit = _fit_early(resample, tau, prior_sigma, prior_width, start=(model.mu, model.sigma))
            boots[i] = forecast_total(t.size, fit, tau)
        alpha = (1.0 - level) / 2.0
        low, high = (float(v) for v in np.quantile(boots, [alpha, 1.0 - alpha]))
    return Forecast(post_id, float(tau), int(t.size), float(estimate), low, high, model,
                    float(model.cdf(tau + 0.5)), float(prior_sigma),
                    t.size < FREE_SIGMA_MIN, int(n_boot), float(level))


def forecast_post(corpus, post_id, tau, prior_sigma=None, prior_width=DEFAULT_PRIOR_WIDTH,
                  n_boot=200, level=0.9, seed=0):
    """Forecast the final comment count of ``post_id`` after ``tau`` minutes.

    The prior on ``sigma`` defaults to the corpus median over other posts.
    """
    t = early_intervals(corpus, post_id, tau)
    if prior_sigma is None:
        prior_sigma = prior_sigma_from_corpus(corpus, exclude=post_id)
    return forecast_intervals(t, tau, prior_sigma, prior_width, n_boot, level, seed, post_id)
