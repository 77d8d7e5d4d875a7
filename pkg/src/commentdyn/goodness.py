"""Fit-quality measures: the occupied-bin l1 error, KS distance and
bootstrap KS p-values, and error aggregation by publish hour."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import distributions as dist
from .errors import CommentDynError
from .intervals import IntervalSeries

BOOTSTRAP_NOTE = "semi-parametric bootstrap: refit on every replica sampled from the fitted model"
MAX_DISCARD_FRACTION = 0.10


@dataclass(frozen=True)
class EpsilonError:
    value: float
    T: int


def epsilon(f, g, bins):
    """Mean absolute difference of ``f`` and ``g`` over the bins ``bins``.

    ``f`` and ``g`` are callables evaluated on the array of bins.
    """
    bins = np.asarray(bins)
    if bins.size == 0:
        raise ValueError("epsilon needs at least one occupied bin")
    diff = np.abs(np.asarray(f(bins), dtype=float) - np.asarray(g(bins), dtype=float))
    return EpsilonError(float(diff.sum() / bins.size), int(bins.size))


def fit_epsilon(model, series):
    """Error of a continuous model cdf against a series' empirical cdf.

    The data cdf at minute bin ``t`` counts samples with ``floor(x) <= t``;
    the model is read at the bin centre ``t + 0.5``, the upper end of the
    values that round to ``t``.
    """
    return epsilon(lambda b: model.cdf(b + 0.5), series.binned_cdf, series.occupied_bins)


def _is_discrete(model):
    return isinstance(model, (dist.PowerLaw, dist.TruncatedLogNormal))


def ks_statistic(samples, model):
    """Sup distance between the sample ECDF and the model cdf.

    At each sample point both the ECDF value and its left limit are
    compared; for discrete models the left limit of the model cdf is used
    against the left limit of the ECDF.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("ks_statistic needs at least one sample")
    n = x.size
    ux, first = np.unique(x, return_index=True)
    upper = np.append(first[1:], n) / n
    lower = first / n
    if callable(model) and not hasattr(model, "cdf"):
        F = np.asarray(model(ux), dtype=float)
        F_left = F
    else:
        F = np.asarray(model.cdf(ux), dtype=float)
        if _is_discrete(model):
            F_left = np.where(ux > model.x_min, model.cdf(np.maximum(ux - 1, model.x_min)), 0.0)
        else:
            F_left = F
    return float(max(np.max(np.abs(upper - F)), np.max(np.abs(lower - F_left))))


@dataclass(frozen=True)
class KsResult:
    D: float
    p_value: float
    n_replicas: int
    n_discarded: int = 0
    flagged: bool = False
    method: str = BOOTSTRAP_NOTE


FAMILIES = ("ln", "dln", "powerlaw", "truncated_ln")


def fit_family(family, samples, x_min=1, seed=None, start=None):
    """Fit ``family`` and return the bare model.

    ``start`` is an optional model of the same family used to initialise
    iterative fits.
    """
    from . import fitting

    if family == "ln":
        return fitting.fit_ln(IntervalSeries(samples)).model
    if family == "dln":
        cfg = fitting.EMConfig(seed=0 if seed is None else seed)
        return fitting.fit_dln(IntervalSeries(samples), cfg, with_epsilon=False).model
    if family == "powerlaw":
        return fitting.fit_powerlaw_mle(samples, x_min).model
    if family == "truncated_ln":
        init = (start.mu, start.sigma) if start is not None else None
        return fitting.fit_truncated_ln(samples, x_min, start=init).model
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _quantized(samples):
    x = np.asarray(samples, dtype=float)
    return bool(np.all((x == np.floor(x)) | (x == 0.5)))


def _requantize(values):
    r = np.rint(values)
    return np.where(r == 0, 0.5, r)


def _replica(args):
    family, model, n, x_min, quantize, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    try:
        data = model.sample(n, rng)
        if quantize:
            data = _requantize(data)
        refit = fit_family(family, data, x_min, seed=int(seed_seq.generate_state(1)[0]), start=model)
        return ks_statistic(data, refit)
    except (CommentDynError, ValueError, FloatingPointError):
        return None


def ks_test_montecarlo(samples, family, x_min=1, n_replicas=1000, seed=0, workers=1):
    """Bootstrap p-value of the KS distance for a family fitted to ``samples``.

    Every replica draws ``len(samples)`` points from the fitted model,
    refits, and records its own KS distance.  Replica ``i`` uses child ``i``
    of ``SeedSequence(seed)``, so the result does not depend on ``workers``.
    Integer-valued continuous data are compared against replicas rounded the
    same way.
    """
    if n_replicas < 1:
        raise ValueError("n_replicas must be at least 1")
    samples = np.asarray(samples, dtype=float)
    model = fit_family(family, samples, x_min, seed=seed)
    d_obs = ks_statistic(samples, model)
    quantize = family in ("ln", "dln") and _quantized(samples)
    children = np.random.SeedSequence(seed).spawn(n_replicas)
    jobs = [(family, model, samples.size, x_min, quantize, child) for child in children]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            d_rep = list(pool.map(_replica, jobs, chunksize=max(1, n_replicas // (4 * workers))))
    else:
        d_rep = [_replica(job) for job in jobs]
    kept = np.array([d for d in d_rep if d is not None])
    discarded = n_replicas - kept.size
    p = float(np.mean(kept >= d_obs)) if kept.size else float("nan")
    return KsResult(
        D=d_obs,
        p_value=p,
        n_replicas=n_replicas,
        n_discarded=discarded,
        flagged=discarded > MAX_DISCARD_FRACTION * n_replicas,
    )


@dataclass(frozen=True)
class HourStats:
    hour: int
    mean: float
    median: float
    count: int


def publish_hour(ts):
    return int(ts // 60 % 24)


def error_by_publish_hour(corpus, reports):
    """Mean and median error per publish hour; hours without posts are absent.

    ``reports`` maps post id to anything with an ``epsilon`` attribute.
    """
    buckets = {}
    for post_id, report in reports.items():
        eps = getattr(report, "epsilon", report)
        if eps is None or not np.isfinite(eps):
            continue
        buckets.setdefault(publish_hour(corpus.post(post_id).ts), []).append(float(eps))
    return {
        h: HourStats(h, float(np.mean(v)), float(np.median(v)), len(v))
        for h, v in sorted(buckets.items())
    }


def hourly_spread(by_hour):
    means = [s.mean for s in by_hour.values()]
    return max(means) - min(means) if means else float("nan")
