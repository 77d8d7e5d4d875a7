"""Maximum-likelihood fits for interval and count data, plus the log-log
regression that the MLE power-law exponent is contrasted with."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import distributions as dist
from .errors import FitError, NoActivityError
from .goodness import epsilon, fit_epsilon
from .intervals import IntervalSeries, empirical_cdf, pci_of_post

SIGMA_FLOOR = 1e-3
LOW_N = 5
DLN_MIN_SAMPLES = 10
EPS_BIN = 1e-3
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class DerivedStats:
    median: float
    sigma_g: float


def derived_stats(params):
    """Median and geometric standard deviation of a log-normal."""
    return DerivedStats(math.exp(params.mu), math.exp(params.sigma))


@dataclass
class FitReport:
    model: object
    log_likelihood: float
    epsilon: float | None
    n: int
    derived: DerivedStats | None = None
    iterations: int = 0
    converged: bool = True
    flags: tuple = ()
    trace: tuple = ()
    traces: tuple = ()
    ks: object = None

    @property
    def reliable(self):
        return self.converged and "degenerate" not in self.flags


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r: float
    n_points: int


@dataclass(frozen=True)
class EMConfig:
    tol: float = 1e-8
    max_iter: int = 500
    restarts: int = 5
    sigma_floor: float = SIGMA_FLOOR
    seed: int = 0
    nested_guard: bool = True


def _as_series(series):
    return series if isinstance(series, IntervalSeries) else IntervalSeries(series)


def fit_ln(series, allow_degenerate=False):
    """Closed-form MLE: mean and population standard deviation of log samples."""
    series = _as_series(series)
    y = np.log(series.samples)
    n = y.size
    flags = []
    if n < 2 and not allow_degenerate:
        raise FitError("log-normal fit needs at least 2 samples")
    mu = float(np.mean(y))
    sigma = float(np.std(y))
    if sigma <= 0.0:
        if not allow_degenerate:
            raise FitError("degenerate series: all samples identical")
        sigma = SIGMA_FLOOR
        flags.append("degenerate")
    if n < LOW_N:
        flags.append("low-n")
    model = dist.LogNormal(mu, sigma)
    return FitReport(
        model=model,
        log_likelihood=float(np.sum(model.logpdf(series.samples))),
        epsilon=fit_epsilon(model, series).value,
        n=n,
        derived=derived_stats(model),
        flags=tuple(flags),
    )


def _norm_logpdf(y, m, s):
    z = (y - m) / s
    return -0.5 * z * z - math.log(s) - _HALF_LOG_2PI


def _estep(y, theta):
    w, m1, s1, m2, s2 = theta
    with np.errstate(divide="ignore"):
        l1 = math.log(w) + _norm_logpdf(y, m1, s1) if w > 0 else np.full_like(y, -np.inf)
        l2 = math.log1p(-w) + _norm_logpdf(y, m2, s2) if w < 1 else np.full_like(y, -np.inf)
    lse = np.logaddexp(l1, l2)
    return float(lse.sum()), np.exp(l1 - lse)


def _mstep(y, r, floor):
    n1 = r.sum()
    n2 = y.size - n1
    if n1 <= 0 or n2 <= 0:
        return None
    m1 = float(r @ y / n1)
    m2 = float((1 - r) @ y / n2)
    s1 = math.sqrt(float(r @ (y - m1) ** 2 / n1))
    s2 = math.sqrt(float((1 - r) @ (y - m2) ** 2 / n2))
    if s1 < floor or s2 < floor:
        return None
    return (float(n1 / y.size), m1, s1, m2, s2)


def _em(y, theta, cfg):
    """Run EM from ``theta``; returns None if a component collapses."""
    ll, r = _estep(y, theta)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        new_theta = _mstep(y, r, cfg.sigma_floor)
        if new_theta is None:
            return None, trace
        theta = new_theta
        new_ll, r = _estep(y, theta)
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < cfg.tol:
            converged = True
            break
    return (theta, ll, it, converged), trace


def _initial_points(y, cfg):
    """Median split first, then randomised restarts."""
    ys = np.sort(y)
    half = ys.size // 2
    lo, hi = ys[:half], ys[half:]
    spread = float(np.std(y)) or 1.0
    points = [(0.5, float(lo.mean()), max(float(lo.std()), cfg.sigma_floor),
               float(hi.mean()), max(float(hi.std()), cfg.sigma_floor))]
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.restarts - 1):
        a, b = rng.choice(y, size=2, replace=False)
        points.append((float(rng.uniform(0.2, 0.8)), float(a), spread, float(b), spread))
    return points


def fit_dln(series, config=None, with_epsilon=True):
    """EM fit of a two-component mixture on log samples.

    The best of ``config.restarts`` EM runs is compared with the single
    log-normal MLE (a mixture whose components coincide), so the returned
    likelihood never falls below the single log-normal one.  With
    ``nested_guard`` the single log-normal is also returned when its cdf
    error is lower than the mixture's; such reports carry the
    ``nested-ln`` flag.
    """
    cfg = config or EMConfig()
    series = _as_series(series)
    if len(series) < DLN_MIN_SAMPLES:
        raise FitError(f"double log-normal fit needs at least {DLN_MIN_SAMPLES} samples")
    y = np.log(series.samples)
    runs = []
    traces = []
    for start in _initial_points(y, cfg):
        result, trace = _em(y, start, cfg)
        traces.append(tuple(trace))
        if result is not None:
            runs.append((result, tuple(trace)))
    if not runs:
        raise FitError("all EM restarts collapsed")
    (theta, ll, iters, converged), trace = max(runs, key=lambda run: run[0][1])
    flags = []
    collapsed = len(traces) - len(runs)
    if collapsed:
        flags.append(f"collapsed-restarts={collapsed}")

    single = dist.LogNormal(float(np.mean(y)), float(np.std(y)))
    single_ll = float(np.sum(_norm_logpdf(y, single.mu, single.sigma)))
    w, m1, s1, m2, s2 = theta
    model = dist.DoubleLogNormal(m1, s1, w, m2, s2).canonical()
    eps = fit_epsilon(model, series).value if with_epsilon else None
    use_nested = single.sigma >= cfg.sigma_floor and single_ll > ll
    if with_epsilon and cfg.nested_guard and not use_nested:
        single_eps = fit_epsilon(single, series).value
        use_nested = single_eps < eps
    if use_nested:
        model = dist.DoubleLogNormal.nested(single)
        ll, iters, converged, trace = single_ll, 0, True, (single_ll,)
        eps = fit_epsilon(model, series).value if with_epsilon else None
        flags.append("nested-ln")
    return FitReport(
        model=model,
        log_likelihood=ll - float(y.sum()),
        epsilon=eps,
        n=y.size,
        iterations=iters,
        converged=converged,
        flags=tuple(flags),
        trace=trace,
        traces=tuple(traces),
    )


def _counts(counts, x_min):
    x = np.asarray(list(counts.values()) if isinstance(counts, dict) else counts, dtype=float)
    if np.any(x != np.floor(x)):
        raise FitError("counts must be integers")
    x = x[x >= x_min]
    if x.size < 2:
        raise FitError(f"fewer than 2 counts >= x_min={x_min}")
    return x


def _count_epsilon(model, x):
    ecdf = empirical_cdf(x)
    return epsilon(model.cdf, ecdf, ecdf.support).value


def fit_powerlaw_mle(counts, x_min=1, max_iter=50):
    """Discrete power-law exponent: continuity-corrected estimator refined by
    Newton iterations on the exact likelihood."""
    if int(x_min) != x_min or x_min < 1:
        raise ValueError("x_min must be an integer >= 1")
    x = _counts(counts, x_min)
    n = x.size
    if np.all(x == x_min):
        raise FitError("all counts equal x_min: the exponent estimate diverges")
    s_log = float(np.sum(np.log(x)))
    gamma = 1.0 + n / float(np.sum(np.log(x / (x_min - 0.5))))

    def log_norm(g):
        return math.log(dist.hurwitz_zeta(g, float(x_min)))

    def loglik(g):
        return -g * s_log - n * log_norm(g)

    h = 1e-4
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        l0, lp, lm = log_norm(gamma), log_norm(gamma + h), log_norm(max(gamma - h, 1 + 1e-9))
        grad = -s_log - n * (lp - lm) / (2 * h)
        curv = -n * (lp - 2 * l0 + lm) / (h * h)
        step = -grad / curv if curv < 0 else math.copysign(0.1, grad)
        new = gamma + step
        while new <= 1.0 + 1e-9:
            step *= 0.5
            new = gamma + step
        gamma = new
        if abs(step) < 1e-10:
            converged = True
            break
    flags = ["sparse-tail"] if np.count_nonzero(x > x_min) < 10 else []
    model = dist.PowerLaw(gamma, int(x_min))
    return FitReport(
        model=model,
        log_likelihood=loglik(gamma),
        epsilon=_count_epsilon(model, x),
        n=n,
        iterations=it,
        converged=converged,
        flags=tuple(flags),
    )


def fit_powerlaw_regression(counts, log_bins=False, base=2.0):
    """Least-squares line through (ln x, ln frequency) of the count histogram.

    With ``log_bins`` the histogram uses geometric bins and density per unit
    count, placed at the bins' geometric centres.
    """
    x = np.asarray(list(counts.values()) if isinstance(counts, dict) else counts, dtype=float)
    values, freq = np.unique(x[x > 0], return_counts=True)
    if values.size < 3:
        raise FitError("regression needs at least 3 distinct count values")
    if log_bins:
        edges = base ** np.arange(0, math.ceil(math.log(values.max() + 1, base)) + 1)
        hist, _ = np.histogram(x, bins=edges)
        keep = hist > 0
        width = np.diff(edges)
        lx = np.log(np.sqrt(edges[:-1] * edges[1:]))[keep]
        ly = np.log(hist[keep] / (x.size * width[keep]))
        if lx.size < 3:
            raise FitError("regression needs at least 3 nonempty bins")
    else:
        lx = np.log(values)
        ly = np.log(freq / x.size)
    slope, intercept = np.polyfit(lx, ly, 1)
    r = float(np.corrcoef(lx, ly)[0, 1])
    return RegressionFit(float(slope), float(intercept), r, int(lx.size))


class _TruncatedLnLikelihood:
    """Log-likelihood of integer counts under the truncated log-normal.

    The half-integer edges of the observed values are fixed, so their logs
    and index maps are computed once per data set.
    """

    def __init__(self, x, x_min):
        values, self.mult = np.unique(x, return_counts=True)
        n = values.size
        edges, inv = np.unique(np.concatenate((values - 0.5, values + 0.5, [x_min - 0.5])),
                               return_inverse=True)
        self.log_edges = np.log(edges)
        self.lo, self.hi, self.norm = inv[:n], inv[n:2 * n], inv[-1]

    def __call__(self, mu, sigma):
        z = (self.log_edges - mu) / sigma
        tail = 0.5 * dist.erfc(np.abs(z) / math.sqrt(2.0))
        below = np.where(z < 0, tail, 1.0 - tail)
        above = np.where(z >= 0, tail, 1.0 - tail)
        lo, hi = self.lo, self.hi
        mass = np.where(z[lo] > 0, above[lo] - above[hi], below[hi] - below[lo])
        norm = above[self.norm]
        if not norm > 0:
            return -np.inf
        with np.errstate(divide="ignore"):
            return float(self.mult @ np.log(mass)) - self.mult.sum() * math.log(norm)


def fit_truncated_ln(counts, x_min=1, max_evals=4000, start=None):
    """Nelder-Mead MLE of the discretised truncated log-normal.

    Parameterised by (mu, log sigma) and started from the moments of the log
    counts unless ``start=(mu, sigma)`` is given; tolerance 1e-8 on the
    log-likelihood.
    """
    if int(x_min) != x_min or x_min < 1:
        raise ValueError("x_min must be an integer >= 1")
    x = _counts(counts, x_min)
    loglik = _TruncatedLnLikelihood(x, x_min)
    if start is None:
        ly = np.log(x)
        start = (float(ly.mean()), float(ly.std()) or 1.0)

    def nll(p):
        mu, log_sigma = p
        if not (-50 < log_sigma < 5 and abs(mu) < 1e3):
            return np.inf
        ll = loglik(mu, math.exp(log_sigma))
        return -ll if math.isfinite(ll) else np.inf

    res = minimize(nll, [start[0], math.log(start[1])], method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-8, "maxfev": max_evals})
    if not math.isfinite(res.fun):
        raise FitError("truncated log-normal likelihood is not finite at any tried point")
    mu, log_sigma = res.x
    try:
        model = dist.TruncatedLogNormal(float(mu), math.exp(log_sigma), int(x_min))
    except ValueError as exc:
        raise FitError(str(exc)) from None
    return FitReport(
        model=model,
        log_likelihood=-float(res.fun),
        epsilon=_count_epsilon(model, x),
        n=x.size,
        iterations=int(res.nfev),
        converged=bool(res.success),
        flags=() if res.success else ("not-converged",),
    )


@dataclass
class PostFits:
    """Per-post fits of one model over a corpus."""

    model: str
    reports: dict
    failures: dict = field(default_factory=dict)

    @property
    def epsilons(self):
        return np.array([r.epsilon for r in self.reports.values()], dtype=float)

    def fraction_below(self, threshold):
        eps = self.epsilons
        return float(np.mean(eps < threshold)) if eps.size else float("nan")

    def epsilon_histogram(self, bin_width=EPS_BIN):
        """(left edge, count) pairs for nonempty bins."""
        idx = np.floor(self.epsilons / bin_width + 1e-9).astype(np.int64)
        bins, counts = np.unique(idx, return_counts=True)
        return [(round(b * bin_width, 12), int(c)) for b, c in zip(bins, counts)]

    def epsilon_cdf(self):
        ecdf = empirical_cdf(self.epsilons) if self.epsilons.size else None
        return [] if ecdf is None else list(zip(ecdf.support.tolist(), ecdf.cum_prob.tolist()))


def _fit_one(args):
    post_id, samples, model, cfg = args
    series = IntervalSeries(samples, ("pci_post", post_id))
    ln = fit_ln(series, allow_degenerate=True)
    if model == "ln":
        return ln
    if len(series) < DLN_MIN_SAMPLES or "degenerate" in ln.flags:
        fallback = "low-n"
    else:
        try:
            return fit_dln(series, cfg)
        except FitError:
            fallback = "em-collapsed"
    nested = dist.DoubleLogNormal.nested(ln.model)
    return FitReport(model=nested, log_likelihood=ln.log_likelihood, epsilon=ln.epsilon,
                     n=ln.n, flags=(*ln.flags, fallback))


def fit_all_posts(corpus, model="ln", config=None, zero_policy="clamp", workers=1):
    """Fit every post that received comments; results ordered like ``corpus.posts``."""
    if model not in ("ln", "dln"):
        raise ValueError("model must be 'ln' or 'dln'")
    if len(corpus) == 0:
        raise NoActivityError("corpus is empty")
    cfg = config or EMConfig()
    jobs = []
    failures = {}
    for post_id, comments in corpus.comments_by_post.items():
        if not comments:
            continue
        try:
            series = pci_of_post(corpus, post_id, zero_policy)
        except NoActivityError as exc:
            failures[post_id] = str(exc)
            continue
        jobs.append((post_id, series.samples, model, cfg))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_fit_one(job) for job in jobs]
    reports = {job[0]: rep for job, rep in zip(jobs, results)}
    return PostFits(model, reports, failures)
