"""Plot-ready CSV tables for every analysis, plus the full report bundle.

Each table renders with ``#`` header lines naming the tool version, the
seed and a hash of the run configuration, followed by an ordinary CSV body.
Numbers are written with 12 significant digits so identical inputs give
byte-identical files.
"""

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import distributions as dist
from .cycles import activity_profile
from .errors import CommentDynError, FitError, NoActivityError
from .events import comments_per_user, summarize
from .fitting import (EMConfig, fit_all_posts, fit_powerlaw_mle, fit_powerlaw_regression,
                      fit_truncated_ln)
from .goodness import (BOOTSTRAP_NOTE, KsResult, error_by_publish_hour, hourly_spread, ks_statistic,
                       ks_test_montecarlo)
from .intervals import ici_of_user, ici_population, pci_of_post

PARAM_BINS = {"mu1": 0.1, "sigma1": 0.1, "c": 0.01, "mu2": 0.1, "sigma2": 0.1}
FIT_COLUMNS = ("post_id", "model", "mu1", "sigma1", "c", "mu2", "sigma2", "epsilon", "loglik",
               "converged", "median", "sigma_g", "n", "flags", "ks_D", "ks_p", "ks_replicas")
MIN_USERS = 2


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        out = format(v, ".12g")
        return "0" if out == "-0" else out
    return str(value)


def config_hash(config):
    """Short hash of a configuration mapping; ``out`` and ``workers`` are ignored."""
    clean = {k: v for k, v in sorted(config.items()) if k not in ("out", "workers")}
    text = json.dumps(clean, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Table:
    name: str
    columns: tuple
    rows: list
    notes: tuple = ()

    def render(self, seed, chash):
        buf = io.StringIO()
        buf.write(f"# commentdyn {__version__}\n# seed: {seed}\n# config: {chash}\n")
        for note in self.notes:
            buf.write(f"# {note}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([fmt(v) for v in row])
        return buf.getvalue()


@dataclass
class Bundle:
    """Tables collected in memory and written in one pass."""

    seed: int
    config: dict
    tables: list = field(default_factory=list)

    def add(self, *tables):
        self.tables.extend(tables)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        chash = config_hash(self.config)
        paths = []
        for table in self.tables:
            path = out / f"{table.name}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(table.render(self.seed, chash))
            paths.append(path)
        return paths


# -- corpus -----------------------------------------------------------------

def summary_table(corpus):
    s = summarize(corpus)
    rows = [("n_posts", s.n_posts), ("n_comments", s.n_comments),
            ("n_commentators", s.n_commentators), ("anonymous_fraction", s.anonymous_fraction),
            ("first_ts", s.period[0]), ("last_ts", s.period[1])]
    rows += [(k, v) for k, v in s.metadata.items()]
    return Table("summary", ("key", "value"), rows)


def cycle_tables(corpus):
    tables = []
    for kind in ("posts", "comments"):
        for resolution in ("hour_of_day", "hour_of_week"):
            p = activity_profile(corpus, kind, resolution)
            notes = (*p.notes, f"periods: {p.n_periods}, complete: {p.n_full_periods}",
                     "std unreliable: fewer than 2 complete periods" if p.flagged else "std across complete periods")
            rows = list(zip(range(p.mean.size), p.mean, p.std, p.counts))
            tables.append(Table(f"cycles_{kind}_{resolution}", ("bin_index", "mean", "std", "count"),
                                rows, notes))
    return tables


# -- per-post fits ----------------------------------------------------------

def _params(model):
    if isinstance(model, dist.DoubleLogNormal):
        return model.mu1, model.sigma1, model.c, model.mu2, model.sigma2
    return model.mu, model.sigma, None, None, None


def fit_rows(fits, ks=None):
    ks = ks or {}
    rows = []
    for post_id, rep in fits.reports.items():
        mu1, s1, c, mu2, s2 = _params(rep.model)
        res = ks.get(post_id)
        rows.append((post_id, fits.model, mu1, s1, c, mu2, s2, rep.epsilon, rep.log_likelihood,
                     rep.converged, math.exp(mu1), math.exp(s1), rep.n, ";".join(rep.flags),
                     None if res is None else res.D, None if res is None else res.p_value,
                     None if res is None else res.n_replicas))
    return rows


def post_ks(corpus, fits, replicas, seed, zero_policy="clamp", workers=1):
    """Per-post KS distance, with bootstrap p-values when ``replicas > 0``."""
    out = {}
    for post_id, rep in fits.reports.items():
        samples = pci_of_post(corpus, post_id, zero_policy).samples
        if replicas > 0 and "low-n" not in rep.flags and "degenerate" not in rep.flags:
            try:
                out[post_id] = ks_test_montecarlo(samples, fits.model, n_replicas=replicas,
                                                  seed=seed, workers=workers)
                continue
            except CommentDynError:
                pass
        out[post_id] = KsResult(ks_statistic(samples, rep.model), float("nan"), 0)
    return out


def histogram_rows(values, width):
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return []
    idx = np.floor(values / width + 1e-9).astype(np.int64)
    bins, counts = np.unique(idx, return_counts=True)
    return [(round(b * width, 12), int(c)) for b, c in zip(bins, counts)]


def fit_tables(corpus, fits, ks=None, bootstrap=False):
    m = fits.model
    tables = [
        Table(f"fits_{m}", FIT_COLUMNS, fit_rows(fits, ks), (BOOTSTRAP_NOTE,) if bootstrap else ()),
        Table(f"epsilon_hist_{m}", ("left", "count"), fits.epsilon_histogram(),
              ("bin width 0.001",)),
        Table(f"epsilon_cdf_{m}", ("epsilon", "cdf"), fits.epsilon_cdf()),
    ]
    params = np.array([_params(r.model) for r in fits.reports.values()], dtype=float).reshape(-1, 5)
    names = ("mu1", "sigma1", "c", "mu2", "sigma2") if m == "dln" else ("mu1", "sigma1")
    for j, name in enumerate(names):
        width = PARAM_BINS[name]
        tables.append(Table(f"param_hist_{m}_{name}", ("left", "count"),
                            histogram_rows(params[:, j], width), (f"bin width {width:g}",)))
    by_hour = error_by_publish_hour(corpus, fits.reports)
    tables.append(Table(f"epsilon_by_hour_{m}", ("hour", "mean", "median", "count"),
                        [(h, s.mean, s.median, s.count) for h, s in by_hour.items()],
                        (f"spread of hourly means: {fmt(hourly_spread(by_hour))}",
                         "hours without posts are absent")))
    if fits.failures:
        tables.append(Table(f"fit_failures_{m}", ("post_id", "reason"), sorted(fits.failures.items())))
    return tables


def fit_summary_line(fits):
    return (f"{fits.model}: {len(fits.reports)} posts fitted, "
            f"fraction eps<0.05 = {fmt(fits.fraction_below(0.05))}, "
            f"fraction eps<0.02 = {fmt(fits.fraction_below(0.02))}")


# -- users ------------------------------------------------------------------

USER_COLUMNS = ("model", "gamma", "mu", "sigma", "x_min", "log_likelihood", "slope", "intercept",
                "r", "ks_D", "ks_p", "ks_replicas", "ks_discarded", "flags")


def user_analysis(corpus, x_min=1, replicas=1000, seed=0, workers=1):
    """Power law against truncated log-normal for comments per user."""
    counts = comments_per_user(corpus)
    if len(counts) < MIN_USERS:
        raise NoActivityError(
            f"comments-per-user analysis needs at least {MIN_USERS} identified users, found {len(counts)}")
    x = np.array(list(counts.values()), dtype=np.int64)
    kept = x[x >= x_min]
    values, freq = np.unique(x, return_counts=True)
    hist = Table("users_hist", ("comments", "users"), list(zip(values, freq)))
    rows = []
    pl = fit_powerlaw_mle(kept, x_min)
    ks_pl = ks_test_montecarlo(kept, "powerlaw", x_min, replicas, seed, workers)
    rows.append(("powerlaw_mle", pl.model.gamma, None, None, x_min, pl.log_likelihood, None, None,
                 None, ks_pl.D, ks_pl.p_value, ks_pl.n_replicas, ks_pl.n_discarded,
                 ";".join(pl.flags + (("ks-flagged",) if ks_pl.flagged else ()))))
    tl = fit_truncated_ln(kept, x_min)
    ks_tl = ks_test_montecarlo(kept, "truncated_ln", x_min, replicas, seed, workers)
    rows.append(("truncated_ln", None, tl.model.mu, tl.model.sigma, x_min, tl.log_likelihood, None,
                 None, None, ks_tl.D, ks_tl.p_value, ks_tl.n_replicas, ks_tl.n_discarded,
                 ";".join(tl.flags + (("ks-flagged",) if ks_tl.flagged else ()))))
    try:
        reg = fit_powerlaw_regression(kept)
        rows.append(("powerlaw_regression", -reg.slope, None, None, x_min, None, reg.slope,
                     reg.intercept, reg.r, None, None, None, None, ""))
    except FitError as exc:
        rows.append(("powerlaw_regression", None, None, None, x_min, None, None, None, None,
                     None, None, None, None, f"failed: {exc}"))
    notes = (BOOTSTRAP_NOTE, "r is the Pearson correlation of the log-log histogram points",
             f"users with fewer than {x_min} comments excluded from fits: {int((x < x_min).sum())}")
    return [hist, Table("users_fits", USER_COLUMNS, rows, notes)]


# -- inter-comment intervals ------------------------------------------------

def ici_tables(corpus, zero_policy="clamp"):
    pop = ici_population(corpus, zero_policy)
    rows = []
    for author in corpus.authors:
        try:
            s = ici_of_user(corpus, author, zero_policy)
        except NoActivityError:
            continue
        rows.append((author, len(s), s.median()))
    bins = np.floor(pop.samples).astype(np.int64)
    counts = np.bincount(bins)
    peak = int(np.argmax(counts))
    pdf = [(b, c, c / pop.samples.size) for b, c in enumerate(counts) if c]
    stats = [("n_intervals", len(pop)), ("population_median", pop.median()),
             ("median_of_user_medians", float(np.median([r[2] for r in rows])) if rows else None),
             ("pdf_peak_minute", peak), ("min_interval", float(pop.samples[0]))]
    return [Table("ici_users", ("author", "n_intervals", "median"), rows),
            Table("ici_pdf", ("minute", "count", "density"), pdf, ("one-minute bins",)),
            Table("ici_stats", ("key", "value"), stats)]


# -- full report ------------------------------------------------------------

def build_report(corpus, seed=0, x_min=1, replicas=1000, zero_policy="clamp", workers=1, em_seed=None):
    """All report tables plus a section status table.

    Sections fail independently; the returned flag is true only when every
    section succeeded.
    """
    cfg = EMConfig(seed=seed if em_seed is None else em_seed)
    tables, status = [], []

    def section(name, build):
        try:
            tables.extend(build())
            status.append((name, "ok", ""))
        except (CommentDynError, ValueError) as exc:
            status.append((name, "failed", str(exc)))

    section("summary", lambda: [summary_table(corpus)])
    section("cycles", lambda: cycle_tables(corpus))
    for model in ("ln", "dln"):
        section(f"fits_{model}", lambda m=model: fit_tables(
            corpus, fit_all_posts(corpus, m, cfg, zero_policy, workers)))
    section("users", lambda: user_analysis(corpus, x_min, replicas, seed, workers))
    section("ici", lambda: ici_tables(corpus, zero_policy))
    tables.append(Table("sections", ("section", "status", "message"), status))
    return tables, all(s[1] == "ok" for s in status)
