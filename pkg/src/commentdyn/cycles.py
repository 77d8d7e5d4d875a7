"""Daily and weekly activity profiles of posts and comments."""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCorpusError, NoActivityError

MINUTES_PER_HOUR = 60
# 1970-01-01 was a Thursday; shifting by three days puts week starts on Monday
_WEEK_SHIFT = 3 * 1440

RESOLUTIONS = {"hour_of_day": (24, 1440), "hour_of_week": (168, 7 * 1440)}
KINDS = ("posts", "comments")
MEAN_NOTE = "mean uses every period touched by the corpus span, partial ones included"
STD_NOTE = "std is taken across complete periods only"


@dataclass(frozen=True, eq=False)
class ActivityProfile:
    """Normalized per-bin activity.

    ``mean`` averages to 1 over the bins; ``std`` is the spread of the
    per-period normalized counts across complete periods.  ``counts`` are
    the raw per-bin totals.  ``flagged`` is set when fewer than two
    complete periods were available for ``std``.
    """

    resolution: str
    kind: str
    mean: np.ndarray
    std: np.ndarray
    counts: np.ndarray
    n_periods: int
    n_full_periods: int
    flagged: bool
    notes: tuple = field(default=(MEAN_NOTE, STD_NOTE))

    @property
    def fraction(self):
        return self.counts / self.counts.sum()

    def peak(self):
        return int(np.argmax(self.mean))


def _bins_and_periods(stamps, resolution):
    n_bins, length = RESOLUTIONS[resolution]
    shift = _WEEK_SHIFT if resolution == "hour_of_week" else 0
    shifted = np.asarray(stamps, dtype=np.int64) + shift
    return (shifted % length) // MINUTES_PER_HOUR, shifted // length, shift, length, n_bins


def _profile(stamps, span, kind, resolution):
    if resolution not in RESOLUTIONS:
        raise ValueError(f"resolution must be one of {tuple(RESOLUTIONS)}")
    stamps = np.asarray(stamps, dtype=np.int64)
    if stamps.size == 0:
        raise NoActivityError(f"no {kind} to profile")
    bins, periods, shift, length, n_bins = _bins_and_periods(stamps, resolution)
    lo, hi = span[0] + shift, span[1] + shift
    first, last = lo // length, hi // length
    n_periods = int(last - first + 1)
    # complete periods lie entirely inside [lo, hi]
    full_lo = first if lo % length == 0 else first + 1
    full_hi = last if (hi + 1) % length == 0 else last - 1
    n_full = int(max(0, full_hi - full_lo + 1))

    counts = np.bincount(bins, minlength=n_bins).astype(float)
    per_bin_period = counts.sum() / (n_bins * n_periods)
    mean = counts / n_periods / per_bin_period
    if n_full >= 1:
        inside = (periods >= full_lo) & (periods <= full_hi)
        grid = np.zeros((n_full, n_bins))
        np.add.at(grid, (periods[inside] - full_lo, bins[inside]), 1.0)
        std = grid.std(axis=0, ddof=1) / per_bin_period if n_full >= 2 else np.zeros(n_bins)
    else:
        std = np.zeros(n_bins)
    return ActivityProfile(resolution, kind, mean, std, counts.astype(np.int64),
                           n_periods, n_full, n_full < 2)


def _stamps(corpus, kind):
    if kind == "posts":
        return [p.ts for p in corpus.posts.values()]
    if kind == "comments":
        return [c.ts for c in corpus.comments]
    raise ValueError(f"kind must be one of {KINDS}")


def activity_profile(corpus, kind="comments", resolution="hour_of_day"):
    if len(corpus) == 0:
        raise EmptyCorpusError("corpus is empty")
    return _profile(_stamps(corpus, kind), corpus.period(), kind, resolution)


def user_activity_profile(corpus, author, resolution="hour_of_day"):
    """Profile of one author's comments over the corpus span."""
    comments = corpus.author_comments(author)
    return _profile([c.ts for c in comments], corpus.period(), "comments", resolution)
