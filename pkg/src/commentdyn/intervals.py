"""Post-comment (PCI) and inter-comment (ICI) interval series."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NoActivityError

ZERO_CLAMP = 0.5  # half the minute resolution
ZERO_POLICIES = ("clamp", "drop")


@dataclass(frozen=True, eq=False)
class IntervalSeries:
    """Positive interval samples in minutes, kept sorted.

    ``origin`` is a tuple such as ``("pci_post", post_id)``,
    ``("pci_user", author)``, ``("ici_user", author)`` or
    ``("ici_population",)``.
    """

    samples: np.ndarray
    origin: tuple = ("raw",)

    def __post_init__(self):
        arr = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if arr.size == 0:
            raise NoActivityError("interval series is empty")
        if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
            raise ValueError("interval samples must be finite and positive")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @cached_property
    def _bins_of_samples(self):
        return np.floor(self.samples).astype(np.int64)

    @cached_property
    def occupied_bins(self):
        """Sorted integer minute bins holding at least one sample."""
        return np.unique(self._bins_of_samples)

    @property
    def T(self):
        return int(self.occupied_bins.size)

    def binned_cdf(self, bins):
        """Fraction of samples whose minute bin is <= each of ``bins``."""
        return np.searchsorted(self._bins_of_samples, np.asarray(bins), side="right") / self.samples.size

    def median(self):
        return float(np.median(self.samples))


def make_series(raw, origin=("raw",), zero_policy="clamp"):
    """Build a series from non-negative minute differences."""
    if zero_policy not in ZERO_POLICIES:
        raise ValueError(f"zero_policy must be one of {ZERO_POLICIES}")
    arr = np.asarray(raw, dtype=float)
    if np.any(arr < 0):
        raise ValueError("negative interval")
    if zero_policy == "clamp":
        arr = np.where(arr == 0, ZERO_CLAMP, arr)
    else:
        arr = arr[arr > 0]
    if arr.size == 0:
        raise NoActivityError(f"no positive intervals for {origin}")
    return IntervalSeries(arr, origin)


def pci_of_post(corpus, post_id, zero_policy="clamp"):
    post = corpus.post(post_id)
    comments = corpus.comments_by_post[post_id]
    if not comments:
        raise NoActivityError(f"post {post_id!r} received no comments")
    raw = [c.ts - post.ts for c in comments]
    return make_series(raw, ("pci_post", post_id), zero_policy)


def _identified(corpus, author):
    comments = corpus.author_comments(author)
    if author == corpus.anon_token:
        raise NoActivityError("anonymous comments do not identify a user")
    return comments


def pci_of_user(corpus, author, zero_policy="clamp"):
    comments = _identified(corpus, author)
    raw = [c.ts - corpus.posts[c.parent].ts for c in comments]
    return make_series(raw, ("pci_user", author), zero_policy)


def _ici_raw(comments):
    stamps = np.array([c.ts for c in comments], dtype=float)
    return np.diff(stamps)


def ici_of_user(corpus, author, zero_policy="clamp"):
    comments = _identified(corpus, author)
    if len(comments) < 2:
        raise NoActivityError(f"author {author!r} has fewer than 2 comments")
    return make_series(_ici_raw(comments), ("ici_user", author), zero_policy)


def ici_population(corpus, zero_policy="clamp"):
    """Pooled ICIs of every identified author with at least two comments."""
    parts = [_ici_raw(cs) for a, cs in corpus.comments_by_author.items()
             if a != corpus.anon_token and len(cs) >= 2]
    if not parts:
        raise NoActivityError("no author has two or more comments")
    return make_series(np.concatenate(parts), ("ici_population",), zero_policy)


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    support: np.ndarray
    cum_prob: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.support, t, side="right")
        padded = np.concatenate(([0.0], self.cum_prob))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.support, t, side="left")
        padded = np.concatenate(([0.0], self.cum_prob))
        return padded[idx]


def empirical_cdf(series):
    samples = series.samples if isinstance(series, IntervalSeries) else np.sort(np.asarray(series, float))
    if samples.size == 0:
        raise NoActivityError("empirical cdf of an empty sample")
    support, counts = np.unique(samples, return_counts=True)
    cum = np.cumsum(counts) / samples.size
    cum[-1] = 1.0
    return EmpiricalCdf(support, cum)


@dataclass(frozen=True, eq=False)
class Histogram:
    left: np.ndarray  # left bin edges
    values: np.ndarray
    bin_width: float


def bin_histogram(series, bin_width, density=False, start=0.0):
    """Fixed-width histogram from ``start`` up to the largest sample."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    samples = series.samples if isinstance(series, IntervalSeries) else np.asarray(series, float)
    if samples.size and samples.min() < start:
        raise ValueError("samples below the histogram start")
    counts = np.bincount(np.floor((samples - start) / bin_width).astype(np.int64))
    left = start + bin_width * np.arange(counts.size)
    values = counts / (samples.size * bin_width) if density else counts.astype(float)
    return Histogram(left, values, float(bin_width))
