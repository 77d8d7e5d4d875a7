"""Model families for interval and count data.

Continuous models (minutes > 0):

* :class:`LogNormal`
* :class:`DoubleLogNormal`, a convex mixture of two log-normals

Discrete models (integers >= ``x_min``):

* :class:`PowerLaw`, pmf proportional to ``x**-gamma``
* :class:`TruncatedLogNormal`, a log-normal discretised by continuity
  correction and renormalised above ``x_min``

Every model exposes ``pdf`` (``pmf`` for discrete ones), ``cdf``, ``sf``,
``quantile`` and ``sample``; the module level functions of the same names
dispatch on the model instance.  Samplers never touch global random state:
they take a seed or a ``numpy.random.Generator``.
"""

import math
from dataclasses import dataclass, fields
from functools import cached_property
from typing import ClassVar

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri

from .errors import SupportError

_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)

# erf: positive-term series below the cut, continued fraction for erfc above.
_SERIES_CUT = 2.0
_SERIES_TERMS = 60
_CF_DEPTH = 60
_SERIES_BLOCK = 4096

# Hurwitz zeta: explicit terms until q >= _EM_START, then Euler-Maclaurin.
_EM_START = 32.0
_PL_TABLE = 4096


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def _erf_series(x):
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (2n+1)!!, no cancellation;
    # all terms at once, in column blocks to bound memory
    out = np.empty_like(x)
    steps = (2.0 / (2 * np.arange(1, _SERIES_TERMS) + 1))[:, None]
    for lo in range(0, x.size, _SERIES_BLOCK):
        xb = x[lo:lo + _SERIES_BLOCK]
        x2 = xb * xb
        terms = np.cumprod(steps * x2, axis=0)
        out[lo:lo + _SERIES_BLOCK] = (2.0 / _SQRT_PI) * np.exp(-x2) * xb * (1.0 + terms.sum(axis=0))
    return out


def _erfc_cf(x):
    # valid for x >= _SERIES_CUT; evaluated bottom-up
    f = x.copy()
    for k in range(_CF_DEPTH, 0, -1):
        f = x + (0.5 * k) / f
    return np.exp(-x * x) / (_SQRT_PI * f)


def _erfc_scalar(x):
    # same expansions as the array path, without per-call numpy overhead
    ax = abs(x)
    if ax <= _SERIES_CUT:
        x2 = ax * ax
        term = total = ax
        for n in range(1, _SERIES_TERMS):
            term *= 2.0 * x2 / (2 * n + 1)
            total += term
            if n > 2 * x2 and term <= 1e-17 * total:
                break
        erf_ax = (2.0 / _SQRT_PI) * math.exp(-x2) * total
        return 1.0 - erf_ax if x >= 0 else 1.0 + erf_ax
    f = ax
    for k in range(_CF_DEPTH, 0, -1):
        f = ax + (0.5 * k) / f
    tail = math.exp(-ax * ax) / (_SQRT_PI * f)
    return tail if x > 0 else 2.0 - tail


def erf(x):
    """Gauss error function, absolute error below 1e-15 for all finite x."""
    arr, scalar = _as_array(x)
    if scalar:
        return math.copysign(1.0 - _erfc_scalar(abs(float(arr))), float(arr))
    ax = np.abs(arr)
    out = np.empty_like(ax)
    small = ax <= _SERIES_CUT
    if small.any():
        out[small] = _erf_series(ax[small])
    if not small.all():
        out[~small] = 1.0 - _erfc_cf(ax[~small])
    return np.copysign(out, arr)


def erfc(x):
    """Complementary error function with relative accuracy kept in the upper tail."""
    arr, scalar = _as_array(x)
    if scalar:
        return _erfc_scalar(float(arr))
    out = np.empty_like(arr)
    hi = arr > _SERIES_CUT
    lo = arr < -_SERIES_CUT
    mid = ~(hi | lo)
    if hi.any():
        out[hi] = _erfc_cf(arr[hi])
    if lo.any():
        out[lo] = 2.0 - _erfc_cf(-arr[lo])
    if mid.any():
        out[mid] = 1.0 - _erf_series(arr[mid])
    return out


def norm_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


def norm_sf(z):
    return 0.5 * erfc(np.asarray(z, dtype=float) / _SQRT2)


def hurwitz_zeta(s, q):
    """``sum_{k>=0} (q+k)**-s`` for ``s > 1`` and ``q > 0``.

    Terms are summed explicitly until the argument reaches 32; the remainder
    is the Euler-Maclaurin tail with three Bernoulli corrections, whose
    truncation error is below 1e-14 there.
    """
    arr, scalar = _as_array(q)
    shift = np.maximum(0.0, np.ceil(_EM_START - arr))
    total = np.zeros_like(arr)
    for k in range(int(shift.max(initial=0.0))):
        live = k < shift
        total[live] += (arr[live] + k) ** -s
    n = arr + shift
    tail = (
        n ** (1.0 - s) / (s - 1.0)
        + 0.5 * n**-s
        + s / 12.0 * n ** (-s - 1.0)
        - s * (s + 1) * (s + 2) / 720.0 * n ** (-s - 3.0)
        + s * (s + 1) * (s + 2) * (s + 3) * (s + 4) / 30240.0 * n ** (-s - 5.0)
    )
    return _out(total + tail, scalar)


def _rng(seed):
    return np.random.default_rng(seed)


def _positive(t):
    arr, scalar = _as_array(t)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise SupportError("continuous models are supported on t > 0")
    return arr, scalar


def _integers(x, x_min):
    arr, scalar = _as_array(x)
    if not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr)) or np.any(arr < x_min):
        raise SupportError(f"discrete model supported on integers >= {x_min}")
    return arr, scalar


def _check_prob(p):
    arr, scalar = _as_array(p)
    if not np.all((arr > 0) & (arr < 1)):
        raise SupportError("quantile requires 0 < p < 1")
    return arr, scalar


class _Model:
    name: ClassVar[str] = ""

    def to_dict(self):
        out = {"model": self.name}
        out.update({f.name: getattr(self, f.name) for f in fields(self)})
        return out

    def to_text(self):
        return " ".join(f"{k}={v}" for k, v in self.to_dict().items())

    def sample(self, n, seed=None):
        raise NotImplementedError


@dataclass(frozen=True)
class LogNormal(_Model):
    mu: float
    sigma: float

    name: ClassVar[str] = "ln"

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"invalid log-normal parameters mu={self.mu} sigma={self.sigma}")

    def logpdf(self, t):
        arr, scalar = _positive(t)
        lt = np.log(arr)
        z = (lt - self.mu) / self.sigma
        out = -lt - math.log(self.sigma) - 0.5 * math.log(2 * math.pi) - 0.5 * z * z
        return _out(out, scalar)

    def pdf(self, t):
        arr, scalar = _positive(t)
        z = (np.log(arr) - self.mu) / self.sigma
        out = np.exp(-0.5 * z * z) / (arr * self.sigma * math.sqrt(2 * math.pi))
        return _out(out, scalar)

    def cdf(self, t):
        arr, scalar = _positive(t)
        return _out(norm_cdf((np.log(arr) - self.mu) / self.sigma), scalar)

    def sf(self, t):
        arr, scalar = _positive(t)
        return _out(norm_sf((np.log(arr) - self.mu) / self.sigma), scalar)

    def quantile(self, p):
        arr, scalar = _check_prob(p)
        return _out(np.exp(self.mu + self.sigma * ndtri(arr)), scalar)

    def isf(self, q):
        """Value exceeded with probability ``q`` (accurate for tiny ``q``)."""
        arr, scalar = _as_array(q)
        return _out(np.exp(self.mu - self.sigma * ndtri(arr)), scalar)

    def sample(self, n, seed=None):
        return np.exp(self.mu + self.sigma * _rng(seed).standard_normal(n))

    @property
    def median(self):
        return math.exp(self.mu)


@dataclass(frozen=True)
class DoubleLogNormal(_Model):
    mu1: float
    sigma1: float
    c: float
    mu2: float
    sigma2: float

    name: ClassVar[str] = "dln"

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"mixing coefficient must lie in [0, 1], got {self.c}")
        LogNormal(self.mu1, self.sigma1)
        LogNormal(self.mu2, self.sigma2)

    @property
    def first(self):
        return LogNormal(self.mu1, self.sigma1)

    @property
    def second(self):
        return LogNormal(self.mu2, self.sigma2)

    @classmethod
    def nested(cls, ln):
        """The mixture that coincides with a single log-normal."""
        return cls(ln.mu, ln.sigma, 1.0, ln.mu, ln.sigma)

    def canonical(self):
        """Same distribution with components ordered so that ``c >= 0.5``."""
        if self.c >= 0.5:
            return self
        return DoubleLogNormal(self.mu2, self.sigma2, 1.0 - self.c, self.mu1, self.sigma1)

    def pdf(self, t):
        return self.c * self.first.pdf(t) + (1.0 - self.c) * self.second.pdf(t)

    def logpdf(self, t):
        a = self.first.logpdf(t)
        b = self.second.logpdf(t)
        with np.errstate(divide="ignore"):
            return np.logaddexp(np.log(self.c) + a, np.log1p(-self.c) + b)

    def cdf(self, t):
        return self.c * self.first.cdf(t) + (1.0 - self.c) * self.second.cdf(t)

    def sf(self, t):
        return self.c * self.first.sf(t) + (1.0 - self.c) * self.second.sf(t)

    def _quantile_one(self, p):
        q1 = math.log(self.first.quantile(p))
        q2 = math.log(self.second.quantile(p))
        lo, hi = min(q1, q2), max(q1, q2)
        if hi - lo < 1e-15:
            return math.exp(lo)
        root = brentq(lambda lt: self.cdf(math.exp(lt)) - p, lo, hi, xtol=1e-14, rtol=1e-15)
        return math.exp(root)

    def quantile(self, p):
        arr, scalar = _check_prob(p)
        out = np.array([self._quantile_one(float(v)) for v in arr.ravel()]).reshape(arr.shape)
        return _out(out, scalar)

    def sample(self, n, seed=None):
        rng = _rng(seed)
        first = rng.random(n) < self.c
        z = rng.standard_normal(n)
        return np.exp(np.where(first, self.mu1 + self.sigma1 * z, self.mu2 + self.sigma2 * z))


@dataclass(frozen=True)
class PowerLaw(_Model):
    """Discrete power law ``P(x) = x**-gamma / zeta(gamma, x_min)``."""

    gamma: float
    x_min: int = 1

    name: ClassVar[str] = "powerlaw"

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 1):
            raise ValueError(f"power-law exponent must exceed 1, got {self.gamma}")
        if int(self.x_min) != self.x_min or self.x_min < 1:
            raise ValueError(f"x_min must be an integer >= 1, got {self.x_min}")

    @cached_property
    def _table(self):
        # zeta(gamma, x) for x = x_min .. x_min + _PL_TABLE
        xs = np.arange(self.x_min, self.x_min + _PL_TABLE, dtype=float)
        end = hurwitz_zeta(self.gamma, self.x_min + _PL_TABLE)
        head = np.cumsum((xs**-self.gamma)[::-1])[::-1] + end
        return np.append(head, end)

    @property
    def norm(self):
        return float(self._table[0])

    def _zeta(self, q):
        q = np.asarray(q, dtype=float)
        idx = q - self.x_min
        inside = idx <= _PL_TABLE
        out = np.empty_like(q)
        out[inside] = self._table[idx[inside].astype(np.int64)]
        out[~inside] = hurwitz_zeta(self.gamma, q[~inside])
        return out

    def pmf(self, x):
        arr, scalar = _integers(x, self.x_min)
        return _out(arr**-self.gamma / self.norm, scalar)

    pdf = pmf

    def logpmf(self, x):
        arr, scalar = _integers(x, self.x_min)
        return _out(-self.gamma * np.log(arr) - math.log(self.norm), scalar)

    def sf(self, x):
        """P(X > x)."""
        arr, scalar = _integers(x, self.x_min)
        return _out(self._zeta(arr + 1) / self.norm, scalar)

    def cdf(self, x):
        arr, scalar = _integers(x, self.x_min)
        return _out(1.0 - self._zeta(arr + 1) / self.norm, scalar)

    def _invert(self, u):
        # smallest integer x >= x_min with zeta(x + 1) <= (1 - u) * zeta(x_min)
        u = np.asarray(u, dtype=float)
        shape = u.shape
        r = (1.0 - u.ravel()) * self.norm
        table = self._table
        j = np.searchsorted(-table, -r, side="left")
        j = np.maximum(j, 1)
        out = (self.x_min + j - 1).astype(float)
        tail = j > _PL_TABLE
        if np.any(tail):
            out[tail] = self._invert_tail(r[tail])
        return out.reshape(shape)

    def _invert_tail(self, r):
        g = self.gamma
        lo = np.full_like(r, self.x_min + _PL_TABLE - 1.0)
        guess = ((g - 1.0) * r) ** (-1.0 / (g - 1.0)) - 0.5
        hi = np.maximum(lo + 1.0, np.floor(2.0 * guess) + 2.0)
        for _ in range(200):
            bad = hurwitz_zeta(g, hi + 1.0) > r
            if not np.any(bad):
                break
            hi[bad] *= 2.0
        for _ in range(200):
            live = hi - lo > 1.0
            if not np.any(live):
                break
            mid = np.floor(0.5 * (lo + hi))
            ok = hurwitz_zeta(g, mid + 1.0) <= r
            hi = np.where(live & ok, mid, hi)
            lo = np.where(live & ~ok, mid, lo)
        return hi

    def quantile(self, p):
        arr, scalar = _check_prob(p)
        return _out(self._invert(arr), scalar)

    def sample(self, n, seed=None):
        return self._invert(_rng(seed).random(n))


@dataclass(frozen=True)
class TruncatedLogNormal(_Model):
    """Log-normal mass on integers ``x >= x_min``.

    ``P(x)`` is proportional to ``F_LN(x + 0.5) - F_LN(x - 0.5)``; the
    normaliser is the log-normal survival at ``x_min - 0.5``.
    """

    mu: float
    sigma: float
    x_min: int = 1

    name: ClassVar[str] = "truncated_ln"

    def __post_init__(self):
        if int(self.x_min) != self.x_min or self.x_min < 1:
            raise ValueError(f"x_min must be an integer >= 1, got {self.x_min}")
        if self.norm <= 0.0:
            raise ValueError("truncation point leaves no probability mass")

    @property
    def base(self):
        return LogNormal(self.mu, self.sigma)

    @property
    def norm(self):
        return float(self.base.sf(self.x_min - 0.5))

    def _mass_and_norm(self, arr):
        # each half-integer edge is evaluated once; the smaller tail keeps precision
        flat = arr.ravel()
        edges, inv = np.unique(np.concatenate((flat - 0.5, flat + 0.5, [self.x_min - 0.5])),
                               return_inverse=True)
        z = (np.log(edges) - self.mu) / self.sigma
        tail = 0.5 * erfc(np.abs(z) / _SQRT2)
        below = np.where(z < 0, tail, 1.0 - tail)
        above = np.where(z >= 0, tail, 1.0 - tail)
        n = flat.size
        lo, hi = inv[:n], inv[n:2 * n]
        upper = z[lo] > 0
        mass = np.where(upper, above[lo] - above[hi], below[hi] - below[lo])
        return mass.reshape(arr.shape), float(above[inv[-1]])

    def pmf(self, x):
        arr, scalar = _integers(x, self.x_min)
        mass, norm = self._mass_and_norm(arr)
        return _out(mass / norm, scalar)

    pdf = pmf

    def logpmf(self, x):
        arr, scalar = _integers(x, self.x_min)
        mass, norm = self._mass_and_norm(arr)
        with np.errstate(divide="ignore"):
            return _out(np.log(mass) - math.log(norm), scalar)

    def sf(self, x):
        """P(X > x)."""
        arr, scalar = _integers(x, self.x_min)
        return _out(self.base.sf(arr + 0.5) / self.norm, scalar)

    def cdf(self, x):
        arr, scalar = _integers(x, self.x_min)
        return _out(1.0 - self.base.sf(arr + 0.5) / self.norm, scalar)

    def _invert(self, u):
        # X = ceil(Y - 0.5) where Y is the log-normal truncated to Y > x_min - 0.5
        y = self.base.isf(self.norm * (1.0 - np.asarray(u, dtype=float)))
        return np.maximum(np.ceil(y - 0.5), float(self.x_min))

    def quantile(self, p):
        arr, scalar = _check_prob(p)
        x = self._invert(arr)
        # guard the rounding boundary
        x = np.where(self.cdf(x) < arr, x + 1.0, x)
        below = np.maximum(x - 1.0, self.x_min)
        x = np.where((x > self.x_min) & (self.cdf(below) >= arr), below, x)
        return _out(x, scalar)

    def sample(self, n, seed=None):
        return self._invert(_rng(seed).random(n))


MODELS = {cls.name: cls for cls in (LogNormal, DoubleLogNormal, PowerLaw, TruncatedLogNormal)}


def from_dict(data):
    """Inverse of ``model.to_dict()``."""
    data = dict(data)
    cls = MODELS[data.pop("model")]
    return cls(**data)


def pdf(model, t):
    return model.pdf(t)


def cdf(model, t):
    return model.cdf(t)


def quantile(model, p):
    return model.quantile(p)


def sample(model, n, seed=None):
    return model.sample(n, seed)
