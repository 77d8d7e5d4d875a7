"""Seeded synthetic corpora with known ground truth.

A :class:`GeneratorSpec` fixes post placement, comments per post, the
post-comment interval model, the user pool and the minimum gap between two
comments of one user.  :func:`generate_corpus` is deterministic in
``spec.seed``: post ``i`` always draws from child ``i`` of a dedicated
``SeedSequence`` branch.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from pathlib import Path

import numpy as np

from . import distributions as dist
from .errors import GeneratorError
from .events import Corpus, Event, Kind, write_jsonl

MINUTES_PER_DAY = 1440
DEFAULT_START = "2006-01-02"  # a Monday
OFFICE_DAYS = range(0, 5)
OFFICE_HOURS = (9, 17)


@dataclass(frozen=True)
class Schedule:
    """Post placement: ``uniform`` or ``circadian``.

    The circadian rate is ``1 + amplitude * cos(2 pi (h - peak_hour - 0.5) / 24)``
    scaled by ``weekend_factor`` on Saturday and Sunday, so the hour bin
    ``peak_hour`` is the busiest.  ``hours``, when
    set, restricts publication to those hours of the day.
    """

    kind: str = "uniform"
    amplitude: float = 0.8
    peak_hour: float = 13.0
    weekend_factor: float = 1.0
    hours: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "circadian"):
            raise GeneratorError(f"unknown schedule {self.kind!r}")
        if not 0 <= self.amplitude <= 1 or self.weekend_factor < 0:
            raise GeneratorError("amplitude must lie in [0, 1] and weekend_factor >= 0")
        if self.hours is not None:
            object.__setattr__(self, "hours", tuple(sorted(int(h) % 24 for h in self.hours)))


@dataclass(frozen=True)
class CommentCount:
    """Comments per post: ``fixed`` (``n``) or ``truncated_ln``."""

    kind: str = "fixed"
    n: int = 100
    mu: float = 4.0
    sigma: float = 1.0
    x_min: int = 1

    def __post_init__(self):
        if self.kind not in ("fixed", "truncated_ln"):
            raise GeneratorError(f"unknown comment count model {self.kind!r}")
        if self.kind == "fixed" and self.n < 1:
            raise GeneratorError("fixed comment count must be >= 1")

    def model(self):
        return dist.TruncatedLogNormal(self.mu, self.sigma, self.x_min)


@dataclass(frozen=True)
class SecondWave:
    """Couples a second activity wave to the daily cycle.

    For a post at time ``t0`` the first-wave share is the first component's
    cdf at the next ``quiet_hour`` (clipped below at ``min_c``); the second
    component has median at the first circadian peak after that quiet hour
    and log-scale ``sigma``.
    """

    sigma: float = 0.5
    quiet_hour: float = 4.0
    min_c: float = 0.3


@dataclass(frozen=True)
class UserPool:
    """Authors of generated comments.

    ``mode="weights"``: each comment picks a user with probability
    proportional to log-normal activity weights; the first
    ``office_hours`` users only comment Monday-Friday 9-17.
    ``mode="truncated_ln"``: per-user comment counts are drawn from the
    truncated log-normal (``count_mu``, ``count_sigma``, ``count_x_min``)
    until they cover all identified comments.
    """

    size: int = 200
    anonymous_fraction: float = 0.2
    mode: str = "weights"
    weight_sigma: float = 1.5
    office_hours: int = 0
    count_mu: float = 1.0
    count_sigma: float = 2.0
    count_x_min: int = 1

    def __post_init__(self):
        if self.mode not in ("weights", "truncated_ln"):
            raise GeneratorError(f"unknown user pool mode {self.mode!r}")
        if not 0 <= self.anonymous_fraction <= 1:
            raise GeneratorError("anonymous_fraction must lie in [0, 1]")
        if self.mode == "weights" and (self.size < 1 or self.office_hours >= self.size + 1):
            raise GeneratorError("user pool needs size >= 1 and office_hours <= size")


@dataclass(frozen=True)
class GeneratorSpec:
    n_posts: int
    pci: dict = field(default_factory=lambda: {"model": "ln", "mu": 5.0, "sigma": 1.5})
    schedule: Schedule = field(default_factory=Schedule)
    comments: CommentCount = field(default_factory=CommentCount)
    second_wave: SecondWave | None = None
    users: UserPool = field(default_factory=UserPool)
    ici_floor: int = 2
    days: int = 28
    start: str = DEFAULT_START
    seed: int = 0

    def __post_init__(self):
        if self.n_posts < 1 or self.days < 1:
            raise GeneratorError("n_posts and days must be >= 1")
        if self.ici_floor < 0:
            raise GeneratorError("ici_floor must be >= 0")
        model = self.pci_model
        if self.second_wave is not None and not isinstance(model, dist.LogNormal):
            raise GeneratorError("second-wave coupling needs a log-normal base model")

    @property
    def pci_model(self):
        try:
            return dist.from_dict(self.pci)
        except (KeyError, TypeError, ValueError) as exc:
            raise GeneratorError(f"invalid pci model {self.pci!r}: {exc}") from None

    @property
    def start_minute(self):
        return (date.fromisoformat(self.start) - date(1970, 1, 1)).days * MINUTES_PER_DAY

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        nested = {"schedule": Schedule, "comments": CommentCount, "users": UserPool,
                  "second_wave": SecondWave}
        for key, kind in nested.items():
            if data.get(key) is not None:
                value = dict(data[key])
                if key == "schedule" and value.get("hours") is not None:
                    value["hours"] = tuple(value["hours"])
                data[key] = kind(**value)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise GeneratorError(f"unknown spec fields: {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class GroundTruth:
    spec: GeneratorSpec
    posts: list
    users: dict
    pushed_comments: int = 0

    def to_dict(self):
        return {"spec": self.spec.to_dict(), "posts": self.posts, "users": self.users,
                "pushed_comments": self.pushed_comments}

    @classmethod
    def from_dict(cls, data):
        return cls(GeneratorSpec.from_dict(data["spec"]), data["posts"], data["users"],
                   data.get("pushed_comments", 0))


def reference_spec(seed=2006):
    """The shipped end-to-end reference corpus."""
    return GeneratorSpec(
        n_posts=150,
        pci={"model": "ln", "mu": 4.8, "sigma": 1.3},
        schedule=Schedule("circadian", amplitude=0.8, peak_hour=13.0, weekend_factor=0.5),
        comments=CommentCount("truncated_ln", mu=4.5, sigma=0.7, x_min=5),
        second_wave=SecondWave(sigma=0.5, quiet_hour=4.0, min_c=0.3),
        users=UserPool(size=400, anonymous_fraction=0.19, weight_sigma=1.5, office_hours=3),
        ici_floor=2,
        days=28,
        seed=seed,
    )


def minutes_until_hour(ts, hour):
    """Minutes from ``ts`` to the next strictly later time at ``hour`` of day."""
    delta = (round(hour * 60) - ts % MINUTES_PER_DAY) % MINUTES_PER_DAY
    return delta or MINUTES_PER_DAY


def _hour_of(ts):
    return (np.asarray(ts) // 60) % 24


def _weekday(ts):
    # 1970-01-01 was a Thursday; Monday = 0
    return (np.asarray(ts) // MINUTES_PER_DAY + 3) % 7


def _place_posts(spec, rng):
    sched = spec.schedule
    start = spec.start_minute
    span = spec.days * MINUTES_PER_DAY
    allowed = None if sched.hours is None else np.isin(np.arange(24), sched.hours)
    if allowed is not None and not allowed.any():
        raise GeneratorError("schedule.hours is empty")
    chosen = []
    need = spec.n_posts
    for _ in range(10_000):
        cand = start + rng.integers(0, span, size=max(4 * need, 64))
        accept = np.ones(cand.size, dtype=bool)
        if sched.kind == "circadian":
            hour = (cand % MINUTES_PER_DAY) / 60.0
            rate = 1.0 + sched.amplitude * np.cos(2 * np.pi * (hour - sched.peak_hour - 0.5) / 24.0)
            rate = rate * np.where(_weekday(cand) >= 5, sched.weekend_factor, 1.0)
            top = (1.0 + sched.amplitude) * max(1.0, sched.weekend_factor)
            accept &= rng.random(cand.size) * top < rate
        if allowed is not None:
            accept &= allowed[_hour_of(cand)]
        chosen.extend(cand[accept][:need].tolist())
        need = spec.n_posts - len(chosen)
        if need == 0:
            return np.sort(np.array(chosen, dtype=np.int64))
    raise GeneratorError("could not place posts under the requested schedule")


def post_model(spec, post_ts):
    """Interval model for one post, with second-wave coupling applied."""
    base = spec.pci_model
    wave = spec.second_wave
    if wave is None:
        return base
    quiet = minutes_until_hour(post_ts, wave.quiet_hour)
    c = min(1.0, max(wave.min_c, float(base.cdf(float(quiet)))))
    peak = quiet + minutes_until_hour(post_ts + quiet, spec.schedule.peak_hour + 0.5)
    return dist.DoubleLogNormal(base.mu, base.sigma, c, math.log(peak), wave.sigma)


def generate_post_thread(post_time, n_comments, pci_model, seed=None):
    """Sorted integer comment times; zero-minute intervals become one minute."""
    if n_comments < 1:
        raise GeneratorError("a thread needs at least one comment")
    lags = np.rint(pci_model.sample(int(n_comments), seed))
    lags = np.maximum(lags, 1.0).astype(np.int64)
    return np.sort(post_time + lags)


def _in_office(ts):
    hour = _hour_of(ts)
    return (_weekday(ts) < 5) & (hour >= OFFICE_HOURS[0]) & (hour < OFFICE_HOURS[1])


def _assign_users(spec, stamps, rng):
    """Author index per comment (-1 = anonymous) and the user table."""
    pool = spec.users
    n = stamps.size
    anon = rng.random(n) < pool.anonymous_fraction
    authors = np.full(n, -1, dtype=np.int64)
    ident = np.flatnonzero(~anon)
    if pool.mode == "weights":
        weights = np.exp(pool.weight_sigma * rng.standard_normal(pool.size))
        office = np.arange(pool.size) < pool.office_hours
        # office-hours users are heavy users so their rhythm is visible
        weights[office] = np.quantile(weights, 0.95)
        inside = _in_office(stamps[ident])
        for mask, eligible in ((inside, np.ones(pool.size, bool)), (~inside, ~office)):
            idx = ident[mask]
            if idx.size == 0:
                continue
            if not eligible.any():
                anon[idx] = True
                continue
            p = np.where(eligible, weights, 0.0)
            authors[idx] = rng.choice(pool.size, size=idx.size, p=p / p.sum())
        users = {_user_id(i): {"weight": float(weights[i]), "office_hours": bool(office[i])}
                 for i in range(pool.size)}
    else:
        model = dist.TruncatedLogNormal(pool.count_mu, pool.count_sigma, pool.count_x_min)
        counts = []
        total = 0
        while total < ident.size:
            batch = model.sample(max(64, ident.size // 4), rng).astype(np.int64)
            for c in batch:
                c = int(min(c, ident.size - total))
                counts.append(c)
                total += c
                if total >= ident.size:
                    break
        tokens = np.repeat(np.arange(len(counts)), counts)
        authors[ident] = rng.permutation(tokens)
        users = {_user_id(i): {"count": c, "truncated": i == len(counts) - 1}
                 for i, c in enumerate(counts)}
    return authors, users


def _user_id(i):
    return f"u{i + 1:05d}"


def _enforce_floor(stamps, authors, floor, span):
    """Push each user's comments forward so consecutive gaps are >= floor."""
    pushed = 0
    if floor <= 0:
        return stamps, pushed
    stamps = stamps.copy()
    order = np.lexsort((np.arange(stamps.size), stamps, authors))
    bounds = np.flatnonzero(np.diff(authors[order])) + 1
    for group in np.split(order, bounds):
        if authors[group[0]] < 0 or group.size < 2:
            continue
        if group.size * floor > span:
            raise GeneratorError(
                f"user {_user_id(int(authors[group[0]]))} needs {group.size} comments "
                f"spaced {floor} min apart within {span} min")
        t = stamps[group]
        for i in range(1, t.size):
            if t[i] - t[i - 1] < floor:
                t[i] = t[i - 1] + floor
                pushed += 1
        stamps[group] = t
    return stamps, pushed


def generate_corpus(spec, anon_token="anonymous"):
    """Build a corpus and its ground-truth record from ``spec``."""
    root = np.random.SeedSequence(spec.seed)
    ss_sched, ss_counts, ss_users, ss_posts = root.spawn(4)
    post_times = _place_posts(spec, np.random.default_rng(ss_sched))
    n_posts = post_times.size
    if spec.comments.kind == "fixed":
        counts = np.full(n_posts, spec.comments.n, dtype=np.int64)
    else:
        counts = spec.comments.model().sample(n_posts, np.random.default_rng(ss_counts)).astype(np.int64)

    post_ids = [f"p{i + 1:05d}" for i in range(n_posts)]
    truth_posts = []
    stamp_parts, parent_parts = [], []
    for i, (pid, ts, n, seed) in enumerate(zip(post_ids, post_times, counts, ss_posts.spawn(n_posts))):
        model = post_model(spec, int(ts))
        stamp_parts.append(generate_post_thread(int(ts), int(n), model, np.random.default_rng(seed)))
        parent_parts.append(np.full(int(n), i, dtype=np.int64))
        truth_posts.append({"id": pid, "ts": int(ts), "n_comments": int(n), "pci": model.to_dict()})
    stamps = np.concatenate(stamp_parts)
    parents = np.concatenate(parent_parts)

    rng_users = np.random.default_rng(ss_users)
    authors, users = _assign_users(spec, stamps, rng_users)
    stamps, pushed = _enforce_floor(stamps, authors, spec.ici_floor, spec.days * MINUTES_PER_DAY)

    events = [Event(Kind.POST, pid, None, _user_id(int(rng_users.integers(spec.users.size or 1))), int(ts))
              for pid, ts in zip(post_ids, post_times)]
    within = np.zeros(n_posts, dtype=np.int64)
    for ts, parent, author in zip(stamps.tolist(), parents.tolist(), authors.tolist()):
        within[parent] += 1
        cid = f"{post_ids[parent]}-c{within[parent]:05d}"
        name = anon_token if author < 0 else _user_id(author)
        events.append(Event(Kind.COMMENT, cid, post_ids[parent], name, ts))
    corpus = Corpus.from_events(events, anon_token=anon_token)
    return corpus, GroundTruth(spec, truth_posts, users, pushed)


def truth_path(corpus_path):
    path = Path(corpus_path)
    return path.with_name(path.stem + ".truth.json")


def write_corpus(corpus, truth, path):
    """Write the JSONL event log and its ``.truth.json`` sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(corpus, fh)
    with open(truth_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(truth.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path, truth_path(path)


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return GeneratorSpec.from_dict(data.get("spec", data))


def with_seed(spec, seed):
    return replace(spec, seed=seed)
