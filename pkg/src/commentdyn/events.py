"""Normalized post/comment event logs.

One record per event with five fields, in this exact order for CSV::

    kind,id,parent,author,ts

JSONL records use the same keys, e.g.
``{"kind": "comment", "id": "c1", "parent": "p1", "author": "bob", "ts": 1440}``.
``ts`` is integer minutes since 1970-01-01 00:00 in the source's local
clock, or an ISO-8601 string; anything finer than a minute is truncated.
"""

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from types import MappingProxyType

from .errors import EmptyCorpusError, IngestError, UnknownEntityError

FIELDS = ("kind", "id", "parent", "author", "ts")
DEFAULT_ANON = "anonymous"
DEFAULT_EPOCH_NOTE = "minutes since 1970-01-01 00:00 source-local time, no DST adjustment"
COMMENTATOR_CONVENTION = "distinct non-anonymous authors plus one pseudo-author for anonymous comments"
_EPOCH = datetime(1970, 1, 1)


class Kind(str, Enum):
    POST = "post"
    COMMENT = "comment"


@dataclass(frozen=True)
class Event:
    kind: Kind
    id: str
    parent: str | None
    author: str
    ts: int

    def to_record(self):
        return {"kind": self.kind.value, "id": self.id, "parent": self.parent,
                "author": self.author, "ts": self.ts}


def _sort_key(ev):
    return (ev.ts, ev.id)


@dataclass(frozen=True)
class Corpus:
    """Immutable, indexed view of an event log."""

    posts: MappingProxyType
    comments: tuple
    comments_by_post: MappingProxyType
    comments_by_author: MappingProxyType
    anon_token: str = DEFAULT_ANON
    epoch_note: str = DEFAULT_EPOCH_NOTE
    duplicates_dropped: int = 0

    @classmethod
    def from_events(cls, events, anon_token=DEFAULT_ANON, epoch_note=DEFAULT_EPOCH_NOTE,
                    duplicates_dropped=0):
        posts = {}
        comments = []
        for ev in events:
            if ev.kind is Kind.POST:
                posts[ev.id] = ev
            else:
                comments.append(ev)
        orphans = sorted({c.parent for c in comments if c.parent not in posts})
        if orphans:
            raise IngestError(f"comments reference unknown posts: {', '.join(orphans)}", ids=orphans)
        early = sorted(c.id for c in comments if c.ts < posts[c.parent].ts)
        if early:
            raise IngestError(f"comments earlier than their post: {', '.join(early)}", ids=early)
        comments.sort(key=_sort_key)
        by_post = {pid: [] for pid in sorted(posts, key=lambda p: _sort_key(posts[p]))}
        by_author = {}
        for c in comments:
            by_post[c.parent].append(c)
            by_author.setdefault(c.author, []).append(c)
        return cls(
            posts=MappingProxyType(dict(sorted(posts.items(), key=lambda kv: _sort_key(kv[1])))),
            comments=tuple(comments),
            comments_by_post=MappingProxyType({k: tuple(v) for k, v in by_post.items()}),
            comments_by_author=MappingProxyType({k: tuple(v) for k, v in sorted(by_author.items())}),
            anon_token=anon_token,
            epoch_note=epoch_note,
            duplicates_dropped=duplicates_dropped,
        )

    def __len__(self):
        return len(self.posts) + len(self.comments)

    def post(self, post_id):
        try:
            return self.posts[post_id]
        except KeyError:
            raise UnknownEntityError(f"unknown post {post_id!r}") from None

    def author_comments(self, author):
        try:
            return self.comments_by_author[author]
        except KeyError:
            raise UnknownEntityError(f"unknown author {author!r}") from None

    @property
    def authors(self):
        """Identified (non-anonymous) authors, sorted."""
        return [a for a in self.comments_by_author if a != self.anon_token]

    def events(self):
        """All events ordered by (timestamp, id)."""
        return sorted([*self.posts.values(), *self.comments], key=_sort_key)

    def period(self):
        stamps = [ev.ts for ev in self.posts.values()] + [c.ts for c in self.comments]
        if not stamps:
            raise EmptyCorpusError("corpus is empty")
        return min(stamps), max(stamps)


@dataclass(frozen=True)
class CorpusSummary:
    n_posts: int
    n_comments: int
    n_commentators: int
    anonymous_fraction: float
    period: tuple
    metadata: dict = field(default_factory=dict)


def parse_timestamp(value):
    """Integer minutes from an int, a numeric string or an ISO-8601 string."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite timestamp")
        return math.floor(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(text)
        except ValueError:
            pass
        try:
            return parse_timestamp(float(text))
        except ValueError:
            pass
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
        if stamp.tzinfo is not None:
            # keep the wall-clock reading of the source zone
            stamp = stamp.replace(tzinfo=None)
        return int((stamp - _EPOCH).total_seconds() // 60)
    raise ValueError(f"unsupported timestamp {value!r}")


def _record_to_event(rec, line):
    if not isinstance(rec, dict):
        raise IngestError("record is not an object", line=line)
    missing = [k for k in FIELDS if k not in rec]
    if missing:
        raise IngestError(f"missing fields: {', '.join(missing)}", line=line)
    try:
        kind = Kind(str(rec["kind"]).strip().lower())
    except ValueError:
        raise IngestError(f"unknown kind {rec['kind']!r}", line=line) from None
    ev_id = str(rec["id"]).strip() if rec["id"] is not None else ""
    if not ev_id:
        raise IngestError("empty id", line=line)
    parent = rec["parent"]
    parent = None if parent is None or str(parent).strip() == "" else str(parent).strip()
    if kind is Kind.COMMENT and parent is None:
        raise IngestError(f"comment {ev_id!r} has no parent", line=line)
    if kind is Kind.POST and parent is not None:
        raise IngestError(f"post {ev_id!r} must not have a parent", line=line)
    author = rec["author"]
    if author is None or str(author).strip() == "":
        raise IngestError(f"event {ev_id!r} has no author", line=line)
    try:
        ts = parse_timestamp(rec["ts"])
    except (ValueError, TypeError) as exc:
        raise IngestError(f"bad timestamp {rec['ts']!r}: {exc}", line=line) from None
    return Event(kind, ev_id, parent, str(author).strip(), ts)


def _jsonl_records(text):
    for line, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            yield line, json.loads(raw)
        except json.JSONDecodeError as exc:
            raise IngestError(f"invalid JSON: {exc.msg}", line=line) from None


def _csv_records(text):
    reader = csv.reader(io.StringIO(text))
    header = None
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if header is None:
            header = [cell.strip() for cell in row]
            if tuple(header) != FIELDS:
                raise IngestError(f"CSV header must be {','.join(FIELDS)}", line=line)
            continue
        if len(row) != len(FIELDS):
            raise IngestError(f"expected {len(FIELDS)} columns, got {len(row)}", line=line)
        yield line, dict(zip(FIELDS, row))


def parse_events(source, format="jsonl", anon_token=DEFAULT_ANON, epoch_note=DEFAULT_EPOCH_NOTE):
    """Read an event log into a :class:`Corpus`.

    ``source`` may be bytes, str, or a binary/text file object.  Records
    repeating an already-seen id are dropped (first occurrence wins).
    """
    if hasattr(source, "read"):
        source = source.read()
    text = source.decode("utf-8-sig") if isinstance(source, bytes) else source
    if format == "jsonl":
        records = _jsonl_records(text)
    elif format == "csv":
        records = _csv_records(text)
    else:
        raise ValueError(f"unknown format {format!r}")
    seen = set()
    events = []
    dropped = 0
    for line, rec in records:
        ev = _record_to_event(rec, line)
        if ev.id in seen:
            dropped += 1
            continue
        seen.add(ev.id)
        events.append(ev)
    return Corpus.from_events(events, anon_token=anon_token, epoch_note=epoch_note,
                              duplicates_dropped=dropped)


def read_corpus(path, format=None, **kwargs):
    """Parse a file; format defaults to the file extension."""
    path = str(path)
    if format is None:
        format = "csv" if path.lower().endswith(".csv") else "jsonl"
    with open(path, "rb") as fh:
        return parse_events(fh, format=format, **kwargs)


def write_jsonl(corpus, fh):
    for ev in corpus.events():
        fh.write(json.dumps(ev.to_record(), separators=(",", ":")) + "\n")


def write_csv(corpus, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(FIELDS)
    for ev in corpus.events():
        rec = ev.to_record()
        writer.writerow(["" if rec[k] is None else rec[k] for k in FIELDS])


def summarize(corpus):
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot summarize an empty corpus")
    n_comments = len(corpus.comments)
    n_anon = len(corpus.comments_by_author.get(corpus.anon_token, ()))
    n_commentators = len(corpus.authors) + (1 if n_anon else 0)
    return CorpusSummary(
        n_posts=len(corpus.posts),
        n_comments=n_comments,
        n_commentators=n_commentators,
        anonymous_fraction=n_anon / n_comments if n_comments else 0.0,
        period=corpus.period(),
        metadata={
            "commentators": COMMENTATOR_CONVENTION,
            "anon_token": corpus.anon_token,
            "epoch": corpus.epoch_note,
            "duplicates_dropped": corpus.duplicates_dropped,
        },
    )


def comments_per_user(corpus):
    """Comment count per identified author; anonymous comments are excluded."""
    if len(corpus) == 0:
        raise EmptyCorpusError("corpus is empty")
    counts = Counter({a: len(cs) for a, cs in corpus.comments_by_author.items()})
    counts.pop(corpus.anon_token, None)
    return dict(sorted(counts.items()))
