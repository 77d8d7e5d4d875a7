import numpy as np
import pytest

from commentdyn.events import Corpus, Event, Kind


def make_corpus(posts, comments, anon_token="anonymous"):
    """posts: {id: ts}; comments: [(id, parent, author, ts)]."""
    events = [Event(Kind.POST, pid, None, "author", ts) for pid, ts in posts.items()]
    events += [Event(Kind.COMMENT, cid, parent, author, ts) for cid, parent, author, ts in comments]
    return Corpus.from_events(events, anon_token=anon_token)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
