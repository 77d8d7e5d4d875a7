"""Statistical dynamics of comment threads: interval series, log-normal and
double log-normal fits, power-law tests, activity cycles and a seeded
synthetic-corpus generator."""

__version__ = "0.1.0"

from .distributions import DoubleLogNormal, LogNormal, PowerLaw, TruncatedLogNormal
from .errors import (CommentDynError, EmptyCorpusError, FitError, GeneratorError, IngestError,
                     NoActivityError, SupportError, UnknownEntityError)
from .events import Corpus, Event, parse_events, read_corpus, summarize
from .fitting import fit_all_posts, fit_dln, fit_ln, fit_powerlaw_mle, fit_truncated_ln
from .intervals import IntervalSeries, ici_of_user, pci_of_post

__all__ = [
    "Corpus", "CommentDynError", "DoubleLogNormal", "EmptyCorpusError", "Event", "FitError",
    "GeneratorError", "IngestError", "IntervalSeries", "LogNormal", "NoActivityError", "PowerLaw",
    "SupportError", "TruncatedLogNormal", "UnknownEntityError", "fit_all_posts", "fit_dln",
    "fit_ln", "fit_powerlaw_mle", "fit_truncated_ln", "ici_of_user", "parse_events",
    "pci_of_post", "read_corpus", "summarize",
]
