"""Command-line interface.

Every subcommand reads an event log (or a generator spec), runs one
analysis and writes plot-ready CSV files into ``--out``.  Global options
may also be set through environment variables named ``COMMENTDYN_`` plus
the option name in upper case with dashes as underscores, for example
``COMMENTDYN_SEED=7``; explicit flags win over the environment.

Exit codes: 0 on success, 1 when an analysis fails, 2 for unusable input.
"""

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from . import report as rp
from . import synthgen
from .cycles import RESOLUTIONS, activity_profile, user_activity_profile
from .errors import CommentDynError, EmptyCorpusError, IngestError, UnknownEntityError
from .events import read_corpus, summarize, write_jsonl
from .fitting import EMConfig, fit_all_posts
from .forecast import forecast_post
from .intervals import ZERO_POLICIES

ENV_PREFIX = "COMMENTDYN_"
INPUT_ERRORS = (IngestError, EmptyCorpusError, UnknownEntityError, OSError, UnicodeDecodeError)

GLOBALS = {
    # name: (type, default, help)
    "format": (str, None, "input format: jsonl or csv (default: from the file extension)"),
    "seed": (int, 0, "master seed for every randomized step"),
    "out": (str, "out", "output directory"),
    "zero_policy": (str, "clamp", "zero-minute intervals: clamp to 0.5 or drop"),
    "anon_token": (str, "anonymous", "author name marking anonymous comments"),
    "xmin": (int, 1, "lower cutoff for comments-per-user fits"),
    "replicas": (int, 1000, "bootstrap replicas for KS p-values"),
    "workers": (int, 1, "worker processes; results do not depend on it"),
}
CHOICES = {"format": ("jsonl", "csv"), "zero_policy": ZERO_POLICIES}


def _global_parser():
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("global options")
    for name, (kind, default, text) in GLOBALS.items():
        env = ENV_PREFIX + name.upper()
        group.add_argument("--" + name.replace("_", "-"), type=kind, choices=CHOICES.get(name),
                           default=argparse.SUPPRESS,
                           help=f"{text} [default {default!r}, env {env}]")
    return parent


def build_parser():
    parent = _global_parser()
    parser = argparse.ArgumentParser(prog="commentdyn", parents=[parent],
                                     description="Statistical dynamics of comment threads.")
    parser.add_argument("--version", action="version", version=f"commentdyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_input=True):
        p = sub.add_parser(name, parents=[parent], help=help_text, description=help_text)
        if needs_input:
            p.add_argument("input", help="event log (JSONL or CSV)")
        return p

    add("ingest", "validate an event log and write it as normalized JSONL")
    add("summary", "corpus counts: posts, comments, commentators, anonymous share")
    p = add("fit", "fit every post's comment intervals (LN or DLN)")
    p.add_argument("--model", choices=("ln", "dln"), default="ln")
    p.add_argument("--ks", action="store_true", help="bootstrap KS p-value per post")
    add("users", "comments per user: power law against truncated log-normal")
    p = add("cycles", "daily and weekly activity profiles")
    p.add_argument("--author", help="profile one author's comments only")
    p.add_argument("--resolution", choices=tuple(RESOLUTIONS), help="default: both")
    p = add("synth", "generate a synthetic corpus and its ground truth", needs_input=False)
    p.add_argument("--spec", help="generator spec JSON (default: the reference spec)")
    p.add_argument("--posts", type=int, help="override the number of posts")
    p.add_argument("--name", default="corpus", help="output file stem")
    p = add("forecast", "estimate a post's final comment count from its first minutes")
    p.add_argument("--post", required=True, help="post id")
    p.add_argument("--tau", type=float, required=True, help="horizon in minutes after the post")
    p.add_argument("--boot", type=int, default=200, help="bootstrap resamples for the interval")
    p.add_argument("--level", type=float, default=0.9, help="interval coverage")
    add("report", "every analysis, as a directory of CSV files")
    return parser


def resolve(args, environ=None):
    """Fill global options from the environment, then the defaults.

    Returns the set of options given explicitly (flag or environment).
    """
    environ = os.environ if environ is None else environ
    given = set()
    for name, (kind, default, _) in GLOBALS.items():
        if hasattr(args, name):
            given.add(name)
            continue
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is None:
            setattr(args, name, default)
            continue
        try:
            value = kind(raw)
        except ValueError:
            raise SystemExit(f"commentdyn: error: {ENV_PREFIX + name.upper()}={raw!r} is not a valid {kind.__name__}")
        if name in CHOICES and value not in CHOICES[name]:
            raise SystemExit(f"commentdyn: error: {ENV_PREFIX + name.upper()} must be one of {CHOICES[name]}")
        setattr(args, name, value)
        given.add(name)
    return given


def _config(args, extra=None):
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "workers")}
    if getattr(args, "input", None):
        cfg["input"] = rp.file_digest(args.input)
    cfg.update(extra or {})
    return cfg


def _load(args):
    corpus = read_corpus(args.input, format=args.format, anon_token=args.anon_token)
    if len(corpus) == 0:
        raise EmptyCorpusError(f"{args.input}: no events")
    return corpus


def cmd_ingest(args):
    corpus = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(corpus, fh)
    rp.Bundle(args.seed, _config(args), [rp.summary_table(corpus)]).write(out)
    s = summarize(corpus)
    print(f"{s.n_posts} posts, {s.n_comments} comments, {corpus.duplicates_dropped} duplicates dropped")
    return 0


def cmd_summary(args):
    corpus = _load(args)
    s = summarize(corpus)
    rp.Bundle(args.seed, _config(args), [rp.summary_table(corpus)]).write(args.out)
    print(f"posts: {s.n_posts}\ncomments: {s.n_comments}\ncommentators: {s.n_commentators}\n"
          f"anonymous fraction: {rp.fmt(s.anonymous_fraction)}\nperiod: {s.period[0]}..{s.period[1]}")
    return 0


def cmd_fit(args):
    corpus = _load(args)
    fits = fit_all_posts(corpus, args.model, EMConfig(seed=args.seed), args.zero_policy, args.workers)
    ks = rp.post_ks(corpus, fits, args.replicas if args.ks else 0, args.seed,
                    args.zero_policy, args.workers)
    rp.Bundle(args.seed, _config(args), rp.fit_tables(corpus, fits, ks, bootstrap=args.ks)).write(args.out)
    print(rp.fit_summary_line(fits))
    return 0


def cmd_users(args):
    corpus = _load(args)
    tables = rp.user_analysis(corpus, args.xmin, args.replicas, args.seed, args.workers)
    rp.Bundle(args.seed, _config(args), tables).write(args.out)
    for row in tables[1].rows:
        print(f"{row[0]}: KS p = {rp.fmt(row[10])}" if row[10] is not None
              else f"{row[0]}: slope {rp.fmt(row[6])}, r {rp.fmt(row[8])}")
    return 0


def cmd_cycles(args):
    corpus = _load(args)
    resolutions = [args.resolution] if args.resolution else list(RESOLUTIONS)
    tables = []
    for res in resolutions:
        if args.author:
            profiles = [("author", user_activity_profile(corpus, args.author, res))]
        else:
            profiles = [(kind, activity_profile(corpus, kind, res)) for kind in ("posts", "comments")]
        for kind, p in profiles:
            rows = list(zip(range(p.mean.size), p.mean, p.std, p.counts))
            notes = (*p.notes, f"periods: {p.n_periods}, complete: {p.n_full_periods}")
            tables.append(rp.Table(f"cycles_{kind}_{res}", ("bin_index", "mean", "std", "count"),
                                   rows, notes))
            print(f"{kind} {res}: peak bin {p.peak()}" + (" (std unreliable)" if p.flagged else ""))
    rp.Bundle(args.seed, _config(args), tables).write(args.out)
    return 0


def cmd_synth(args, given):
    spec = synthgen.load_spec(args.spec) if args.spec else synthgen.reference_spec()
    if "seed" in given:
        spec = synthgen.with_seed(spec, args.seed)
    if args.posts is not None:
        spec = synthgen.GeneratorSpec.from_dict({**spec.to_dict(), "n_posts": args.posts})
    corpus, truth = synthgen.generate_corpus(spec, anon_token=args.anon_token)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path, tpath = synthgen.write_corpus(corpus, truth, out / f"{args.name}.jsonl")
    print(f"seed {spec.seed}: {len(corpus.posts)} posts, {len(corpus.comments)} comments -> {path}, {tpath}")
    return 0


def cmd_forecast(args):
    corpus = _load(args)
    f = forecast_post(corpus, args.post, args.tau, n_boot=args.boot, level=args.level, seed=args.seed)
    rows = [("post_id", f.post_id), ("tau", f.tau), ("n_observed", f.n_obs), ("estimate", f.estimate),
            ("low", f.low), ("high", f.high), ("level", f.level), ("mu", f.model.mu),
            ("sigma", f.model.sigma), ("mass_observed", f.mass_observed),
            ("prior_sigma", f.prior_sigma), ("sigma_fixed", f.sigma_fixed), ("n_boot", f.n_boot),
            ("observed_total", len(corpus.comments_by_post[args.post]))]
    table = rp.Table(f"forecast_{args.post}", ("key", "value"), rows, (f.method,))
    rp.Bundle(args.seed, _config(args), [table]).write(args.out)
    print(f"{f.post_id}: {f.n_obs} comments by {f.tau:g} min -> expected {f.estimate:.1f} "
          f"[{f.low:.1f}, {f.high:.1f}] at {f.level:g}")
    return 0


def cmd_report(args):
    corpus = _load(args)
    tables, ok = rp.build_report(corpus, args.seed, args.xmin, args.replicas, args.zero_policy,
                                 args.workers)
    rp.Bundle(args.seed, _config(args), tables).write(args.out)
    for name, status, message in tables[-1].rows:
        print(f"{name}: {status}" + (f" ({message})" if message else ""))
    return 0 if ok else 1


COMMANDS = {"ingest": cmd_ingest, "summary": cmd_summary, "fit": cmd_fit, "users": cmd_users,
            "cycles": cmd_cycles, "forecast": cmd_forecast, "report": cmd_report}


def main(argv=None, environ=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    given = resolve(args, environ)
    for name in ("replicas", "workers"):
        if getattr(args, name) < (1 if name == "workers" else 0):
            parser.error(f"--{name} is out of range")
    try:
        if args.command == "synth":
            return cmd_synth(args, given)
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as exc:
        print(f"commentdyn: error: {exc}", file=sys.stderr)
        return 2
    except (CommentDynError, ValueError) as exc:
        print(f"commentdyn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
