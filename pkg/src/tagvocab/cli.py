"""Command-line orchestration for ingest, analysis, and generation.

Exit codes: 0 success, 1 usage error, 2 input or parse failure,
3 analysis precondition failure. Every subcommand reads standard input
for `--input -` and writes its primary artifact to standard output for
`--out -`, so subcommands compose in pipelines.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

from . import __version__
from .errors import (
    ConfigError,
    EmptyStreamError,
    FitConvergenceError,
    InsufficientDataError,
    ParseError,
    TagvocabError,
    UndefinedExponentError,
    UnsortedInputError,
)
from .fit import (
    default_ranks,
    endpoint_exponent,
    last_decades_window,
    loglog_regression_exponent,
    rank_entities,
    rescale_curve,
    select_ranks,
)
from .formats import (
    dump_json,
    histogram_rows,
    open_binary_input,
    open_text_input,
    open_text_output,
    read_growth_tsv,
    sha256_file,
    write_rows,
)
from .growth import (
    ContextSelector,
    SamplingPolicy,
    stream_global_growth,
    track_entity_vocabularies,
    track_user_accumulation,
)
from .ingest import (
    CleaningPolicy,
    DatasetSummary,
    DropCounts,
    dataset_summary,
    iter_clean_posts,
    iter_parsed_posts,
    iter_tas,
    iter_tas_file,
    write_tas,
)
from .report import run_report, summary_payload
from .stats import post_length_distribution, tail_exponent
from .synth import (
    FolksonomyGenConfig,
    FolksonomyGenerator,
    PitmanYorConfig,
    PostLengthModel,
    ZipfConfig,
    iter_pitman_yor_stream,
    iter_zipf_blocks,
    paper_like_config,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_ranks(spec: str) -> list[int]:
    try:
        if ":" in spec:
            start, stop, step = (int(v) for v in spec.split(":"))
            if step < 1 or stop < start or start < 1:
                raise ValueError
            return list(range(start, stop + 1, step))
        ranks = [int(v) for v in spec.split(",")]
        if not ranks or any(r < 1 for r in ranks):
            raise ValueError
        return ranks
    except ValueError:
        raise ConfigError(
            f"bad rank spec {spec!r}; use start:stop:step or a comma list"
        ) from None


def _policy_from(args) -> CleaningPolicy:
    return CleaningPolicy(
        min_timestamp=args.min_ts,
        max_timestamp=args.max_ts,
        fold_case=not args.no_fold_case,
        dedupe_within_post=not args.keep_dup_tags,
    )


def _sampling_from(args) -> SamplingPolicy:
    return SamplingPolicy(points_per_decade=args.points_per_decade,
                          all_points=args.all_points)


def _note(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def cmd_ingest(args) -> list[str]:
    policy = _policy_from(args)
    counts = DropCounts()
    want_summary = args.summary_json is not None
    users: set[str] = set()
    resources: set[str] = set()
    tags: set[str] = set()
    totals = [0, 0]  # posts, assignments

    def censused(records):
        for rec in records:
            totals[1] += 1
            users.add(rec.user)
            resources.add(rec.resource)
            tags.add(rec.tag)
            yield rec

    with open_text_input(args.input) as fin, open_text_output(args.out) as fout:
        posts = iter_clean_posts(
            iter_parsed_posts(fin, on_error=args.on_parse_error, counts=counts),
            policy, counts,
        )

        def counted():
            for post in posts:
                totals[0] += 1
                yield post

        records = iter_tas(counted(), sort=args.sort)
        if want_summary:
            records = censused(records)
        rows = write_tas(records, fout)
    if rows == 0:
        raise EmptyStreamError("no assignments survived cleaning")
    if counts.parse:
        _note(args, f"skipped {counts.parse} malformed lines "
                    f"(first at line {counts.parse_lines[0]})")
    produced = [] if args.out == "-" else [args.out]
    if want_summary:
        summary = DatasetSummary(
            post_count=totals[0],
            dropped_empty_count=counts.empty,
            dropped_timestamp_count=counts.timestamp,
            user_count=len(users),
            resource_count=len(resources),
            distinct_tag_count=len(tags),
            total_tag_assignments=totals[1],
        )
        dump_json(args.summary_json, summary_payload(policy, summary, counts))
        if args.summary_json != "-":
            produced.append(args.summary_json)
    return produced


def cmd_summary(args) -> list[str]:
    with open_text_input(args.input) as fin:
        summary = dataset_summary(iter_tas_file(fin))
    if summary.total_tag_assignments == 0:
        raise EmptyStreamError("empty TAS; nothing to summarize")
    dump_json(args.out, summary.as_dict())
    return [] if args.out == "-" else [args.out]


def cmd_growth(args) -> list[str]:
    with open_binary_input(args.input) as fin:
        curve = stream_global_growth(fin, _sampling_from(args),
                                     approximate=args.approximate)
    if args.approximate:
        _note(args, "approximate counting: relative error about "
                    f"{100 * 1.04 / (1 << 7):.2f}% per sample")
    with open_text_output(args.out) as fout:
        write_rows(fout, curve.samples)
    return [] if args.out == "-" else [args.out]


def _entity_selection(args, order) -> list[str]:
    if args.ids:
        return args.ids.split(",")
    if args.top:
        return [e for e, _ in order[: args.top]]
    ranks = _parse_ranks(args.ranks)
    return [e for e, _ in select_ranks(order, ranks)]


def cmd_local_growth(args) -> list[str]:
    os.makedirs(args.out_dir, exist_ok=True)
    with open_text_input(args.input) as fin:
        order = rank_entities(iter_tas_file(fin), args.kind)
    ids = _entity_selection(args, order)
    selectors = [ContextSelector(args.kind, i) for i in ids]
    with open_text_input(args.input) as fin:
        curves, missing = track_entity_vocabularies(
            iter_tas_file(fin), selectors, _sampling_from(args))
    for sel in missing:
        _note(args, f"{sel.kind} {sel.id} never appears in the stream")
    produced = []
    for sel in selectors:
        if sel not in curves:
            continue
        curve = curves[sel]
        if curve.low_sample:
            _note(args, f"low-sample curve (tau_max={curve.tau_max} < 10): {sel.id}")
        name = os.path.join(args.out_dir, f"growth_{sel.kind}_{sel.id}.tsv")
        with open_text_output(name) as f:
            write_rows(f, curve.samples)
        produced.append(name)
    if not produced:
        raise EmptyStreamError("no requested entity appears in the stream")
    return produced


def cmd_users(args) -> list[str]:
    os.makedirs(args.out_dir, exist_ok=True)
    with open_text_input(args.input) as fin:
        order = rank_entities(iter_tas_file(fin), "resource")
    ids = _entity_selection(args, order)
    with open_text_input(args.input) as fin:
        curves = track_user_accumulation(iter_tas_file(fin), ids)
    produced = []
    for rid in ids:
        if rid not in curves:
            _note(args, f"resource {rid} never appears in the stream")
            continue
        name = os.path.join(args.out_dir, f"users_{rid}.tsv")
        with open_text_output(name) as f:
            write_rows(f, curves[rid].samples)
        produced.append(name)
    if not produced:
        raise EmptyStreamError("no requested resource appears in the stream")
    return produced


def cmd_postlen(args) -> list[str]:
    policy = _policy_from(args)
    counts = DropCounts()
    with open_text_input(args.input) as fin:
        lengths = [
            len(p.tags)
            for p in iter_clean_posts(
                iter_parsed_posts(fin, on_error=args.on_parse_error,
                                  counts=counts),
                policy, counts,
            )
        ]
    dist = post_length_distribution(lengths, bins_per_decade=args.bins_per_decade)
    with open_text_output(args.out) as f:
        write_rows(f, histogram_rows(dist.histogram))
    produced = [] if args.out == "-" else [args.out]
    if args.tail_out:
        with open_text_output(args.tail_out) as f:
            write_rows(f, histogram_rows(dist.tail, skip_empty=True))
        if args.tail_out != "-":
            produced.append(args.tail_out)
    if args.json:
        payload = {"mean": dist.mean, "posts": dist.histogram.total}
        try:
            fitres = tail_exponent(dist.tail, n_min=args.n_min)
            payload["tail"] = {
                "exponent": fitres.exponent,
                "n_bins": fitres.n_bins,
                "n_min": args.n_min,
                "heavy_tailed": fitres.heavy_tailed,
            }
        except InsufficientDataError as exc:
            payload["tail"] = None
            payload["tail_skip_reason"] = str(exc)
        dump_json(args.json, payload)
        if args.json != "-":
            produced.append(args.json)
    return produced


def cmd_exponents(args) -> list[str]:
    with open_text_input(args.input) as fin:
        curve = read_growth_tsv(fin)
    window = None
    if args.window:
        window = (args.window[0], args.window[1])
    elif args.last_decades:
        window = last_decades_window(curve, args.last_decades)
    ep = endpoint_exponent(curve)
    try:
        reg = loglog_regression_exponent(curve, window)
        row = (args.id, curve.tau_max, curve.n_final, ep.gamma, reg.gamma,
               reg.residual)
    except InsufficientDataError as exc:
        _note(args, f"regression unavailable: {exc}")
        row = (args.id, curve.tau_max, curve.n_final, ep.gamma, None, None)
    with open_text_output(args.out) as f:
        write_rows(f, [row])
    return [] if args.out == "-" else [args.out]


def cmd_collapse(args) -> list[str]:
    with open_text_input(args.input) as fin:
        curve = read_growth_tsv(fin)
    rescaled = rescale_curve(curve)
    with open_text_output(args.out) as f:
        write_rows(f, rescaled.samples)
    return [] if args.out == "-" else [args.out]


def _folksonomy_config(args) -> FolksonomyGenConfig:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            raw = json.load(f)
        try:
            model = PostLengthModel(**raw.pop("post_length_model"))
            local = PitmanYorConfig(**raw.pop("local_tag_process", {"d": 2 / 3,
                                                                    "theta": -0.55}))
            gproc = PitmanYorConfig(**raw.pop("global_tag_process", {"d": 0.8,
                                                                     "theta": 50.0}))
            cfg = FolksonomyGenConfig(post_length_model=model,
                                      local_tag_process=local,
                                      global_tag_process=gproc, **raw)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad folksonomy config file: {exc}") from None
    elif args.preset == "paper-like":
        cfg = paper_like_config()
    else:
        raise ConfigError("folksonomy model needs --preset paper-like or --config")
    n_posts = args.n if args.n is not None else cfg.n_posts
    return replace(cfg, n_posts=n_posts, seed=args.seed)


def cmd_synth(args) -> list[str]:
    produced = []
    if args.model == "folksonomy":
        cfg = _folksonomy_config(args)
        gen = FolksonomyGenerator(cfg)
        with open_text_output(args.out) as f:
            buf = []
            for post in gen.posts():
                buf.append(f"{post.timestamp}\t{post.user}\t{post.resource}\t"
                           + ",".join(post.tags))
                if len(buf) >= 65536:
                    f.write("\n".join(buf))
                    f.write("\n")
                    buf.clear()
            if buf:
                f.write("\n".join(buf))
                f.write("\n")
        if args.census_json:
            census = gen.census
            dump_json(args.census_json, {
                "post_count": census.post_count,
                "user_count": census.user_count,
                "resource_count": census.resource_count,
                "distinct_tag_count": census.distinct_tag_count,
                "total_tag_assignments": census.total_tag_assignments,
            })
            if args.census_json != "-":
                produced.append(args.census_json)
    else:
        if args.census_json:
            raise ConfigError("--census-json applies to the folksonomy model")
        if args.n is None:
            raise ConfigError(f"{args.model} model needs --n")
        if args.model == "zipf":
            cfg = ZipfConfig(args.alpha, args.vocabulary_cap, args.seed)
            tags = (r for block in iter_zipf_blocks(cfg, args.n)
                    for r in block.tolist())
        else:
            cfg = PitmanYorConfig(args.d, args.theta, args.seed)
            tags = iter_pitman_yor_stream(cfg, args.n)
        with open_text_output(args.out) as f:
            buf = []
            for i, tag in enumerate(tags, 1):
                buf.append(f"{i}\t{tag}\tu0\tr0")
                if len(buf) >= 65536:
                    f.write("\n".join(buf))
                    f.write("\n")
                    buf.clear()
            if buf:
                f.write("\n".join(buf))
                f.write("\n")
    if args.out != "-":
        produced.insert(0, args.out)
    return produced


def cmd_report(args) -> list[str]:
    report = run_report(
        args.input,
        args.out_dir,
        policy=_policy_from(args),
        on_parse_error=args.on_parse_error,
        sort=args.sort,
        approximate=args.approximate,
        seed=args.seed,
        ranks=_parse_ranks(args.ranks),
    )
    for entry in report["skipped"]:
        _note(args, f"skipped {entry['stage']}: {entry['reason']}")
    _note(args, f"report written to {args.out_dir} "
                f"({len(report['artifacts'])} artifacts)")
    produced = [os.path.join(args.out_dir, e["file"]) for e in report["artifacts"]]
    produced.append(os.path.join(args.out_dir, "report.json"))
    return produced


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="random seed for generators (recorded in reports)")
    common.add_argument("--threads", type=int, default=1,
                        help="reserved; analyses are single-threaded")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress notes on stderr")
    common.add_argument("--json-report", metavar="PATH",
                        help="write a machine-readable run report")

    cleaning = argparse.ArgumentParser(add_help=False)
    cleaning.add_argument("--min-ts", type=int, default=0,
                          help="drop posts before this timestamp")
    cleaning.add_argument("--max-ts", type=int, default=None,
                          help="drop posts after this timestamp "
                               "(default: ingestion wall clock)")
    cleaning.add_argument("--no-fold-case", action="store_true",
                          help="keep tag case instead of lowercasing")
    cleaning.add_argument("--keep-dup-tags", action="store_true",
                          help="keep repeated tags within one post")
    cleaning.add_argument("--on-parse-error", choices=("skip", "abort"),
                          default="abort")
    cleaning.add_argument("--sort", action="store_true",
                          help="stable-sort posts by timestamp instead of "
                               "rejecting unsorted input")

    parser = _Parser(prog="tagvocab",
                     description="Vocabulary growth analysis for tagging streams")
    parser.add_argument("--version", action="version",
                        version=f"tagvocab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common, cleaning],
                       help="posts to tag-assignment table")
    p.add_argument("--input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--summary-json", metavar="PATH")

    p = sub.add_parser("summary", parents=[common],
                       help="census of a tag-assignment table")
    p.add_argument("--input", default="-")
    p.add_argument("--out", default="-")

    p = sub.add_parser("growth", parents=[common],
                       help="global distinct-tag growth curve")
    p.add_argument("--input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--approximate", action="store_true",
                   help="memory-bounded approximate counting (error reported)")
    p.add_argument("--points-per-decade", type=int, default=50)
    p.add_argument("--all-points", action="store_true")

    p = sub.add_parser("local-growth", parents=[common],
                       help="per-entity growth curves")
    p.add_argument("--input", default="-")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=("resource", "user"), default="resource")
    p.add_argument("--ids", help="comma-separated entity ids")
    p.add_argument("--ranks", default="100:1000:100",
                   help="rank spec start:stop:step or comma list")
    p.add_argument("--top", type=int, help="track the K top-ranked entities")
    p.add_argument("--points-per-decade", type=int, default=50)
    p.add_argument("--all-points", action="store_true")

    p = sub.add_parser("users", parents=[common],
                       help="per-resource post accumulation curves")
    p.add_argument("--input", default="-")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ids", help="comma-separated resource ids")
    p.add_argument("--ranks", default="100:1000:100")
    p.add_argument("--top", type=int)

    p = sub.add_parser("postlen", parents=[common, cleaning],
                       help="post-length distribution")
    p.add_argument("--input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--tail-out", metavar="PATH",
                   help="log-binned tail view")
    p.add_argument("--json", metavar="PATH",
                   help="mean, total, and tail fit")
    p.add_argument("--n-min", type=int, default=10)
    p.add_argument("--bins-per-decade", type=int, default=10)

    p = sub.add_parser("exponents", parents=[common],
                       help="endpoint and regression exponents of one curve")
    p.add_argument("--input", default="-")
    p.add_argument("--out", default="-")
    p.add_argument("--id", default="global")
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--last-decades", type=float,
                   help="regression window covering the trailing decades")

    p = sub.add_parser("collapse", parents=[common],
                       help="rescale a curve to (tau/tau_max, n/n_final)")
    p.add_argument("--input", default="-")
    p.add_argument("--out", default="-")

    p = sub.add_parser("synth", parents=[common],
                       help="generate synthetic streams")
    p.add_argument("--model", choices=("zipf", "py", "folksonomy"),
                   required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--n", type=int,
                   help="stream length (zipf/py) or post count (folksonomy)")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--vocabulary-cap", type=int, default=None)
    p.add_argument("--d", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--preset", choices=("paper-like",))
    p.add_argument("--config", metavar="PATH",
                   help="JSON folksonomy config")
    p.add_argument("--census-json", metavar="PATH",
                   help="write the generator census (folksonomy)")

    p = sub.add_parser("report", parents=[common, cleaning],
                       help="full analysis battery over a post stream")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--approximate", action="store_true")
    p.add_argument("--ranks", default="100:1000:100")

    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "summary": cmd_summary,
    "growth": cmd_growth,
    "local-growth": cmd_local_growth,
    "users": cmd_users,
    "postlen": cmd_postlen,
    "exponents": cmd_exponents,
    "collapse": cmd_collapse,
    "synth": cmd_synth,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        produced = COMMANDS[args.command](args)
    except BrokenPipeError:
        # downstream pipe closed early; not an error for a producer, but
        # stdout must be parked on devnull so the interpreter's exit flush
        # does not trip over the dead pipe
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except ConfigError as exc:
        print(f"tagvocab {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    except (ParseError, OSError) as exc:
        print(f"tagvocab {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2
    except (EmptyStreamError, InsufficientDataError, UndefinedExponentError,
            UnsortedInputError, FitConvergenceError) as exc:
        print(f"tagvocab {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    if args.json_report:
        dump_json(args.json_report, {
            "tool": "tagvocab",
            "version": __version__,
            "command": args.command,
            "argv": list(sys.argv[1:] if argv is None else argv),
            "seed": args.seed,
            "artifacts": [
                {"file": f, "bytes": os.path.getsize(f),
                 "sha256": sha256_file(f)}
                for f in produced
            ],
            "elapsed_seconds": round(time.perf_counter() - t0, 6),
        })
    return 0


if __name__ == "__main__":
    sys.exit(main())
