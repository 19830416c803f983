"""Parse raw post logs, apply cleaning rules, and build the tag-assignment table.

Input format: one post per line,
    timestamp<TAB>user<TAB>resource<TAB>tag1,tag2,...
Tags are comma separated; commas are forbidden inside tags and tabs inside
all fields.

The tag-assignment (TAS) table expands each post into one row per tag,
    index<TAB>tag<TAB>user<TAB>resource
where index is the global intrinsic time: consecutive from 1, rows of one
post adjacent, tag order preserved.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

from .errors import ConfigError, ParseError, UnsortedInputError


@dataclass
class Post:
    """One tagging event: a user attaches an ordered list of tags to a resource."""

    timestamp: int
    user: str
    resource: str
    tags: list[str]


@dataclass(frozen=True)
class CleaningPolicy:
    """Cleaning rules applied to parsed posts.

    max_timestamp=None means "the wall clock at ingestion time"; it is kept
    None in serialized summaries so repeated runs stay byte-identical.
    """

    min_timestamp: int = 0
    max_timestamp: int | None = None
    fold_case: bool = True
    dedupe_within_post: bool = True

    def __post_init__(self) -> None:
        if self.max_timestamp is not None and not self.min_timestamp < self.max_timestamp:
            raise ConfigError(
                f"min_timestamp ({self.min_timestamp}) must be below "
                f"max_timestamp ({self.max_timestamp})"
            )

    def effective_max(self) -> int:
        return self.max_timestamp if self.max_timestamp is not None else int(time.time())

    def as_dict(self) -> dict:
        return {
            "min_timestamp": self.min_timestamp,
            "max_timestamp": self.max_timestamp,
            "fold_case": self.fold_case,
            "dedupe_within_post": self.dedupe_within_post,
        }


@dataclass
class TasRecord:
    """One tag assignment: (tag, user, resource) at global intrinsic time `index`."""

    index: int
    tag: str
    user: str
    resource: str


@dataclass
class DatasetSummary:
    """Census of a cleaned dataset."""

    post_count: int = 0
    dropped_empty_count: int = 0
    dropped_timestamp_count: int = 0
    user_count: int = 0
    resource_count: int = 0
    distinct_tag_count: int = 0
    total_tag_assignments: int = 0

    def as_dict(self) -> dict:
        return {
            "post_count": self.post_count,
            "dropped_empty_count": self.dropped_empty_count,
            "dropped_timestamp_count": self.dropped_timestamp_count,
            "user_count": self.user_count,
            "resource_count": self.resource_count,
            "distinct_tag_count": self.distinct_tag_count,
            "total_tag_assignments": self.total_tag_assignments,
        }


@dataclass
class DropCounts:
    """Mutable drop tally filled in while cleaning streams."""

    empty: int = 0
    timestamp: int = 0
    parse: int = 0
    seen: int = 0
    parse_lines: list[int] = field(default_factory=list)


def parse_post_line(line: str, line_no: int | None = None) -> Post:
    """Parse one input line into a Post. No cleaning is applied here."""
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 4:
        raise ParseError(f"expected 4 tab-separated fields, got {len(fields)}", line_no)
    ts_text, user, resource, tag_field = fields
    try:
        timestamp = int(ts_text)
    except ValueError:
        raise ParseError(f"non-integer timestamp {ts_text!r}", line_no) from None
    if not user or not resource:
        raise ParseError("empty user or resource field", line_no)
    tags = [t for t in tag_field.split(",") if t]
    return Post(timestamp, user, resource, tags)


def format_post_line(post: Post) -> str:
    return f"{post.timestamp}\t{post.user}\t{post.resource}\t{','.join(post.tags)}"


def iter_parsed_posts(lines: Iterable[str], on_error: str = "abort",
                      counts: DropCounts | None = None) -> Iterator[Post]:
    """Parse a line stream; skip or abort on malformed lines per `on_error`."""
    if on_error not in ("skip", "abort"):
        raise ConfigError(f"on_error must be 'skip' or 'abort', got {on_error!r}")
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            yield parse_post_line(line, line_no)
        except ParseError:
            if on_error == "abort":
                raise
            if counts is not None:
                counts.parse += 1
                counts.parse_lines.append(line_no)


def clean_post(post: Post, policy: CleaningPolicy, max_ts: int) -> Post | None:
    """Apply the policy to one post; return None when the post is dropped.

    A None return means empty tags or out-of-window timestamp; the caller
    tells the two apart by checking the tag list.
    """
    if not post.tags:
        return None
    if not policy.min_timestamp <= post.timestamp <= max_ts:
        return None
    tags = post.tags
    if policy.fold_case:
        tags = [t.lower() for t in tags]
    if policy.dedupe_within_post:
        # keep the first occurrence of each tag, preserving post order
        seen: set[str] = set()
        deduped = []
        for t in tags:
            if t not in seen:
                seen.add(t)
                deduped.append(t)
        tags = deduped
    return Post(post.timestamp, post.user, post.resource, tags)


def iter_clean_posts(posts: Iterable[Post], policy: CleaningPolicy,
                     counts: DropCounts) -> Iterator[Post]:
    """Streaming cleaner; drop tallies accumulate into `counts`."""
    max_ts = policy.effective_max()
    for post in posts:
        counts.seen += 1
        if not post.tags:
            counts.empty += 1
            continue
        cleaned = clean_post(post, policy, max_ts)
        if cleaned is None:
            counts.timestamp += 1
            continue
        yield cleaned


def clean_posts(posts: Iterable[Post],
                policy: CleaningPolicy) -> tuple[list[Post], DropCounts]:
    """Clean a post sequence, preserving relative order; return drops too."""
    counts = DropCounts()
    cleaned = list(iter_clean_posts(posts, policy, counts))
    return cleaned, counts


def iter_tas(posts: Iterable[Post], sort: bool = False) -> Iterator[TasRecord]:
    """Expand cleaned posts into TAS records with consecutive global indices.

    Posts must arrive sorted by timestamp (ties keep input order); a
    decreasing timestamp raises UnsortedInputError unless sort=True, which
    buffers the input for a stable timestamp sort first.
    """
    if sort:
        posts = sorted(posts, key=lambda p: p.timestamp)
    index = 0
    last_ts = None
    for post in posts:
        if last_ts is not None and post.timestamp < last_ts:
            raise UnsortedInputError(
                f"timestamp {post.timestamp} after {last_ts}; "
                "pass sort=True (CLI: --sort) to sort first"
            )
        last_ts = post.timestamp
        for tag in post.tags:
            index += 1
            yield TasRecord(index, tag, post.user, post.resource)


def build_tas(posts: Iterable[Post], sort: bool = False) -> list[TasRecord]:
    return list(iter_tas(posts, sort=sort))


def dataset_summary(tas: Iterable[TasRecord], dropped_empty_count: int = 0,
                    dropped_timestamp_count: int = 0,
                    post_count: int | None = None) -> DatasetSummary:
    """Exact census of a TAS table.

    When post_count is not supplied it is recovered from the table itself:
    a post is a maximal run of adjacent records sharing (user, resource).
    """
    users: set[str] = set()
    resources: set[str] = set()
    tags: set[str] = set()
    total = 0
    runs = 0
    prev_key = None
    for rec in tas:
        total += 1
        users.add(rec.user)
        resources.add(rec.resource)
        tags.add(rec.tag)
        key = (rec.user, rec.resource)
        if key != prev_key:
            runs += 1
            prev_key = key
    return DatasetSummary(
        post_count=post_count if post_count is not None else runs,
        dropped_empty_count=dropped_empty_count,
        dropped_timestamp_count=dropped_timestamp_count,
        user_count=len(users),
        resource_count=len(resources),
        distinct_tag_count=len(tags),
        total_tag_assignments=total,
    )


def format_tas_line(rec: TasRecord) -> str:
    return f"{rec.index}\t{rec.tag}\t{rec.user}\t{rec.resource}"


def parse_tas_line(line: str, line_no: int | None = None) -> TasRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 4:
        raise ParseError(f"expected 4 tab-separated TAS fields, got {len(fields)}", line_no)
    try:
        index = int(fields[0])
    except ValueError:
        raise ParseError(f"non-integer TAS index {fields[0]!r}", line_no) from None
    return TasRecord(index, fields[1], fields[2], fields[3])


def iter_tas_file(lines: Iterable[str]) -> Iterator[TasRecord]:
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        yield parse_tas_line(line, line_no)


def read_tas(path: str) -> Iterator[TasRecord]:
    """Stream TAS records from a file path."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        yield from iter_tas_file(f)


def write_tas(records: Iterable[TasRecord], out: TextIO) -> int:
    """Write TAS lines; returns the number of rows written."""
    n = 0
    buf: list[str] = []
    for rec in records:
        buf.append(format_tas_line(rec))
        n += 1
        if len(buf) >= 65536:
            out.write("\n".join(buf))
            out.write("\n")
            buf.clear()
    if buf:
        out.write("\n".join(buf))
        out.write("\n")
    return n
