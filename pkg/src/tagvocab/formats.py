"""Small TSV and JSON helpers shared by the command-line layer.

All numeric output goes through one formatter so reruns are
byte-reproducible: integers verbatim, floats at 10 significant digits,
missing values as "nan".
"""

from __future__ import annotations

import hashlib
import json
import sys
from contextlib import contextmanager
from typing import IO, Iterable, Iterator

from .errors import EmptyStreamError, ParseError
from .growth import GLOBAL, ContextSelector, GrowthCurve
from .stats import Histogram, LogBinnedHistogram


def fmt_num(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def write_rows(handle: IO[str], rows: Iterable[tuple]) -> int:
    """Write rows as tab-separated lines; returns the row count."""
    buf: list[str] = []
    n = 0
    for row in rows:
        buf.append("\t".join(fmt_num(v) for v in row))
        n += 1
        if len(buf) >= 65536:
            handle.write("\n".join(buf))
            handle.write("\n")
            buf.clear()
    if buf:
        handle.write("\n".join(buf))
        handle.write("\n")
    return n


@contextmanager
def open_text_input(path: str) -> Iterator[IO[str]]:
    """'-' means standard input."""
    if path == "-":
        yield sys.stdin
    else:
        with open(path, "r", encoding="utf-8", newline="") as f:
            yield f


@contextmanager
def open_binary_input(path: str) -> Iterator[IO[bytes]]:
    if path == "-":
        yield sys.stdin.buffer
    else:
        with open(path, "rb") as f:
            yield f


@contextmanager
def open_text_output(path: str) -> Iterator[IO[str]]:
    """'-' means standard output."""
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            yield f


def read_growth_tsv(handle: IO[str],
                    context: ContextSelector = GLOBAL) -> GrowthCurve:
    """Parse a `tau<TAB>n_distinct` curve file, checking curve invariants."""
    samples: list[tuple[int, int]] = []
    prev_tau = 0
    prev_n = 0
    for line_no, line in enumerate(handle, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected 2 columns, got {len(parts)}", line_no)
        try:
            tau, n = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer sample {line!r}", line_no) from None
        if tau <= prev_tau:
            raise ParseError(f"tau {tau} not increasing", line_no)
        if n < prev_n or n > tau:
            raise ParseError(f"n_distinct {n} breaks monotonicity bounds", line_no)
        samples.append((tau, n))
        prev_tau, prev_n = tau, n
    if not samples:
        raise EmptyStreamError("no samples; not a growth curve")
    return GrowthCurve(context, samples, samples[-1][0], samples[-1][1])


def histogram_rows(hist: Histogram | LogBinnedHistogram,
                   skip_empty: bool = False) -> Iterator[tuple]:
    """(bin_left, bin_right, count, density) rows.

    skip_empty drops zero-count bins; log-scale outputs need that so every
    emitted row survives a log transform.
    """
    for left, right, count, dens in zip(hist.edges, hist.edges[1:], hist.counts,
                                        hist.densities()):
        if skip_empty and count == 0:
            continue
        yield (float(left), float(right), count, float(dens))


def dump_json(path: str, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            block = f.read(1 << 20)
            if not block:
                break
            h.update(block)
    return h.hexdigest()
