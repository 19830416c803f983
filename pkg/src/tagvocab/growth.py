"""Intrinsic-time clocks and distinct-tag vocabulary trackers.

Intrinsic time tau is the index into the time-ordered tag-assignment
stream, either globally or restricted to one resource or user. Growth
curves sample the distinct-tag count N(tau) at checkpoints.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

from .errors import ConfigError, EmptyStreamError, ParseError
from .ingest import TasRecord


@dataclass(frozen=True)
class SamplingPolicy:
    """Where to sample a growth curve.

    Default: logarithmically spaced checkpoints, 50 per decade, plus tau=1
    and the final tau. all_points=True samples every assignment (dense; for
    small streams and oracle comparisons).
    """

    points_per_decade: int = 50
    all_points: bool = False

    def __post_init__(self) -> None:
        if self.points_per_decade < 1:
            raise ConfigError("points_per_decade must be >= 1")


def iter_checkpoints(points_per_decade: int) -> Iterator[int]:
    """Yield strictly increasing integer checkpoints ceil(10^(k/ppd))."""
    last = 0
    k = 0
    while True:
        # the epsilon keeps exact powers of ten from rounding up one step
        v = math.ceil(10 ** (k / points_per_decade) - 1e-9)
        k += 1
        if v > last:
            last = v
            yield v


@dataclass(frozen=True)
class ContextSelector:
    """Which sub-stream a curve belongs to: the whole system, one resource, or one user."""

    kind: str
    id: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("global", "resource", "user"):
            raise ConfigError(f"unknown context kind {self.kind!r}")
        if (self.id is None) != (self.kind == "global"):
            raise ConfigError("id must be present exactly when kind is not global")


GLOBAL = ContextSelector("global")


@dataclass
class GrowthCurve:
    """Sampled (tau, N(tau)) sequence for one context."""

    context: ContextSelector
    samples: list[tuple[int, int]]
    tau_max: int
    n_final: int

    @property
    def low_sample(self) -> bool:
        # exponent estimates below ten assignments are unreliable
        return self.tau_max < 10


@dataclass
class UserAccumulationCurve:
    """Per-resource (tau, U) after each post; U counts posts on the resource."""

    resource: str
    samples: list[tuple[int, int]]


class ApproxDistinct:
    """HyperLogLog distinct counter with a keyed 64-bit hash.

    Flagged, never silent: relative_error reports the standard error of the
    estimator (1.04 / sqrt(m)). Hashing is keyed blake2b so estimates are
    reproducible across processes and platforms.
    """

    _KEY = b"tagvocab-hll"

    def __init__(self, precision: int = 14):
        if not 4 <= precision <= 18:
            raise ConfigError("precision must be in [4, 18]")
        self.precision = precision
        self.m = 1 << precision
        self.registers = bytearray(self.m)
        self.relative_error = 1.04 / math.sqrt(self.m)

    def add(self, item: str | bytes) -> None:
        if isinstance(item, str):
            item = item.encode("utf-8")
        h = int.from_bytes(
            hashlib.blake2b(item, digest_size=8, key=self._KEY).digest(), "big"
        )
        idx = h >> (64 - self.precision)
        rest = h & ((1 << (64 - self.precision)) - 1)
        # rank = position of the leftmost 1 bit in the remaining bits
        rank = (64 - self.precision) - rest.bit_length() + 1
        if rank > self.registers[idx]:
            self.registers[idx] = rank

    def update(self, items: Iterable[str | bytes]) -> None:
        for item in items:
            self.add(item)

    def estimate(self) -> float:
        m = self.m
        alpha = 0.7213 / (1 + 1.079 / m)
        inv_sum = 0.0
        zeros = 0
        for r in self.registers:
            inv_sum += 2.0 ** -r
            if r == 0:
                zeros += 1
        raw = alpha * m * m / inv_sum
        if raw <= 2.5 * m and zeros:
            return m * math.log(m / zeros)
        return raw

    def __len__(self) -> int:
        return int(round(self.estimate()))


class VocabularyTracker:
    """Streaming distinct-tag counter that records a growth curve.

    Exact mode keeps a hash set; approximate mode uses ApproxDistinct and
    clamps the recorded samples so the curve invariants (monotone,
    N(tau) <= tau) hold for the estimates too.
    """

    def __init__(self, context: ContextSelector = GLOBAL,
                 sampling: SamplingPolicy = SamplingPolicy(),
                 approximate: bool = False, precision: int = 14):
        self.context = context
        self.sampling = sampling
        self.approximate = approximate
        self._approx = ApproxDistinct(precision) if approximate else None
        self._seen: set = set()
        self.samples: list[tuple[int, int]] = []
        self.tau = 0
        self._last_n = 0
        if sampling.all_points:
            self._ckpts = None
            self._next_ckpt = 1
        else:
            self._ckpts = iter_checkpoints(sampling.points_per_decade)
            self._next_ckpt = next(self._ckpts)

    @property
    def relative_error(self) -> float:
        return self._approx.relative_error if self._approx else 0.0

    def _current_n(self) -> int:
        if self._approx is not None:
            est = int(round(self._approx.estimate()))
            # keep estimates monotone and within the hard bound N <= tau
            est = max(est, self._last_n)
            est = min(est, self.tau)
            self._last_n = est
            return est
        return len(self._seen)

    def add(self, tag) -> None:
        if self._approx is not None:
            self._approx.add(tag)
        else:
            self._seen.add(tag)
        self.tau += 1
        if self.tau == self._next_ckpt:
            self.samples.append((self.tau, self._current_n()))
            if self._ckpts is None:
                self._next_ckpt += 1
            else:
                self._next_ckpt = next(self._ckpts)

    def add_many(self, tags: Iterable) -> None:
        for tag in tags:
            self.add(tag)

    def finish(self) -> GrowthCurve:
        if self.tau == 0:
            raise EmptyStreamError("no assignments seen; no curve definable")
        if not self.samples or self.samples[-1][0] != self.tau:
            self.samples.append((self.tau, self._current_n()))
        return GrowthCurve(self.context, self.samples, self.tau, self.samples[-1][1])


def track_global_vocabulary(tags: Iterable, sampling: SamplingPolicy = SamplingPolicy(),
                            approximate: bool = False) -> GrowthCurve:
    """Track N(tau) over the full assignment stream (tags in stream order)."""
    tracker = VocabularyTracker(GLOBAL, sampling, approximate=approximate)
    tracker.add_many(tags)
    return tracker.finish()


def track_entity_vocabularies(
    tas: Iterable[TasRecord],
    entities: Iterable[ContextSelector],
    sampling: SamplingPolicy = SamplingPolicy(),
) -> tuple[dict[ContextSelector, GrowthCurve], list[ContextSelector]]:
    """Track local growth curves for many entities in a single pass.

    Local tau for an entity counts the assignments involving it. Entities
    never seen in the stream are omitted from the result map and returned
    in the side list instead.
    """
    by_resource: dict[str, VocabularyTracker] = {}
    by_user: dict[str, VocabularyTracker] = {}
    for sel in entities:
        if sel.kind == "resource":
            by_resource[sel.id] = VocabularyTracker(sel, sampling)
        elif sel.kind == "user":
            by_user[sel.id] = VocabularyTracker(sel, sampling)
        else:
            raise ConfigError("entity selectors must be resource- or user-kind")
    # intern tags so many trackers share one string object per distinct tag
    canon: dict[str, str] = {}
    for rec in tas:
        tag = canon.setdefault(rec.tag, rec.tag)
        tracker = by_resource.get(rec.resource)
        if tracker is not None:
            tracker.add(tag)
        tracker = by_user.get(rec.user)
        if tracker is not None:
            tracker.add(tag)
    curves: dict[ContextSelector, GrowthCurve] = {}
    missing: list[ContextSelector] = []
    for tracker in list(by_resource.values()) + list(by_user.values()):
        if tracker.tau == 0:
            missing.append(tracker.context)
        else:
            curves[tracker.context] = tracker.finish()
    return curves, missing


def entity_endpoints(
    tas: Iterable[TasRecord],
) -> tuple[dict[str, tuple[int, int]], dict[str, tuple[int, int]]]:
    """(tau_max, n_distinct) for every resource and every user, one pass.

    Endpoint-only bookkeeping for population studies: keeps each entity's
    distinct-tag set but samples no curve, so bulk memory stays at one set
    entry per (entity, distinct tag).
    """
    res: dict[str, list] = {}
    usr: dict[str, list] = {}
    canon: dict[str, str] = {}
    for rec in tas:
        tag = canon.setdefault(rec.tag, rec.tag)
        for key, table in ((rec.resource, res), (rec.user, usr)):
            ent = table.get(key)
            if ent is None:
                table[key] = ent = [0, set()]
            ent[0] += 1
            ent[1].add(tag)
    return (
        {k: (tau, len(seen)) for k, (tau, seen) in res.items()},
        {k: (tau, len(seen)) for k, (tau, seen) in usr.items()},
    )


def track_user_accumulation(
    tas: Iterable[TasRecord], resources: Iterable[str]
) -> dict[str, UserAccumulationCurve]:
    """Per-resource U(tau): posts accumulated against local intrinsic time.

    Each post contributes exactly one user and advances tau by its tag
    count. A post is a maximal run of adjacent records sharing
    (user, resource).
    """
    wanted = set(resources)
    state: dict[str, tuple[int, int, list[tuple[int, int]]]] = {
        r: (0, 0, []) for r in wanted
    }
    prev_key: tuple[str, str] | None = None
    run_resource: str | None = None
    run_len = 0

    def flush() -> None:
        if run_resource is not None and run_resource in state:
            tau, users, samples = state[run_resource]
            tau += run_len
            users += 1
            samples.append((tau, users))
            state[run_resource] = (tau, users, samples)

    for rec in tas:
        key = (rec.user, rec.resource)
        if key != prev_key:
            flush()
            prev_key = key
            run_resource = rec.resource
            run_len = 0
        run_len += 1
    flush()
    return {
        r: UserAccumulationCurve(r, samples)
        for r, (tau, users, samples) in state.items()
        if samples
    }


def stream_global_growth(stream: BinaryIO,
                         sampling: SamplingPolicy = SamplingPolicy(),
                         approximate: bool = False) -> GrowthCurve:
    """Single-pass global growth over a TAS byte stream.

    Performance path for large tables: reads in chunks, touches only the
    tag column, and batches set updates between checkpoints so memory stays
    bounded by the distinct-tag set plus a constant-size buffer. Index
    consecutiveness is spot-checked at checkpoints.
    """
    tracker = _BulkTracker(sampling, approximate)
    rest = b""
    while True:
        chunk = stream.read(1 << 22)
        if not chunk:
            break
        if rest:
            chunk = rest + chunk
        lines = chunk.split(b"\n")
        rest = lines.pop()
        tracker.feed(lines)
    if rest:
        tracker.feed([rest])
    return tracker.finish()


class _BulkTracker:
    """Chunked exact/approximate tracker used by stream_global_growth."""

    FLUSH = 1 << 18

    def __init__(self, sampling: SamplingPolicy, approximate: bool):
        self.sampling = sampling
        self.approximate = approximate
        self._approx = ApproxDistinct() if approximate else None
        self._seen: set[bytes] = set()
        self._pending: list[bytes] = []
        self.samples: list[tuple[int, int]] = []
        self.tau = 0
        self._last_n = 0
        if sampling.all_points:
            self._ckpts = None
            self._next = 1
        else:
            self._ckpts = iter_checkpoints(sampling.points_per_decade)
            self._next = next(self._ckpts)

    def _absorb(self) -> None:
        if self._approx is not None:
            self._approx.update(self._pending)
        else:
            self._seen.update(self._pending)
        self._pending.clear()

    def _n(self) -> int:
        if self._approx is not None:
            est = int(round(self._approx.estimate()))
            est = min(max(est, self._last_n), self.tau)
            self._last_n = est
            return est
        return len(self._seen)

    def feed(self, lines: list[bytes]) -> None:
        pending = self._pending
        tau = self.tau
        nxt = self._next
        for ln in lines:
            if not ln:
                continue
            a = ln.index(b"\t") + 1
            b = ln.index(b"\t", a)
            pending.append(ln[a:b])
            tau += 1
            if tau == nxt:
                self.tau = tau
                self._absorb()
                pending = self._pending
                # cheap index spot-check at the sampled row
                if int(ln[: a - 1]) != tau:
                    raise ParseError(
                        f"TAS index {ln[:a - 1].decode()} at row {tau}; "
                        "indices must be consecutive from 1"
                    )
                self.samples.append((tau, self._n()))
                if self._ckpts is None:
                    nxt += 1
                else:
                    nxt = next(self._ckpts)
            elif len(pending) >= self.FLUSH:
                self.tau = tau
                self._absorb()
                pending = self._pending
        self.tau = tau
        self._next = nxt

    def finish(self) -> GrowthCurve:
        if self.tau == 0:
            raise EmptyStreamError("no assignments seen; no curve definable")
        self._absorb()
        if not self.samples or self.samples[-1][0] != self.tau:
            self.samples.append((self.tau, self._n()))
        return GrowthCurve(GLOBAL, self.samples, self.tau, self.samples[-1][1])
