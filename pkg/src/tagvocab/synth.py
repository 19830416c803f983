"""Seeded generators of tagging streams with known growth behavior.

Three generators, in increasing realism:
  - Zipf: i.i.d. rank-frequency draws; distinct-count exponent 1/alpha.
  - Pitman-Yor: exchangeable urn; distinct-count exponent d.
  - Folksonomy: preferential-attachment users and resources, a stitched
    exponential-body/power-tail post-length law, and per-resource
    Pitman-Yor tag processes that share a global tag pool.

All generators are deterministic for a fixed config and seed.
"""

from __future__ import annotations

import math
import random
from array import array
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import zeta

from .errors import ConfigError
from .ingest import DatasetSummary, Post, format_post_line

# longest representable post; the power tail holds ~1e-9 mass beyond this
MAX_POST_LENGTH = 100_000

_ZIPF_HEAD = 1 << 16


@dataclass(frozen=True)
class ZipfConfig:
    """i.i.d. draws with rank-frequency law p(r) proportional to r^-alpha.

    Without vocabulary_cap the support is all ranks r >= 1, which needs
    alpha > 1 to normalize; sampling is rejection-free inverse transform
    on the analytically summed tail. With a cap, any alpha >= 0 works.
    """

    alpha: float
    vocabulary_cap: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vocabulary_cap is None:
            if self.alpha <= 1:
                raise ConfigError(
                    f"alpha={self.alpha:g} is not normalizable without a "
                    "vocabulary cap; need alpha > 1"
                )
        else:
            if self.vocabulary_cap < 1:
                raise ConfigError("vocabulary_cap must be >= 1")
            if self.alpha < 0:
                raise ConfigError("alpha must be >= 0")


def _zipf_tail_rank(alpha: float, total: float, target: float) -> int:
    """Smallest rank r > head size whose cumulative mass reaches target."""
    lo = _ZIPF_HEAD + 1
    hi = lo
    while total - float(zeta(alpha, hi + 1)) < target:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if total - float(zeta(alpha, mid + 1)) >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def iter_zipf_blocks(cfg: ZipfConfig, length: int,
                     block_size: int = 1 << 20) -> Iterator[np.ndarray]:
    """Zipf(alpha) rank stream in consecutive array blocks.

    Block boundaries do not change the values: the uniform source yields
    the same sequence however it is sliced, so concatenating the blocks
    reproduces the one-shot stream while holding one block at a time.
    Blocks are int64 unless a draw lands so deep in the tail (alpha close
    to 1) that its rank does not fit in 64 bits; such blocks fall back to
    object dtype.
    """
    if length < 1:
        raise ConfigError("length must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    if cfg.vocabulary_cap is not None:
        weights = np.arange(1, cfg.vocabulary_cap + 1, dtype=float) ** -cfg.alpha
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        for start in range(0, length, block_size):
            m = min(block_size, length - start)
            yield np.searchsorted(cdf, rng.random(m), side="right") + 1
        return
    alpha = cfg.alpha
    total = float(zeta(alpha, 1))
    head_cum = np.cumsum(np.arange(1, _ZIPF_HEAD + 1, dtype=float) ** -alpha)
    for start in range(0, length, block_size):
        m = min(block_size, length - start)
        u = rng.random(m) * total
        ranks = np.searchsorted(head_cum, u, side="right") + 1
        tail = np.nonzero(ranks > _ZIPF_HEAD)[0]
        if tail.size:
            vals = [_zipf_tail_rank(alpha, total, float(u[i])) for i in tail]
            if max(vals) > np.iinfo(np.int64).max:
                out = ranks.astype(object)
                for i, v in zip(tail, vals):
                    out[int(i)] = v
                yield out
                continue
            ranks[tail] = vals
        yield ranks


def gen_zipf_stream(cfg: ZipfConfig, length: int) -> np.ndarray:
    """Array of `length` integer tag ranks (1-based), i.i.d. Zipf(alpha).

    Usually int64; object dtype when any rank overflows 64 bits.
    """
    blocks = list(iter_zipf_blocks(cfg, length, block_size=length))
    return blocks[0] if len(blocks) == 1 else np.concatenate(blocks)


@dataclass(frozen=True)
class PitmanYorConfig:
    """Two-parameter urn: discount d in [0, 1), strength theta > -d."""

    d: float
    theta: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.d < 1:
            raise ConfigError(f"discount d={self.d:g} outside [0, 1)")
        if self.theta <= -self.d:
            raise ConfigError(
                f"strength theta={self.theta:g} must exceed -d={-self.d:g}"
            )


class PitmanYorSampler:
    """Exact sequential sampler, valid on the whole (d, theta) range.

    Step t+1 opens a new table with probability (theta + d*K)/(theta + t);
    otherwise it picks a uniform past occurrence and accepts its table k
    with probability (n_k - d)/n_k, retrying on rejection. Marginally this
    reuses table k with probability (n_k - d)/(theta + t), which stays
    correct for negative theta where one-shot weighted sampling does not.
    """

    __slots__ = ("d", "theta", "tables", "counts", "K", "t")

    def __init__(self, d: float, theta: float):
        PitmanYorConfig(d, theta)
        self.d = d
        self.theta = theta
        self.tables = array("i")
        self.counts = array("i")
        self.K = 0
        self.t = 0

    def draw(self, u) -> int:
        """One draw; u is a callable returning uniforms in [0, 1)."""
        t = self.t
        if t == 0 or u() * (self.theta + t) < self.theta + self.d * self.K:
            k = self.K
            self.K = k + 1
            self.counts.append(1)
        else:
            tables = self.tables
            counts = self.counts
            d = self.d
            while True:
                k = tables[int(u() * t)]
                nk = counts[k]
                if u() * nk < nk - d:
                    counts[k] = nk + 1
                    break
        self.tables.append(k)
        self.t = t + 1
        return k


def iter_pitman_yor_stream(cfg: PitmanYorConfig, length: int) -> Iterator[int]:
    """Integer tag ids from one Pitman-Yor path, one draw at a time.

    The sampler state costs four bytes per draw (its occurrence slots);
    nothing else accumulates, so long streams can be written out as drawn
    without the boxed-int list gen_pitman_yor_stream builds.
    """
    if length < 1:
        raise ConfigError("length must be >= 1")
    sampler = PitmanYorSampler(cfg.d, cfg.theta)
    u = random.Random(cfg.seed).random
    draw = sampler.draw
    for _ in range(length):
        yield draw(u)


def gen_pitman_yor_stream(cfg: PitmanYorConfig, length: int) -> list[int]:
    """List of `length` integer tag ids from one Pitman-Yor path."""
    return list(iter_pitman_yor_stream(cfg, length))


def expected_distinct_count(d: float, theta: float, length: int) -> float:
    """Exact E[K] after `length` draws via the linear expectation recursion."""
    PitmanYorConfig(d, theta)
    if length < 0:
        raise ConfigError("length must be >= 0")
    ek = 0.0
    for t in range(length):
        ek += (theta + d * ek) / (theta + t) if t else 1.0
    return ek


@dataclass(frozen=True)
class PostLengthModel:
    """Stitched post-length law on 1..MAX_POST_LENGTH.

    pmf(n) proportional to exp(-body_rate*n) up to `crossover`, continuing
    as a power tail n^-tail_exponent beyond it, matched at the crossover.
    """

    body_rate: float
    tail_exponent: float = 3.5
    crossover: int = 10

    def __post_init__(self) -> None:
        if self.body_rate <= 0:
            raise ConfigError("body_rate must be > 0")
        if self.tail_exponent <= 1:
            raise ConfigError("tail_exponent must be > 1")
        if not 1 <= self.crossover <= MAX_POST_LENGTH:
            raise ConfigError(f"crossover must be in [1, {MAX_POST_LENGTH}]")

    def pmf(self) -> np.ndarray:
        n = np.arange(1, MAX_POST_LENGTH + 1, dtype=float)
        xo = float(self.crossover)
        body = np.exp(-self.body_rate * n)
        tail = math.exp(-self.body_rate * xo) * xo**self.tail_exponent \
            * n**-self.tail_exponent
        p = np.where(n <= xo, body, tail)
        return p / p.sum()

    def mean(self) -> float:
        p = self.pmf()
        return float(np.dot(np.arange(1, MAX_POST_LENGTH + 1, dtype=float), p))


def solve_body_rate(mean: float, tail_exponent: float = 3.5,
                    crossover: int = 10) -> float:
    """Body rate whose stitched model has the requested mean length."""
    lo, hi = 0.02, 2.0
    if not (PostLengthModel(hi, tail_exponent, crossover).mean()
            < mean < PostLengthModel(lo, tail_exponent, crossover).mean()):
        raise ConfigError(f"mean={mean:g} not reachable with rates in [{lo}, {hi}]")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if PostLengthModel(mid, tail_exponent, crossover).mean() > mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FolksonomyGenConfig:
    """End-to-end stream generator configuration.

    resource_popularity and user_activity are the innovation probabilities
    of the Yule-Simon preferential-attachment processes (smaller values
    mean stronger rich-get-richer). local_tag_process is the per-resource
    template; its seed field is ignored, the generator seed drives all
    randomness. global_tag_process backs the shared pool that new local
    tables draw their tag values from; global_coupling is the probability
    of bypassing the local process entirely for one assignment.
    """

    n_posts: int
    post_length_model: PostLengthModel
    resource_popularity: float = 0.2
    user_activity: float = 0.13
    local_tag_process: PitmanYorConfig = PitmanYorConfig(2 / 3, -0.55)
    global_coupling: float = 0.01
    global_tag_process: PitmanYorConfig = PitmanYorConfig(0.8, 50.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_posts < 1:
            raise ConfigError("n_posts must be >= 1")
        for name in ("resource_popularity", "user_activity", "global_coupling"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name}={v:g} outside [0, 1]")


def paper_like_config(n_posts: int = 1_000_000, seed: int = 42) -> FolksonomyGenConfig:
    """Calibrated preset: mean post length 3.4 with a -3.5 power tail,
    local growth exponent 2/3, global growth exponent near 0.8, linear
    per-resource post accumulation."""
    model = PostLengthModel(solve_body_rate(3.4, 3.5, 10), 3.5, 10)
    return FolksonomyGenConfig(n_posts=n_posts, post_length_model=model, seed=seed)


@dataclass(frozen=True)
class GeneratorCensus:
    """What the generator actually emitted; compares to an ingest summary."""

    post_count: int
    user_count: int
    resource_count: int
    distinct_tag_count: int
    total_tag_assignments: int

    def as_summary(self) -> DatasetSummary:
        return DatasetSummary(
            post_count=self.post_count,
            dropped_empty_count=0,
            dropped_timestamp_count=0,
            user_count=self.user_count,
            resource_count=self.resource_count,
            distinct_tag_count=self.distinct_tag_count,
            total_tag_assignments=self.total_tag_assignments,
        )


_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class _PairFilter:
    """Two-probe Bloom filter over (resource, user) pairs.

    No false negatives, so a pair reported unseen really is unseen; rare
    false positives only cost a harmless user redraw. Sized at 48 bits per
    expected pair (under 0.1% false-positive rate).
    """

    def __init__(self, expected: int):
        bits = 1 << max(23, (expected * 48 - 1).bit_length())
        self.mask = bits - 1
        self.buf = bytearray(bits >> 3)

    def test_and_set(self, r: int, u: int) -> bool:
        h = _splitmix64((r << 32) | u)
        i1 = h & self.mask
        i2 = (h >> 32) & self.mask
        b1, m1 = i1 >> 3, 1 << (i1 & 7)
        b2, m2 = i2 >> 3, 1 << (i2 & 7)
        buf = self.buf
        hit = (buf[b1] & m1) and (buf[b2] & m2)
        buf[b1] |= m1
        buf[b2] |= m2
        return bool(hit)


class FolksonomyGenerator:
    """Sequential post generator; census becomes available after posts()
    is exhausted.

    Per post: resource and user via Yule-Simon attachment (uniform over
    the post history, innovating at the configured rates), with each
    (user, resource) pair emitted at most once; a length from the stitched
    model; tags from the resource's Pitman-Yor process whose new tables
    fetch values from the shared global process. Tags repeat within the
    organic draws and are deduplicated, so short on-post vocabularies are
    topped up in order from the resource's own tags, then fresh global
    draws, then (vanishingly rarely) newly minted tags.
    """

    def __init__(self, cfg: FolksonomyGenConfig):
        self.cfg = cfg
        self.minted = 0
        self._census: GeneratorCensus | None = None
        cdf = np.cumsum(cfg.post_length_model.pmf())
        cdf[-1] = 1.0
        self._length_cdf = cdf.tolist()

    @property
    def census(self) -> GeneratorCensus:
        if self._census is None:
            raise RuntimeError("census is available after posts() is exhausted")
        return self._census

    def posts(self) -> Iterator[Post]:
        cfg = self.cfg
        u = random.Random(cfg.seed).random
        nu_r = cfg.resource_popularity
        nu_u = cfg.user_activity
        coupling = cfg.global_coupling
        cdf = self._length_cdf
        d_loc = cfg.local_tag_process.d
        th_loc = cfg.local_tag_process.theta
        gpy = PitmanYorSampler(cfg.global_tag_process.d, cfg.global_tag_process.theta)
        gdraw = gpy.draw
        locals_by_rid: dict[int, PitmanYorSampler] = {}
        vals_by_rid: dict[int, list[int]] = {}
        res_hist = array("i")
        usr_hist = array("i")
        pairs = _PairFilter(cfg.n_posts)
        emitted = bytearray(1 << 16)
        n_res = 0
        n_usr = 0
        distinct = 0
        assignments = 0

        for p in range(cfg.n_posts):
            if n_res == 0 or u() < nu_r:
                rid = n_res
                n_res += 1
            else:
                rid = res_hist[int(u() * p)]

            tries = 0
            while True:
                if n_usr == 0 or u() < nu_u:
                    uid = n_usr
                    n_usr += 1
                    pairs.test_and_set(rid, uid)
                    break
                uid = usr_hist[int(u() * p)]
                if not pairs.test_and_set(rid, uid):
                    break
                tries += 1
                if tries >= 12:
                    uid = n_usr
                    n_usr += 1
                    pairs.test_and_set(rid, uid)
                    break
            res_hist.append(rid)
            usr_hist.append(uid)

            ln = bisect_right(cdf, u()) + 1

            loc = locals_by_rid.get(rid)
            if loc is None:
                loc = PitmanYorSampler(d_loc, th_loc)
                locals_by_rid[rid] = loc
                lvals = vals_by_rid[rid] = []
            else:
                lvals = vals_by_rid[rid]
            ldraw = loc.draw
            seen = set()
            tags = []
            budget = 8 * ln + 24
            while budget and len(tags) < ln:
                budget -= 1
                if coupling and u() < coupling:
                    tv = gdraw(u)
                else:
                    k = ldraw(u)
                    if k == len(lvals):
                        lvals.append(gdraw(u))
                    tv = lvals[k]
                if tv not in seen:
                    seen.add(tv)
                    tags.append(tv)
            if len(tags) < ln:
                for tv in lvals:
                    if tv not in seen:
                        seen.add(tv)
                        tags.append(tv)
                        if len(tags) == ln:
                            break
            if len(tags) < ln:
                budget = 4 * (ln - len(tags)) + 16
                while budget and len(tags) < ln:
                    budget -= 1
                    tv = gdraw(u)
                    if tv not in seen:
                        seen.add(tv)
                        tags.append(tv)
            while len(tags) < ln:
                tv = gpy.K
                gpy.counts.append(1)
                gpy.tables.append(tv)
                gpy.K = tv + 1
                gpy.t += 1
                self.minted += 1
                tags.append(tv)

            assignments += ln
            for tv in tags:
                if tv >= len(emitted):
                    emitted.extend(b"\0" * (tv + 4096 - len(emitted)))
                if not emitted[tv]:
                    emitted[tv] = 1
                    distinct += 1

            yield Post(p + 1, f"u{uid}", f"r{rid}", [str(t) for t in tags])

        self._census = GeneratorCensus(cfg.n_posts, n_usr, n_res, distinct,
                                       assignments)


def gen_folksonomy(cfg: FolksonomyGenConfig) -> Iterator[str]:
    """Post stream in the ingest line format."""
    gen = FolksonomyGenerator(cfg)
    for post in gen.posts():
        yield format_post_line(post)
