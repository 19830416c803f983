"""Naive reference implementations the tests trust over the package.

Everything here favors obviousness over speed: distinct counts rescan the
stream from scratch, the urn sampler walks all tables, ranking counts posts
directly. Slow on purpose.
"""
from __future__ import annotations

import math
import random

import numpy as np

from tagvocab.ingest import Post


def distinct_at(tags: list, tau: int) -> int:
    """Distinct count after the first tau assignments, by full rescan."""
    return len(set(tags[:tau]))


def naive_curve_points(tags: list, taus: list[int]) -> list[tuple[int, int]]:
    return [(tau, distinct_at(tags, tau)) for tau in taus]


def split_by_entity(posts: list[Post], kind: str) -> dict[str, list]:
    """Per-entity tag sub-streams, post order preserved."""
    out: dict[str, list] = {}
    for p in posts:
        key = p.resource if kind == "resource" else p.user
        out.setdefault(key, []).extend(p.tags)
    return out


def naive_rank(posts: list[Post], kind: str) -> list[tuple[str, int]]:
    """Post counts per entity, descending, ties by first appearance."""
    counts: dict[str, int] = {}
    first: dict[str, int] = {}
    for i, p in enumerate(posts):
        key = p.resource if kind == "resource" else p.user
        counts[key] = counts.get(key, 0) + 1
        first.setdefault(key, i)
    return sorted(counts.items(), key=lambda kv: (-kv[1], first[kv[0]]))


def naive_user_accumulation(posts: list[Post], resource: str) -> list[tuple[int, int]]:
    """(local tau at end of each post, posts so far) for one resource."""
    tau = 0
    out = []
    for p in posts:
        if p.resource != resource:
            continue
        tau += len(p.tags)
        out.append((tau, len(out) + 1))
    return out


def random_posts(rng: random.Random, n_posts: int, n_users: int = 20,
                 n_resources: int = 12, n_tags: int = 30,
                 max_len: int = 6) -> list[Post]:
    """Clean random posts: lowercase tags, no within-post duplicates.

    Adjacent posts never share a (user, resource) pair; post detection on
    the flattened table relies on that, same as real bookmark streams.
    """
    posts = []
    prev = None
    for i in range(n_posts):
        k = rng.randint(1, min(max_len, n_tags))
        tags = rng.sample([f"t{j}" for j in range(n_tags)], k)
        while True:
            pair = (f"u{rng.randrange(n_users)}", f"r{rng.randrange(n_resources)}")
            if pair != prev:
                break
        prev = pair
        posts.append(Post(timestamp=i + 1, user=pair[0], resource=pair[1],
                          tags=tags))
    return posts


def urn_pitman_yor(d: float, theta: float, length: int, seed: int) -> list[int]:
    """Textbook urn: walk every table's weight for each draw."""
    rng = random.Random(seed)
    counts: list[int] = []
    stream = []
    for t in range(length):
        k = len(counts)
        u = rng.random() * (theta + t)
        if u >= t - d * k:
            counts.append(1)
            stream.append(k)
            continue
        acc = 0.0
        for j, c in enumerate(counts):
            acc += c - d
            if u < acc:
                counts[j] += 1
                stream.append(j)
                break
        else:
            counts[-1] += 1
            stream.append(k - 1)
    return stream


def expected_tables(d: float, theta: float, length: int) -> float:
    """E[K] after `length` draws, by the exact one-step recursion."""
    ek = 0.0
    for t in range(length):
        ek += (theta + d * ek) / (theta + t)
    return ek


def finite_zipf(alpha: float, cap: int, length: int, seed: int) -> np.ndarray:
    """Inverse-transform sampling from a truncated Zipf table."""
    rng = np.random.default_rng(seed)
    weights = np.arange(1, cap + 1, dtype=float) ** -alpha
    cdf = np.cumsum(weights / weights.sum())
    return np.searchsorted(cdf, rng.random(length), side="right") + 1


def power_law_sample(alpha: float, length: int, seed: int,
                     support: int = 100000, start: int = 1) -> np.ndarray:
    """Discrete power law P(n) proportional to n^-alpha on start..start+support-1."""
    rng = np.random.default_rng(seed)
    values = np.arange(start, start + support, dtype=float)
    weights = values ** -alpha
    cdf = np.cumsum(weights / weights.sum())
    return values[np.searchsorted(cdf, rng.random(length), side="right")]


def log_growth_curve(theta: float, tau_max: int,
                     taus: list[int]) -> list[tuple[int, int]]:
    """Reference d=0 growth curve N = round(theta * ln tau), clipped valid."""
    samples = []
    prev = 0
    for tau in taus:
        n = max(1, min(tau, round(theta * math.log(tau))))
        n = max(n, prev)
        samples.append((tau, n))
        prev = n
    return samples
