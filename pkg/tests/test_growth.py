from __future__ import annotations

import io
import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tagvocab.errors import ConfigError, EmptyStreamError, ParseError
from tagvocab.growth import (
    GLOBAL,
    ApproxDistinct,
    ContextSelector,
    SamplingPolicy,
    VocabularyTracker,
    entity_endpoints,
    iter_checkpoints,
    stream_global_growth,
    track_entity_vocabularies,
    track_global_vocabulary,
    track_user_accumulation,
)
from tagvocab.ingest import Post, build_tas, write_tas

ALL = SamplingPolicy(all_points=True)


@st.composite
def post_lists(draw, max_posts=25):
    n = draw(st.integers(min_value=1, max_value=max_posts))
    posts = []
    for i in range(n):
        tags = draw(st.lists(
            st.sampled_from([f"t{j}" for j in range(8)]),
            min_size=1, max_size=4, unique=True,
        ))
        user = draw(st.sampled_from(["u0", "u1", "u2"]))
        resource = draw(st.sampled_from(["r0", "r1", "r2", "r3"]))
        posts.append(Post(i + 1, user, resource, tags))
    return posts


def test_global_curve_toy_example():
    posts = [Post(1, "u1", "r1", ["a", "b"]), Post(2, "u2", "r1", ["a", "c"])]
    tags = [rec.tag for rec in build_tas(posts)]
    expected = [(1, 1), (2, 2), (3, 2), (4, 3)]
    assert track_global_vocabulary(tags, ALL).samples == expected
    # every integer up to ~21 is a checkpoint at 50 per decade, so the
    # default sampling sees the same four points
    assert track_global_vocabulary(tags).samples == expected


def test_local_curve_merges_posts_of_one_resource():
    posts = [Post(1, "u1", "r1", ["a", "b"]), Post(2, "u2", "r1", ["b", "c"])]
    sel = ContextSelector("resource", "r1")
    curves, missing = track_entity_vocabularies(build_tas(posts), [sel], ALL)
    assert missing == []
    assert curves[sel].samples == [(1, 1), (2, 2), (3, 2), (4, 3)]


def test_user_accumulation_example():
    posts = [
        Post(1, "u1", "r1", ["a", "b"]),
        Post(2, "u2", "r1", ["c", "d", "e"]),
        Post(3, "u3", "r1", ["f"]),
    ]
    curves = track_user_accumulation(build_tas(posts), ["r1"])
    assert curves["r1"].samples == [(2, 1), (5, 2), (6, 3)]


def test_user_accumulation_counts_posts_not_distinct_users():
    # the same user bookmarking twice still advances U by one per post
    posts = [
        Post(1, "u1", "r1", ["a"]),
        Post(2, "u2", "r1", ["b"]),
        Post(3, "u1", "r1", ["c"]),
    ]
    curves = track_user_accumulation(build_tas(posts), ["r1"])
    assert curves["r1"].samples == [(1, 1), (2, 2), (3, 3)]


def test_user_accumulation_only_requested_resources():
    posts = [Post(1, "u1", "r1", ["a"]), Post(2, "u1", "r2", ["b"])]
    curves = track_user_accumulation(build_tas(posts), ["r2", "r9"])
    assert set(curves) == {"r2"}


def test_checkpoints_dense_then_log():
    ck = list(itertools.islice(iter_checkpoints(50), 250))
    assert ck[0] == 1
    assert all(b > a for a, b in zip(ck, ck[1:]))
    # every integer is a checkpoint while the grid spacing is below 1
    assert ck[:21] == list(range(1, 22))
    for decade in (10, 100, 1000, 10000):
        assert decade in ck
    per_decade = sum(1 for v in ck if 100 < v <= 1000)
    assert per_decade == 50


def test_sampling_policy_validation():
    with pytest.raises(ConfigError):
        SamplingPolicy(points_per_decade=0)


def test_context_selector_validation():
    with pytest.raises(ConfigError):
        ContextSelector("folder")
    with pytest.raises(ConfigError):
        ContextSelector("resource")
    with pytest.raises(ConfigError):
        ContextSelector("global", "r1")


def test_empty_stream_raises():
    with pytest.raises(EmptyStreamError):
        track_global_vocabulary([])
    with pytest.raises(EmptyStreamError):
        stream_global_growth(io.BytesIO(b""))


def test_low_sample_flag():
    short = track_global_vocabulary(["a"] * 9, ALL)
    longer = track_global_vocabulary(["a"] * 10, ALL)
    assert short.low_sample
    assert not longer.low_sample


@settings(max_examples=60)
@given(post_lists())
def test_curve_growth_is_unit_stepped(posts):
    tags = [rec.tag for rec in build_tas(posts)]
    curve = track_global_vocabulary(tags, ALL)
    assert curve.samples[0] == (1, 1)
    assert curve.tau_max == len(tags)
    prev_n = 0
    for tau, n in curve.samples:
        assert 1 <= n <= tau
        assert n - prev_n in (0, 1)
        prev_n = n


@settings(max_examples=60)
@given(post_lists())
def test_endpoint_invariant_under_subsampling(posts):
    tags = [rec.tag for rec in build_tas(posts)]
    dense = track_global_vocabulary(tags, ALL)
    sparse = track_global_vocabulary(tags, SamplingPolicy(points_per_decade=3))
    assert (dense.tau_max, dense.n_final) == (sparse.tau_max, sparse.n_final)
    assert sparse.samples[-1] == (sparse.tau_max, sparse.n_final)


@settings(max_examples=60)
@given(post_lists())
def test_local_clocks_decompose_global_clock(posts):
    tas = build_tas(posts)
    res_end, usr_end = entity_endpoints(tas)
    assert sum(tau for tau, _ in res_end.values()) == len(tas)
    assert sum(tau for tau, _ in usr_end.values()) == len(tas)


@settings(max_examples=40)
@given(post_lists())
def test_permuting_other_entities_posts_leaves_local_curves_alone(posts):
    # stable regrouping by resource permutes posts across entities while
    # preserving each resource's own post order
    tas = build_tas(posts)
    regrouped = sorted(posts, key=lambda p: p.resource)
    for p, i in zip(regrouped, range(len(regrouped))):
        p.timestamp = i + 1
    tas2 = build_tas(regrouped)
    selectors = {ContextSelector("resource", p.resource) for p in posts}
    before, _ = track_entity_vocabularies(tas, selectors, ALL)
    after, _ = track_entity_vocabularies(tas2, selectors, ALL)
    assert before == after


@settings(max_examples=40)
@given(post_lists())
def test_entity_endpoints_agree_with_full_tracking(posts):
    tas = build_tas(posts)
    selectors = [ContextSelector("resource", p.resource) for p in posts]
    selectors += [ContextSelector("user", p.user) for p in posts]
    curves, missing = track_entity_vocabularies(tas, set(selectors), ALL)
    assert not missing
    res_end, usr_end = entity_endpoints(tas)
    for sel, curve in curves.items():
        table = res_end if sel.kind == "resource" else usr_end
        assert table[sel.id] == (curve.tau_max, curve.n_final)


def test_sampled_points_match_naive_rescan():
    rng = random.Random(3)
    posts = oracles.random_posts(rng, 400)
    tas = build_tas(posts)
    tags = [rec.tag for rec in tas]
    curve = track_global_vocabulary(tags)
    for tau, n in curve.samples:
        assert n == oracles.distinct_at(tags, tau)


def test_tracker_rejects_unknown_entities_into_missing():
    posts = [Post(1, "u1", "r1", ["a"])]
    ghost = ContextSelector("resource", "nope")
    curves, missing = track_entity_vocabularies(build_tas(posts), [ghost])
    assert curves == {}
    assert missing == [ghost]
    with pytest.raises(ConfigError):
        track_entity_vocabularies([], [GLOBAL])


def test_stream_global_growth_matches_in_memory_tracker(tmp_path):
    rng = random.Random(9)
    posts = oracles.random_posts(rng, 3000, n_tags=200)
    tas = build_tas(posts)
    buf = io.StringIO()
    write_tas(tas, buf)
    curve = stream_global_growth(io.BytesIO(buf.getvalue().encode()))
    reference = track_global_vocabulary([rec.tag for rec in tas])
    assert curve.samples == reference.samples


def test_stream_global_growth_spot_checks_indices():
    bad = b"1\ta\tu\tr\n9\tb\tu\tr\n"
    with pytest.raises(ParseError, match="consecutive"):
        stream_global_growth(bad and io.BytesIO(bad))


def test_approx_distinct_tracks_cardinality():
    approx = ApproxDistinct()
    approx.update(str(i) for i in range(50000))
    err = abs(approx.estimate() - 50000) / 50000
    assert err < 3 * approx.relative_error
    assert len(approx) == int(round(approx.estimate()))


def test_approx_distinct_small_range_is_tight():
    approx = ApproxDistinct()
    approx.update(str(i) for i in range(100))
    assert abs(approx.estimate() - 100) <= 2


def test_approx_distinct_validation():
    with pytest.raises(ConfigError):
        ApproxDistinct(precision=3)


def test_approximate_tracker_is_monotone_and_close():
    rng = random.Random(5)
    tags = [f"t{rng.randrange(20000)}" for _ in range(100000)]
    exact = track_global_vocabulary(tags)
    approx = track_global_vocabulary(tags, approximate=True)
    prev = 0
    for (tau, n_exact), (tau2, n_approx) in zip(exact.samples, approx.samples):
        assert tau == tau2
        assert n_approx >= prev
        assert n_approx <= tau
        prev = n_approx
    assert abs(approx.n_final - exact.n_final) / exact.n_final < 0.03


def test_vocabulary_tracker_incremental_equals_batch():
    tags = ["a", "b", "a", "c", "b", "d"]
    tracker = VocabularyTracker(GLOBAL, ALL)
    for t in tags:
        tracker.add(t)
    assert tracker.finish().samples == track_global_vocabulary(tags, ALL).samples
