"""One-shot analysis battery over a post stream.

Produces every plot-ready artifact the analyses define: global growth and
exponents, per-resource accumulation and growth at the default ranks,
post-length distribution with tail fit, rescaled collapse curves, and
exponent distributions across popularity buckets with a Gaussian fit.
Everything lands in one output directory plus a machine-readable
report.json. Stages that cannot run are listed with reasons, never
silently skipped.
"""

from __future__ import annotations

import os
import time
from array import array
from typing import Iterable
from urllib.parse import quote

import numpy as np

from . import __version__
from .errors import FitConvergenceError, InsufficientDataError
from .fit import (
    GaussianFit,
    default_ranks,
    endpoint_exponent,
    endpoint_gamma,
    gamma_histogram,
    gaussian_fit,
    last_decades_window,
    loglog_regression_exponent,
    peak_gamma,
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
    sha256_file,
    write_rows,
)
from .growth import (
    ContextSelector,
    SamplingPolicy,
    entity_endpoints,
    stream_global_growth,
    track_entity_vocabularies,
    track_user_accumulation,
)
from .ingest import (
    CleaningPolicy,
    DropCounts,
    dataset_summary,
    iter_clean_posts,
    iter_parsed_posts,
    iter_tas,
    read_tas,
    write_tas,
)
from .stats import post_length_distribution, tail_exponent

# popularity tiers for the exponent-distribution study (1-based ranks)
TOP_BUCKET = (1, 1000)
MID_BUCKET = (1001, 10000)
BOTTOM_START = 10001
TAIL_N_MIN = 10
REGRESSION_DECADES = 2.0


def _fname(template: str, id: str) -> str:
    return template.format(id=quote(id, safe=""))


def summary_payload(policy: CleaningPolicy, summary, counts: DropCounts) -> dict:
    return {
        "policy": policy.as_dict(),
        "summary": summary.as_dict(),
        "parse_errors_skipped": counts.parse,
    }


def _estimate_row(id: str, curve, window=None) -> tuple:
    ep = endpoint_exponent(curve)
    try:
        reg = loglog_regression_exponent(curve, window)
        return (id, curve.tau_max, curve.n_final, ep.gamma, reg.gamma,
                reg.residual)
    except InsufficientDataError:
        return (id, curve.tau_max, curve.n_final, ep.gamma, None, None)


def _endpoint_row(id: str, tau_max: int, n_final: int) -> tuple:
    return (id, tau_max, n_final, endpoint_gamma(tau_max, n_final), None, None)


def _origin_slope(samples: list[tuple[int, int]]) -> float:
    t = np.array([s[0] for s in samples], dtype=float)
    u = np.array([s[1] for s in samples], dtype=float)
    return float(np.dot(t, u) / np.dot(t, t))


def _gaussian_payload(fit: GaussianFit) -> dict:
    return {
        "mean": fit.mean,
        "sigma": fit.sigma,
        "amplitude": fit.amplitude,
        "residual": fit.residual,
        "poor_fit": fit.poor_fit,
    }


def run_report(
    input_path: str,
    out_dir: str,
    policy: CleaningPolicy | None = None,
    on_parse_error: str = "abort",
    sort: bool = False,
    approximate: bool = False,
    seed: int | None = None,
    ranks: list[int] | None = None,
) -> dict:
    """Run the battery; returns the report dict (also written as report.json)."""
    policy = policy or CleaningPolicy()
    ranks = ranks or default_ranks()
    os.makedirs(out_dir, exist_ok=True)
    artifacts: list[tuple[str, str]] = []
    skipped: list[dict] = []
    timings: dict[str, float] = {}
    analysis: dict = {}
    t_start = time.perf_counter()

    def path(name: str) -> str:
        return os.path.join(out_dir, name)

    def add(name: str, role: str) -> None:
        artifacts.append((name, role))

    def mark(stage: str, t0: float) -> None:
        timings[stage] = round(time.perf_counter() - t0, 6)

    def skip(stage: str, reason: str) -> None:
        skipped.append({"stage": stage, "reason": reason})

    # ingest: posts -> time-ordered TAS plus census
    t0 = time.perf_counter()
    counts = DropCounts()
    lengths = array("i")
    tas_path = path("tas.tsv")
    with open_text_input(input_path) as fin:
        posts = iter_clean_posts(
            iter_parsed_posts(fin, on_error=on_parse_error, counts=counts),
            policy, counts,
        )

        def counted():
            for post in posts:
                lengths.append(len(post.tags))
                yield post

        with open(tas_path, "w", encoding="utf-8", newline="\n") as fout:
            write_tas(iter_tas(counted(), sort=sort), fout)
    summary = dataset_summary(
        read_tas(tas_path),
        dropped_empty_count=counts.empty,
        dropped_timestamp_count=counts.timestamp,
        post_count=len(lengths),
    )
    dump_json(path("summary.json"), summary_payload(policy, summary, counts))
    add("tas.tsv", "tag-assignment-table")
    add("summary.json", "dataset-summary")
    mark("ingest", t0)

    # global growth and its exponents
    t0 = time.perf_counter()
    with open_binary_input(tas_path) as f:
        gcurve = stream_global_growth(f, SamplingPolicy(), approximate=approximate)
    with open_text_output(path("growth_global.tsv")) as f:
        write_rows(f, gcurve.samples)
    add("growth_global.tsv", "global-growth")
    with open_text_output(path("exponents_global.tsv")) as f:
        write_rows(f, [_estimate_row("global", gcurve)])
    add("exponents_global.tsv", "global-exponents")
    analysis["global"] = {
        "tau_max": gcurve.tau_max,
        "n_final": gcurve.n_final,
        "gamma_endpoint": endpoint_exponent(gcurve).gamma,
        "approximate": approximate,
    }
    try:
        reg = loglog_regression_exponent(
            gcurve, last_decades_window(gcurve, REGRESSION_DECADES))
        analysis["global"]["gamma_regression_last_decades"] = reg.gamma
        analysis["global"]["regression_residual"] = reg.residual
    except InsufficientDataError as exc:
        skip("global-regression", str(exc))
    mark("global-growth", t0)

    # popularity ranking for both entity kinds
    t0 = time.perf_counter()
    res_order = rank_entities(read_tas(tas_path), "resource")
    usr_order = rank_entities(read_tas(tas_path), "user")
    mark("ranking", t0)

    # post-length distribution with tail fit
    t0 = time.perf_counter()
    dist = post_length_distribution(lengths)
    with open_text_output(path("postlen.tsv")) as f:
        write_rows(f, histogram_rows(dist.histogram))
    add("postlen.tsv", "post-length")
    with open_text_output(path("postlen_tail.tsv")) as f:
        write_rows(f, histogram_rows(dist.tail, skip_empty=True))
    add("postlen_tail.tsv", "post-length-tail")
    analysis["post_length"] = {"mean": dist.mean, "posts": dist.histogram.total}
    try:
        tail = tail_exponent(dist.tail, n_min=TAIL_N_MIN)
        analysis["post_length"]["tail"] = {
            "exponent": tail.exponent,
            "n_bins": tail.n_bins,
            "n_min": TAIL_N_MIN,
            "heavy_tailed": tail.heavy_tailed,
        }
    except InsufficientDataError as exc:
        skip("post-length-tail-fit", str(exc))
    dump_json(path("postlen.json"), analysis["post_length"])
    add("postlen.json", "post-length-stats")
    mark("post-length", t0)

    # per-resource user accumulation at the default ranks
    t0 = time.perf_counter()
    selected: list[tuple[str, int]] = []
    if len(res_order) < max(ranks):
        skip("user-accumulation",
             f"only {len(res_order)} resources; rank selection needs {max(ranks)}")
        skip("local-growth", "same rank selection unavailable")
        skip("collapse", "same rank selection unavailable")
    else:
        selected = select_ranks(res_order, ranks)
        curves = track_user_accumulation(read_tas(tas_path),
                                         [r for r, _ in selected])
        slopes = {}
        for rid, _ in selected:
            curve = curves[rid]
            name = _fname("users_{id}.tsv", rid)
            with open_text_output(path(name)) as f:
                write_rows(f, curve.samples)
            add(name, "user-accumulation")
            slopes[rid] = _origin_slope(curve.samples)
        analysis["user_accumulation"] = {
            "ranks": list(ranks),
            "slopes": slopes,
            "mean_slope": float(np.mean(list(slopes.values()))),
        }
    mark("user-accumulation", t0)

    # local growth curves: the whole top bucket in one pass
    t0 = time.perf_counter()
    top_hi = min(TOP_BUCKET[1], len(res_order))
    top_ids = [e for e, _ in res_order[:top_hi]]
    selectors = [ContextSelector("resource", rid) for rid in top_ids]
    curve_map, _ = track_entity_vocabularies(read_tas(tas_path), selectors)
    by_id = {sel.id: c for sel, c in curve_map.items()}
    if selected:
        for rid, _ in selected:
            curve = by_id[rid]
            name = _fname("growth_resource_{id}.tsv", rid)
            with open_text_output(path(name)) as f:
                write_rows(f, curve.samples)
            add(name, "local-growth")
            name = _fname("collapse_{id}.tsv", rid)
            with open_text_output(path(name)) as f:
                write_rows(f, rescale_curve(curve).samples)
            add(name, "collapse")
    mark("local-growth", t0)

    # exponent distributions over popularity buckets
    t0 = time.perf_counter()
    res_end, usr_end = entity_endpoints(read_tas(tas_path))
    analysis["crossover"] = {}

    def bucket_outputs(bucket: str, kind: str, rows: list[tuple],
                       tau_below_2: int) -> None:
        suffix = bucket if kind == "resource" else f"users_{bucket}"
        if not rows:
            skip(f"pgamma-{suffix}", "no curves with tau_max >= 2 in bucket")
            return
        name = f"exponents_{kind}_{bucket}.tsv"
        with open_text_output(path(name)) as f:
            write_rows(f, rows)
        add(name, "exponents-table")
        hist, flagged = gamma_histogram([r[3] for r in rows])
        name = f"pgamma_{suffix}.tsv"
        with open_text_output(path(name)) as f:
            write_rows(f, histogram_rows(hist))
        add(name, "exponent-distribution")
        block = {
            "count": hist.total,
            "peak": peak_gamma(hist),
            "gamma_above_range": len(flagged),
            "tau_below_2": tau_below_2,
        }
        try:
            block["gaussian"] = _gaussian_payload(gaussian_fit(hist))
        except (InsufficientDataError, FitConvergenceError) as exc:
            skip(f"pgamma-{suffix}-gaussian", str(exc))
            if isinstance(exc, FitConvergenceError):
                block["gaussian_fallback"] = {
                    "mean": exc.fallback_mean, "sigma": exc.fallback_sigma,
                }
        analysis["crossover"][f"{kind}_{bucket}"] = block

    def endpoint_bucket(ids: list[str], endpoints: dict) -> tuple[list, int]:
        rows = []
        tiny = 0
        for id in ids:
            tau_max, n_final = endpoints[id]
            if tau_max < 2:
                tiny += 1
            else:
                rows.append(_endpoint_row(id, tau_max, n_final))
        return rows, tiny

    if top_hi < TOP_BUCKET[1]:
        skip("pgamma-top",
             f"only {len(res_order)} resources; top bucket needs {TOP_BUCKET[1]}")
    else:
        rows = []
        tiny = 0
        for rid in top_ids:
            curve = by_id[rid]
            if curve.tau_max < 2:
                tiny += 1
                continue
            rows.append(_estimate_row(
                rid, curve, last_decades_window(curve, REGRESSION_DECADES)))
        bucket_outputs("top", "resource", rows, tiny)

    if len(res_order) <= MID_BUCKET[0]:
        skip("pgamma-mid",
             f"only {len(res_order)} resources; mid bucket starts at rank "
             f"{MID_BUCKET[0] + 1}")
    else:
        ids = [e for e, _ in res_order[MID_BUCKET[0]:MID_BUCKET[1]]]
        bucket_outputs("mid", "resource", *endpoint_bucket(ids, res_end))

    if len(res_order) <= BOTTOM_START:
        skip("pgamma-bottom",
             f"only {len(res_order)} resources; bottom bucket starts at rank "
             f"{BOTTOM_START + 1}")
    else:
        ids = [e for e, _ in res_order[BOTTOM_START:]]
        bucket_outputs("bottom", "resource", *endpoint_bucket(ids, res_end))

    top = analysis["crossover"].get("resource_top")
    bottom = analysis["crossover"].get("resource_bottom")
    if top and bottom:
        analysis["crossover"]["peak_gap"] = bottom["peak"] - top["peak"]

    if len(usr_order) < TOP_BUCKET[1]:
        skip("pgamma-users-top",
             f"only {len(usr_order)} users; top bucket needs {TOP_BUCKET[1]}")
    else:
        ids = [e for e, _ in usr_order[:TOP_BUCKET[1]]]
        bucket_outputs("top", "user", *endpoint_bucket(ids, usr_end))
    mark("exponent-distributions", t0)

    timings["total"] = round(time.perf_counter() - t_start, 6)
    report = {
        "tool": "tagvocab",
        "version": __version__,
        "input": {
            "path": os.path.abspath(input_path) if input_path != "-" else "-",
            "sha256": sha256_file(input_path) if input_path != "-" else None,
        },
        "parameters": {
            "seed": seed,
            "approximate": approximate,
            "on_parse_error": on_parse_error,
            "sort": sort,
            "ranks": list(ranks),
            "buckets": {"top": list(TOP_BUCKET), "mid": list(MID_BUCKET),
                        "bottom": [BOTTOM_START, None]},
            "tail_n_min": TAIL_N_MIN,
            "regression_window_decades": REGRESSION_DECADES,
            "pgamma_bin_width": 0.02,
        },
        "policy": policy.as_dict(),
        "summary": summary.as_dict(),
        "artifacts": [
            {
                "file": name,
                "role": role,
                "bytes": os.path.getsize(path(name)),
                "sha256": sha256_file(path(name)),
            }
            for name, role in artifacts
        ],
        "analysis": analysis,
        "skipped": skipped,
        "timings": timings,
    }
    for entry in report["artifacts"]:
        if entry["bytes"] == 0:
            raise InsufficientDataError(
                f"artifact {entry['file']} is empty; report invariant broken"
            )
    dump_json(path("report.json"), report)
    return report
