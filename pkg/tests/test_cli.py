from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from tagvocab.cli import main
from tagvocab.formats import sha256_file
from tagvocab.synth import PitmanYorConfig, gen_pitman_yor_stream

TOY_POSTS = "1\tu1\tr1\ta\n2\tu2\tr1\tb\n3\tu1\tr2\ta\n4\tu2\tr2\tc\n"


def write_toy(tmp_path):
    posts = tmp_path / "posts.tsv"
    posts.write_text(TOY_POSTS)
    return posts


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_usage_errors_exit_1(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        run_cli("growth", "--no-such-flag")
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        run_cli("no-such-command")
    assert err.value.code == 1
    posts = write_toy(tmp_path)
    assert run_cli("local-growth", "--input", posts, "--out-dir", tmp_path,
                   "--ranks", "5:1:1") == 1
    assert run_cli("growth", "--input", posts, "--threads", "0") == 1


def test_toy_stream_through_ingest_growth_exponents(tmp_path):
    posts = write_toy(tmp_path)
    tas = tmp_path / "tas.tsv"
    curve = tmp_path / "curve.tsv"
    table = tmp_path / "exp.tsv"
    assert run_cli("ingest", "--input", posts, "--out", tas) == 0
    assert tas.read_text() == ("1\ta\tu1\tr1\n2\tb\tu2\tr1\n"
                               "3\ta\tu1\tr2\n4\tc\tu2\tr2\n")
    assert run_cli("growth", "--input", tas, "--out", curve,
                   "--all-points") == 0
    assert curve.read_text() == "1\t1\n2\t2\n3\t2\n4\t3\n"
    assert run_cli("exponents", "--input", curve, "--out", table) == 0
    row = table.read_text().split("\t")
    assert row[0] == "global"
    assert (int(row[1]), int(row[2])) == (4, 3)
    assert float(row[3]) == pytest.approx(math.log(3) / math.log(4))


def test_summary_counts_toy_stream(tmp_path):
    posts = write_toy(tmp_path)
    tas = tmp_path / "tas.tsv"
    out = tmp_path / "summary.json"
    assert run_cli("ingest", "--input", posts, "--out", tas) == 0
    assert run_cli("summary", "--input", tas, "--out", out) == 0
    summary = json.loads(out.read_text())
    assert summary["post_count"] == 4
    assert summary["user_count"] == 2
    assert summary["resource_count"] == 2
    assert summary["distinct_tag_count"] == 3
    assert summary["total_tag_assignments"] == 4


def test_parse_failures_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("1\tu1\tr1\ta\nnot a post\n")
    tas = tmp_path / "tas.tsv"
    assert run_cli("ingest", "--input", bad, "--out", tas) == 2
    assert "line 2" in capsys.readouterr().err
    assert run_cli("ingest", "--input", bad, "--out", tas,
                   "--on-parse-error", "skip") == 0
    assert "skipped 1 malformed lines" in capsys.readouterr().err
    assert tas.read_text() == "1\ta\tu1\tr1\n"
    assert run_cli("growth", "--input", tmp_path / "missing.tsv") == 2


def test_analysis_preconditions_exit_3(tmp_path, capsys):
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    assert run_cli("growth", "--input", empty) == 3
    posts = write_toy(tmp_path)
    assert run_cli("ingest", "--input", posts, "--out", tmp_path / "t.tsv",
                   "--min-ts", "100") == 3
    one = tmp_path / "one.tsv"
    one.write_text("1\t1\n")
    assert run_cli("exponents", "--input", one) == 3
    assert "UndefinedExponentError" in capsys.readouterr().err
    unsorted = tmp_path / "unsorted.tsv"
    unsorted.write_text("5\tu1\tr1\ta\n2\tu2\tr2\tb\n")
    assert run_cli("ingest", "--input", unsorted,
                   "--out", tmp_path / "u.tsv") == 3
    assert "--sort" in capsys.readouterr().err
    assert run_cli("ingest", "--input", unsorted,
                   "--out", tmp_path / "u.tsv", "--sort") == 0


def test_local_growth_and_users_select_entities(tmp_path, capsys):
    posts = write_toy(tmp_path)
    tas = tmp_path / "tas.tsv"
    run_cli("ingest", "--input", posts, "--out", tas)
    out = tmp_path / "curves"
    assert run_cli("local-growth", "--input", tas, "--out-dir", out,
                   "--ids", "r1,r9", "--all-points") == 0
    assert (out / "growth_resource_r1.tsv").read_text() == "1\t1\n2\t2\n"
    assert "r9 never appears" in capsys.readouterr().err
    assert not (out / "growth_resource_r9.tsv").exists()
    assert run_cli("local-growth", "--input", tas, "--out-dir", out,
                   "--kind", "user", "--top", "1", "--all-points") == 0
    assert (out / "growth_user_u1.tsv").exists()
    assert run_cli("users", "--input", tas, "--out-dir", out,
                   "--ids", "r1") == 0
    assert (out / "users_r1.tsv").read_text() == "1\t1\n2\t2\n"
    assert run_cli("users", "--input", tas, "--out-dir", out,
                   "--ids", "r9") == 3


def test_collapse_ends_at_unit_point(tmp_path):
    curve = tmp_path / "curve.tsv"
    curve.write_text("1\t1\n5\t3\n10\t4\n")
    out = tmp_path / "rescaled.tsv"
    assert run_cli("collapse", "--input", curve, "--out", out) == 0
    rows = [line.split("\t") for line in out.read_text().splitlines()]
    assert [float(v) for v in rows[-1]] == [1.0, 1.0]
    assert [float(v) for v in rows[0]] == [0.1, 0.25]


def test_postlen_outputs_and_tail(tmp_path):
    posts = tmp_path / "posts.tsv"
    lines = []
    for i in range(1, 201):
        n_tags = 1 + (i % 4)
        tags = ",".join(f"t{i}x{j}" for j in range(n_tags))
        lines.append(f"{i}\tu{i}\tr{i}\t{tags}")
    posts.write_text("\n".join(lines) + "\n")
    out = tmp_path / "postlen.tsv"
    tail = tmp_path / "tail.tsv"
    meta = tmp_path / "postlen.json"
    assert run_cli("postlen", "--input", posts, "--out", out,
                   "--tail-out", tail, "--json", meta) == 0
    for line in tail.read_text().splitlines():
        assert float(line.split("\t")[2]) > 0
    payload = json.loads(meta.read_text())
    assert payload["posts"] == 200
    assert payload["mean"] == pytest.approx(2.5)
    assert payload["tail"] is None
    assert "n_min" in payload["tail_skip_reason"]


def test_synth_validation_exit_codes(tmp_path):
    assert run_cli("synth", "--model", "folksonomy") == 1
    assert run_cli("synth", "--model", "py") == 1
    assert run_cli("synth", "--model", "zipf", "--n", "10",
                   "--census-json", tmp_path / "c.json") == 1
    assert run_cli("synth", "--model", "zipf", "--n", "10",
                   "--alpha", "0.9") == 1


def test_synth_census_matches_ingest_summary(tmp_path):
    posts = tmp_path / "posts.tsv"
    census_path = tmp_path / "census.json"
    assert run_cli("synth", "--model", "folksonomy", "--preset", "paper-like",
                   "--n", "2000", "--seed", "9", "--out", posts,
                   "--census-json", census_path) == 0
    tas = tmp_path / "tas.tsv"
    summary_path = tmp_path / "summary.json"
    assert run_cli("ingest", "--input", posts, "--out", tas,
                   "--summary-json", summary_path) == 0
    census = json.loads(census_path.read_text())
    summary = json.loads(summary_path.read_text())["summary"]
    for key in census:
        assert summary[key] == census[key], key
    assert census["post_count"] == 2000


def test_synth_config_file_and_n_override(tmp_path):
    cfg_path = tmp_path / "gen.json"
    cfg_path.write_text(json.dumps({
        "n_posts": 5000,
        "post_length_model": {"body_rate": 0.4},
        "resource_popularity": 0.3,
    }))
    posts = tmp_path / "posts.tsv"
    assert run_cli("synth", "--model", "folksonomy", "--config", cfg_path,
                   "--n", "300", "--seed", "2", "--out", posts) == 0
    lines = posts.read_text().splitlines()
    assert len(lines) == 300
    assert all(len(line.split("\t")) == 4 for line in lines)
    cfg_path.write_text(json.dumps({"n_posts": 10}))
    assert run_cli("synth", "--model", "folksonomy", "--config", cfg_path,
                   "--out", posts) == 1


def test_synth_py_rows_match_library_stream(tmp_path):
    out = tmp_path / "tas.tsv"
    assert run_cli("synth", "--model", "py", "--d", "0.5", "--theta", "1",
                   "--n", "200", "--seed", "9", "--out", out) == 0
    stream = gen_pitman_yor_stream(PitmanYorConfig(0.5, 1.0, seed=9), 200)
    want = "".join(f"{i}\t{t}\tu0\tr0\n" for i, t in enumerate(stream, 1))
    assert out.read_text() == want


def test_synth_determinism_across_runs(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.tsv", "b.tsv", "c.tsv"))
    base = ("synth", "--model", "folksonomy", "--preset", "paper-like",
            "--n", "500")
    assert run_cli(*base, "--seed", "4", "--out", a) == 0
    assert run_cli(*base, "--seed", "4", "--out", b) == 0
    assert run_cli(*base, "--seed", "5", "--out", c) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_json_report_lists_artifacts_with_checksums(tmp_path):
    posts = write_toy(tmp_path)
    tas = tmp_path / "tas.tsv"
    summary = tmp_path / "summary.json"
    report_path = tmp_path / "run.json"
    assert run_cli("ingest", "--input", posts, "--out", tas,
                   "--summary-json", summary,
                   "--json-report", report_path) == 0
    report = json.loads(report_path.read_text())
    assert report["tool"] == "tagvocab"
    assert report["command"] == "ingest"
    files = {e["file"] for e in report["artifacts"]}
    assert files == {str(tas), str(summary)}
    for entry in report["artifacts"]:
        assert entry["sha256"] == sha256_file(entry["file"])
        assert entry["bytes"] > 0
    assert report["elapsed_seconds"] >= 0


def test_report_small_input_covers_analysis_roles(tmp_path, capsys):
    posts = tmp_path / "posts.tsv"
    assert run_cli("synth", "--model", "folksonomy", "--preset", "paper-like",
                   "--n", "400", "--seed", "6", "--out", posts) == 0
    out_dir = tmp_path / "rep"
    assert run_cli("report", "--input", posts, "--out-dir", out_dir,
                   "--ranks", "1:3:1") == 0
    report = json.loads((out_dir / "report.json").read_text())
    roles = {e["role"] for e in report["artifacts"]}
    assert {"tag-assignment-table", "dataset-summary", "global-growth",
            "global-exponents", "post-length", "post-length-stats",
            "local-growth", "user-accumulation", "collapse"} <= roles
    # exponent distributions need rank buckets this stream cannot fill;
    # the stage must skip with a reason instead of failing the run
    skipped_stages = {e["stage"] for e in report["skipped"]}
    assert "pgamma-top" in skipped_stages
    for entry in report["artifacts"]:
        path = out_dir / entry["file"]
        assert path.exists()
        assert entry["sha256"] == sha256_file(str(path))
    for entry in report["skipped"]:
        assert entry["reason"]
    assert report["summary"]["post_count"] == 400


def test_report_rerun_is_byte_identical(tmp_path):
    posts = tmp_path / "posts.tsv"
    run_cli("synth", "--model", "folksonomy", "--preset", "paper-like",
            "--n", "400", "--seed", "6", "--out", posts)
    dirs = (tmp_path / "rep1", tmp_path / "rep2")
    for d in dirs:
        assert run_cli("report", "--input", posts, "--out-dir", d,
                       "--ranks", "1:3:1", "--quiet") == 0
    reports = []
    for d in dirs:
        rep = json.loads((d / "report.json").read_text())
        for entry in rep["artifacts"]:
            assert (d / entry["file"]).read_bytes() == \
                (dirs[0] / entry["file"]).read_bytes()
        rep.pop("timings")
        rep.pop("input")
        reports.append(rep)
    assert reports[0] == reports[1]


def test_subcommands_compose_through_pipes():
    pipeline = ("tagvocab synth --model py --d 0.5 --theta 1 --n 20000 "
                "--seed 3 | tagvocab growth --input - --out - "
                "| tagvocab exponents --input - --out - --last-decades 2")
    proc = subprocess.run(["bash", "-c", f"set -o pipefail; {pipeline}"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    row = proc.stdout.strip().split("\t")
    assert int(row[1]) == 20000
    assert 0.0 < float(row[3]) < 1.0
    assert 0.0 < float(row[4]) < 1.0


def test_early_pipe_close_is_not_an_error():
    cmd = ("tagvocab synth --model py --d 0.5 --theta 1 --n 300000 --seed 1 "
           "| head -n 2 >/dev/null; echo ${PIPESTATUS[0]}")
    proc = subprocess.run(["bash", "-c", cmd], capture_output=True,
                          text=True, timeout=120)
    assert proc.stdout.strip() == "0"
    assert "Exception" not in proc.stderr


def test_documented_pipeline_recovers_growth_exponent():
    pipeline = ("tagvocab synth --model py --d 0.8 --theta 10 --n 1000000 "
                "--seed 7 | tagvocab growth | tagvocab exponents "
                "--last-decades 2")
    proc = subprocess.run(["bash", "-c", f"set -o pipefail; {pipeline}"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    row = proc.stdout.strip().split("\t")
    endpoint, regression = float(row[3]), float(row[4])
    assert abs(endpoint - 0.8) < 0.07
    assert abs(regression - 0.8) < 0.05


def test_version_flag():
    with pytest.raises(SystemExit) as err:
        run_cli("--version")
    assert err.value.code == 0
