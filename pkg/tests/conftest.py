from __future__ import annotations

import pytest

from tagvocab.growth import track_global_vocabulary
from tagvocab.report import run_report
from tagvocab.synth import (
    PitmanYorConfig,
    gen_folksonomy,
    gen_pitman_yor_stream,
    paper_like_config,
)

# criterion number -> (status, detail), filled by record_criterion
_CRITERIA: dict[int, tuple[str, str]] = {}


def record_criterion(num: int, ok: bool, detail: str) -> None:
    _CRITERIA[num] = ("PASS" if ok else "FAIL", detail)
    print(f"criterion {num:2d}: {_CRITERIA[num][0]}  {detail}")
    assert ok, f"criterion {num}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")


@pytest.fixture(scope="session")
def py_ensemble():
    """30 global growth curves from Pitman-Yor d=0.8, theta=10, tau=1e6."""
    curves = []
    for seed in range(30):
        cfg = PitmanYorConfig(d=0.8, theta=10.0, seed=seed)
        stream = gen_pitman_yor_stream(cfg, 1_000_000)
        curves.append(track_global_vocabulary(stream))
    return curves


@pytest.fixture(scope="session")
def preset_report(tmp_path_factory):
    """One full report battery over the paper-like preset at 1e6 posts.

    Ranks 1..10 so the user-accumulation stage covers the most popular
    resources.
    """
    base = tmp_path_factory.mktemp("preset")
    posts_path = base / "posts.txt"
    cfg = paper_like_config(n_posts=1_000_000, seed=42)
    with open(posts_path, "w", encoding="utf-8", newline="\n") as f:
        for line in gen_folksonomy(cfg):
            f.write(line + "\n")
    out_dir = base / "report"
    report = run_report(str(posts_path), str(out_dir),
                        ranks=list(range(1, 11)))
    return {"posts": posts_path, "out_dir": out_dir, "report": report}
