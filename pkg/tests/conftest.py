from pathlib import Path

import pytest

from distsent.corpus import DatasetConfig, Tweet, analyze, parse_line

LABELS = DatasetConfig(hashtag_list=["#happy", "#sad", "#bored", "#cool2"], emoticon_list=[":)", ":(", ":D"],
                       min_proper_words=1)


def make_tweet(tweet_id: str, text: str, label: str | None = "#happy", cfg: DatasetConfig = LABELS) -> Tweet:
    """Tweet built through the real parser (label column given explicitly)."""
    cls = label if label is not None else "-"
    return parse_line(f"{tweet_id}\t{cls}\t{text}", cfg, labeled=label is not None)


@pytest.fixture
def labels_cfg() -> DatasetConfig:
    return LABELS


@pytest.fixture
def write_lines(tmp_path: Path):
    def write(name: str, lines) -> Path:
        p = tmp_path / name
        p.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return p
    return write


def surfaces(tokens):
    return [t.surface for t in tokens]


def tokens_of(text: str, cfg: DatasetConfig = LABELS):
    return analyze(text, cfg).tokens


# ------------------------------------------------------- acceptance report

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "ran": False, "notes": []})
    if report.when == "call" or report.failed:
        entry["ran"] = True
        entry["passed"] = entry["passed"] and report.passed
    if report.when == "call":
        entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "SKIP" if not entry["ran"] else "PASS" if entry["passed"] else "FAIL"
        notes = f"  ({'; '.join(entry['notes'])})" if entry["notes"] else ""
        terminalreporter.write_line(f"{status} criterion {number}: {entry['title']}{notes}")
