import re

import numpy as np
import pytest

# test_criterion_<N>_<label>[__<part>]; parts of one criterion share its label
_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_results: dict[int, tuple[str, list[str]]] = {}
_notes: dict[int, list[str]] = {}


def _outcome(report) -> str:
    if hasattr(report, "wasxfail"):
        # a known-unmet criterion stays red in the summary
        return "FAIL" if report.skipped else "PASS"
    if report.skipped:
        return "SKIP"
    return "PASS" if report.passed else "FAIL"


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        n = int(m.group(1))
        label = m.group(2).split("__")[0].replace("_", " ")
        _results.setdefault(n, (label, []))[1].append(_outcome(report))


def _verdict(outcomes: list[str]) -> str:
    if "FAIL" in outcomes:
        return "FAIL"
    if "PASS" in outcomes:
        skipped = outcomes.count("SKIP")
        return f"PASS ({skipped} part skipped)" if skipped else "PASS"
    return "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        label, outcomes = _results[n]
        terminalreporter.write_line(f"criterion {n:2d} {_verdict(outcomes)}: {label}")
        for line in _notes.get(n, []):
            terminalreporter.write_line(f"    {line}")


@pytest.fixture
def note():
    """``note(n, text)`` attaches a measured value to criterion n's summary line."""

    def add(n: int, text: str) -> None:
        _notes.setdefault(n, []).append(text)

    return add


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
