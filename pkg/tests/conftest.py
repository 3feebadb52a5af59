import os

import pytest


def pytest_addoption(parser):
    parser.addoption("--long", action="store_true", default=False,
                     help="also run the full-size (n=100) order-of-magnitude checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--long") or os.environ.get("DNLAB_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="full-size run; enable with --long or DNLAB_LONG=1")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)


VERDICTS = []


@pytest.fixture
def verdict(request):
    """Record and print one pass/fail line, then assert it."""
    def report(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
