import os

import numpy as np
import pytest

from bpspt import _backend

# criterion lines reported at the end of the session
ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: takes more than a few seconds")
    config.addinivalue_line("markers", "nightly: paper-scale run, enabled with BPSPT_NIGHTLY=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("BPSPT_NIGHTLY") == "1":
        return
    skip = pytest.mark.skip(reason="paper-scale run; set BPSPT_NIGHTLY=1")
    for item in items:
        if "nightly" in item.keywords:
            item.add_marker(skip)


def pytest_runtest_logreport(report):
    # skipped criteria still get a line, so the list stays complete
    if report.when == "setup" and report.skipped and "test_acceptance" in report.nodeid:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        ACCEPTANCE_LINES.append(f"[SKIP] {report.nodeid.split('::')[-1]} | {reason.removeprefix('Skipped: ')}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = ["python"] + (["compiled"] if _backend.HAVE_CORE else [])
