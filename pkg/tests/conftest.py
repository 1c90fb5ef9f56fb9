import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LOG = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record a one-line detail for the acceptance criterion being run."""
    log = request.config.stash.setdefault(_LOG, {})

    def record(detail):
        log[request.node.nodeid] = detail

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_LOG, {})
    reports = [r for key in ("passed", "failed", "error") for r in terminalreporter.stats.get(key, [])
               if getattr(r, "when", "call") == "call" and "test_acceptance.py" in r.nodeid]
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(reports, key=lambda r: r.nodeid):
        name = r.nodeid.split("::")[-1].removeprefix("test_")
        status = "PASS" if r.passed else "FAIL"
        terminalreporter.write_line(f"{status} {name}: {log.get(r.nodeid, '')}")
