import shutil
from pathlib import Path

import pytest

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "stn_analyst" / "data" / "fixture"

_criteria = {}


@pytest.fixture
def fixture_copy(tmp_path):
    """Writable copy of the bundled two-algorithm fixture."""
    dest = tmp_path / "fixture"
    shutil.copytree(FIXTURE_DIR, dest)
    return dest


def write_tsv(path, rows):
    path.write_text("".join(f"{r}\t{f}\t{s}\n" for r, f, s in rows), encoding="utf-8")
    return path


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _criteria[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_criteria.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
