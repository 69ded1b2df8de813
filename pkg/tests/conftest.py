import sys

import pytest

from sepfit.harness import run_demo


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    """Run the three-solver comparison once and share it across tests.

    The steepest-descent leg does its full iteration budget, so this is
    the slowest thing in the suite; everything that needs the comparison
    artifacts (table rows, trajectories, landscape slices) reads from
    this single run.
    """
    out = tmp_path_factory.mktemp("demo_artifacts")
    result = run_demo(out)
    return out, result


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance scorecard collected by test_acceptance.py."""
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None) if module else None
    if not verdicts:
        return
    terminalreporter.section("acceptance scorecard")
    for name, ok, detail in verdicts:
        line = f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
