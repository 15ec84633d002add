from collections import defaultdict
from pathlib import Path

import pytest

from lrdhomog.config import load_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

_criteria = defaultdict(list)


@pytest.fixture
def config():
    def load(name, **changes):
        cfg = load_config(CONFIG_DIR / f"{name}.json")
        return cfg.replace(**changes) if changes else cfg

    return load


@pytest.fixture
def criterion():
    """Record one sub-check of an acceptance criterion: criterion(number, label, passed, detail)."""

    def record(number, label, passed, detail=""):
        _criteria[number].append((label, bool(passed), detail))
        print(f"criterion {number} [{label}]: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        checks = _criteria[number]
        ok = all(p for _, p, _ in checks)
        failed = [label for label, p, _ in checks if not p]
        suffix = f" (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} [{len(checks)} checks]{suffix}")
        for label, p, detail in checks:
            terminalreporter.write_line(f"    {'PASS' if p else 'FAIL'} {label} {detail}")
