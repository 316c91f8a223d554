import time
from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Context manager that times a block against a runtime limit and records
    one PASS/FAIL line for it."""

    @contextmanager
    def run(label: str, limit_s: float):
        notes = []
        status, why = "FAIL", ""
        t0 = time.perf_counter()
        try:
            yield notes
            elapsed = time.perf_counter() - t0
            if elapsed > limit_s:
                raise AssertionError(f"runtime {elapsed:.2f}s over the {limit_s:g}s limit")
            status = "PASS"
        except Exception as exc:
            why = (str(exc).splitlines() or [type(exc).__name__])[0]
            raise
        finally:
            elapsed = time.perf_counter() - t0
            detail = "; ".join(notes + ([why] if why else []))
            line = f"{status} {label} [{elapsed:.2f}s / {limit_s:g}s]" + (f" {detail}" if detail else "")
            request.config.stash[_LINES].append(line)
            print(line)

    return run
