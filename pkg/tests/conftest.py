import pytest

_LINES = []


class _Criteria:
    def report(self, number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        _LINES.append(line)
        print(line)
        assert ok, line

    def note(self, number, text):
        line = f"criterion {number}: {text}"
        _LINES.append(line)
        print(line)


@pytest.fixture
def criteria():
    return _Criteria()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
