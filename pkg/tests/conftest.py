import pytest

_LINES = []


class Report:
    """One verdict line per acceptance criterion, plus indented detail lines."""

    def verdict(self, criterion, passed, detail):
        self._emit(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")

    def note(self, text):
        self._emit(f"    {text}")

    @staticmethod
    def _emit(line):
        _LINES.append(line)
        print(line)


@pytest.fixture(scope="session")
def report():
    return Report()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
