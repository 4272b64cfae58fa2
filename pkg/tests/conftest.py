import _verdicts


def pytest_terminal_summary(terminalreporter):
    if _verdicts.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts.RESULTS:
            terminalreporter.write_line(line)
