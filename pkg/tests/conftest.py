from hypothesis import settings

# fixed example order: property suites must not flake between runs
settings.register_profile("repro", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("repro")

# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
