import pytest

from priorflow.core import RoleSet, RoleSpec


@pytest.fixture
def two_roles() -> RoleSet:
    return RoleSet([RoleSpec("Algorithm Designer"), RoleSpec("Programming Expert", may_terminate=True)])


@pytest.fixture
def abc_roles() -> RoleSet:
    return RoleSet([RoleSpec("A"), RoleSpec("B"), RoleSpec("C", may_terminate=True)])


# Filled in by test_acceptance.py; one line per acceptance criterion.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
