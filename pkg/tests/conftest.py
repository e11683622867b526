import pytest

from odoforge.group_core import load_chain
from odoforge.tower import build_tower


@pytest.fixture(scope="session")
def dyadic():
    return load_chain("dyadic")


@pytest.fixture(scope="session")
def z2():
    return load_chain("z2")


@pytest.fixture(scope="session")
def tree():
    return load_chain("tree")


@pytest.fixture(scope="session")
def table3():
    return load_chain("table3")


@pytest.fixture(scope="session")
def dyadic_tower(dyadic):
    return build_tower(dyadic)


@pytest.fixture(scope="session")
def z2_tower(z2):
    return build_tower(z2)


@pytest.fixture(scope="session")
def tree_tower(tree):
    return build_tower(tree)


@pytest.fixture(scope="session")
def table3_tower(table3):
    return build_tower(table3)


@pytest.fixture(scope="session")
def towers(dyadic_tower, z2_tower, tree_tower, table3_tower):
    return {"dyadic": dyadic_tower, "z2": z2_tower, "tree": tree_tower, "table3": table3_tower}


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
