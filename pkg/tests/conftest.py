from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from packlab.instance import Instance

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

EXAMPLE_TEXT = "0.3 2\n0.2 1\n0.1 7"


@pytest.fixture
def example():
    return Instance.from_pairs([("0.3", 2), ("0.2", 1), ("0.1", 7)], "example")


@st.composite
def small_instances(draw, max_types=6, max_den=12, max_items=30):
    """Instances on a small lattice, sized for the brute-force oracles."""
    den = draw(st.integers(2, max_den))
    n = draw(st.integers(1, min(max_types, den)))
    nums = draw(st.lists(st.integers(1, den), min_size=n, max_size=n, unique=True))
    mult = draw(st.lists(st.integers(1, 6), min_size=n, max_size=n))
    while sum(mult) > max_items:
        k = mult.index(max(mult))
        mult[k] -= 1
    return Instance.from_pairs([(Fraction(a, den), m) for a, m in zip(nums, mult)])


def example_state(exact=True):
    """The two-stage example: containers {0,1,2}, {0,2}, {1,2} and three half patterns."""
    from packlab.containers import Container, ContainerPattern, Entry, PackingState

    sizes = (Fraction(3, 10), Fraction(1, 5), Fraction(1, 10))
    C1 = Container.make({0: 1, 1: 1, 2: 1}, sizes)
    C2 = Container.make({0: 1, 2: 1}, sizes)
    C3 = Container.make({1: 1, 2: 1}, sizes)
    half = Fraction(1, 2) if exact else 0.5
    x = [Entry(ContainerPattern.make({C3: 2, C2: 1}), half, 0),
         Entry(ContainerPattern.make({C2: 1, C1: 1}), half, 1),
         Entry(ContainerPattern.make({C1: 1, C3: 1}), half, 2)]
    y = {C1: 1, C2: 1, C3: 2}
    return PackingState(sizes, [2, 1, 7], y, x), (C1, C2, C3)


def staircase_graph():
    """Seven left nodes of sizes 0.7 .. 0.1, right twins with multiplicity 7/10."""
    from packlab.packgraph import PackingGraph

    sizes = tuple(Fraction(8 - i, 10) for i in range(1, 8))
    return PackingGraph(sizes, (1,) * 7, sizes, (Fraction(7, 10),) * 7)


# acceptance lines, filled by test_acceptance.py and echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
