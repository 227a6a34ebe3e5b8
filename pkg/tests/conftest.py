import pytest
from hypothesis import strategies as st

from pttc.market import Allocation, ExchangeMarket


def swap_market() -> ExchangeMarket:
    return ExchangeMarket.from_lists(2, [0, 1], [[1, 0], [0, 1]])


@pytest.fixture
def swap():
    return swap_market()


@st.composite
def markets(draw, max_n=6, max_k=4, min_n=1):
    k = draw(st.integers(1, max_k))
    n = draw(st.integers(min_n, max_n))
    endowments = draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
    rankings = draw(st.lists(st.permutations(range(k)), min_size=n, max_size=n))
    return ExchangeMarket.from_lists(k, endowments, rankings)


@st.composite
def markets_with_allocation(draw, max_n=6, max_k=4):
    m = draw(markets(max_n=max_n, max_k=max_k))
    goods = draw(st.permutations(m.endowments))
    return m, Allocation(tuple(goods))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
