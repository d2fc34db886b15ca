import itertools

import pytest

from rqlab.groups import Free, parse_group
from rqlab.words import free_reduce


@pytest.fixture
def f2():
    return Free(2)


@pytest.fixture
def g2():
    return parse_group("direct(free(8), z2)")


def all_words(size, ell):
    return itertools.product(range(size), repeat=ell)


def reduced_words(m, ell):
    return [w for w in all_words(2 * m, ell) if free_reduce(w) == w]


def cyc_reduced(m, ell):
    return [w for w in reduced_words(m, ell) if ell < 2 or w[0] != (w[-1] ^ 1)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
