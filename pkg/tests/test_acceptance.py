"""Acceptance suite: one test and one printed pass/fail line per criterion.

Run standalone with ``python tests/test_acceptance.py`` or through pytest,
which repeats the lines in its terminal summary.
"""

import pytest

from finitepulse import validation

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []


@pytest.fixture(scope="module")
def suite():
    results = validation.run_all(seed=0, echo=print)
    ACCEPTANCE_LINES.extend(r.line() for r in results)
    return {r.number: r for r in results}


@pytest.mark.parametrize("number", range(1, 13))
def test_criterion(suite, number):
    res = suite[number]
    assert res.passed, f"{res.line()} info={res.info}"


if __name__ == "__main__":
    for r in validation.run_all(seed=0):
        print(r.line())
