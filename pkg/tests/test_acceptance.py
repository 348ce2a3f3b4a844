"""The nine acceptance criteria at their stated tolerances, one test each.

A pass/fail line per criterion is printed in the terminal summary.
"""
import pytest

from quenchlab.acceptance import CRITERIA, run_checks

from conftest import ACCEPTANCE_LINES


# Monte Carlo heavy criteria (about a minute or more each on one core)
SLOW = {4, 8, 9}


@pytest.mark.parametrize("number", [pytest.param(k, marks=pytest.mark.slow) if k in SLOW else k
                                    for k in sorted(CRITERIA)])
def test_criterion(number):
    (res,) = run_checks([number])
    ACCEPTANCE_LINES[number] = res.line()
    print(res.line())
    assert res.passed, res.line()
