"""Acceptance suite: runs every verification criterion at full scale and
prints one pass/fail line per criterion.

These are the same checks as ``permuton verify --suite full``; expensive
artifacts (density grids, the n=12 sample batch, the 200-replica skew
ensemble) are computed once per session and shared between criteria.

Run with ``pytest tests/test_acceptance.py -v -s`` to watch the lines appear;
the whole module takes on the order of 15 minutes on two cores.
"""

import pytest

from permuton.verify import CRITERIA, VerifyContext


@pytest.fixture(scope="session")
def ctx():
    return VerifyContext(quick=False, threads=None)


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_acceptance(criterion, ctx):
    result = criterion(ctx)
    print("\n" + result.line())
    assert result.passed, result.line()
