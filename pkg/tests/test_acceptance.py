"""Acceptance criteria at their stated tolerances, one test per criterion.

The pass/fail line of every criterion is repeated in the terminal summary.
"""
import pytest

from nsinflow.acceptance import CRITERIA, run_all

RESULTS = {}


@pytest.fixture(scope="module")
def results():
    for r in run_all():
        RESULTS[r.cid] = r
    return RESULTS


@pytest.mark.parametrize("cid", sorted(CRITERIA), ids=lambda c: f"{c}-{CRITERIA[c][0]}")
def test_criterion(cid, results):
    r = results[cid]
    print(r.line())
    assert r.passed, r.line()
