"""Acceptance criteria 1-17 at their stated tolerances.

The numerical budget is chosen with ULTRAINDEX_PROFILE (``full`` by default,
``smoke`` for a quicker pass of the sweep-based checks).
"""

import os

import pytest

from ultraindex import validation

PROFILE = os.environ.get("ULTRAINDEX_PROFILE", "full")


@pytest.mark.parametrize("cid", sorted(validation.CHECKS))
def test_acceptance(cid, capsys):
    res = validation.run_check(cid, PROFILE)
    with capsys.disabled():
        print(f"\n[{'PASS' if res.passed else 'FAIL'}] {res.id} {res.name}: {res.detail}")
    assert res.passed, res.detail
