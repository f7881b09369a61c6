"""One test per acceptance criterion, printed as a pass/fail line with its checks."""

import pytest

from neumannlab.acceptance import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = run_criterion(number)
    print()
    print(res.summary())
    assert res.passed, res.summary()
