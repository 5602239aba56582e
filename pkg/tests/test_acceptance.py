"""Acceptance criteria.

Every test runs one check from :mod:`thermoprobe.selftest`, prints a single
PASS/FAIL line, and asserts the measured worst case against the tolerance
and time budget written here (not the ones the check reports about itself).
"""

import pytest

from thermoprobe import selftest

# criterion number -> (check, tolerance, time limit in seconds)
CRITERIA = {
    1: (selftest.check_route_equivalence, 1e-8, 30.0),
    2: (selftest.check_ode_oracle, 1e-8, 120.0),
    3: (selftest.check_invariance, 1e-10, 10.0),
    4: (selftest.check_optimal_measurement, 1e-8, 10.0),
    5: (selftest.check_comoving_limit, 1e-8, 5.0),
    6: (selftest.check_multiparameter, 1e-10, 60.0),
    7: (selftest.check_trapping, 1e-3, 30.0),
    8: (selftest.check_morphology, 0.0, 120.0),
    9: (selftest.check_numerics, 1.0, 5.0),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    check, tolerance, limit = CRITERIA[number]
    result = check()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.number == number
    assert (result.tolerance, result.time_limit) == (tolerance, limit)
    assert result.ok, result.detail
    assert result.metric <= tolerance, result.line()
    assert result.seconds < limit, result.line()


def test_selftest_reports_every_criterion():
    assert [c.__name__ for c in selftest.CRITERIA] == [CRITERIA[n][0].__name__ for n in sorted(CRITERIA)]
