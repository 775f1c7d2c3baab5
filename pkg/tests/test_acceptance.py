"""Acceptance suite: one test per criterion, each printing its PASS/FAIL line."""
import pytest

from dualsolver.cli.acceptance import CRITERIA, load_tolerances, run_criterion


@pytest.fixture(scope="module")
def tolerances():
    return load_tolerances()[0]


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=[f"c{c[0]}" for c in CRITERIA])
def test_criterion(number, tolerances, capsys):
    res = run_criterion(number, tolerances)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
