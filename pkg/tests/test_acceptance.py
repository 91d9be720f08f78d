"""Acceptance gate: every catalog claim at its stated tolerance.

Each criterion prints its pass/fail line; run `pytest -s
tests/test_acceptance.py` (or `morseflow check`) to watch them stream.
"""

import pytest

from morseflow import acceptance


@pytest.fixture(scope="module")
def contexts():
    return acceptance.make_contexts()


@pytest.mark.parametrize(
    "number,name",
    [(num, name) for num, name, _, _ in acceptance.CRITERIA],
    ids=[f"c{num:02d}_{name.replace(' ', '_')}"
         for num, name, _, _ in acceptance.CRITERIA],
)
def test_criterion(number, name, contexts):
    result = acceptance.run_criterion(number, contexts)
    print(result.line())
    assert result.passed, "; ".join(result.failures)
