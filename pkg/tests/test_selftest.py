"""Unit tests for selftest.py module."""

from spatial_aoi import selftest
from spatial_aoi.selftest import CHECKS, CheckResult, run_selftest


def test_all_checks_pass():
    results = run_selftest()

    assert len(results) == len(CHECKS)
    failed = [r for r in results if not r.passed]
    assert failed == []


def test_exception_counts_as_failure(monkeypatch, capsys):
    def broken():
        raise ZeroDivisionError("boom")

    monkeypatch.setattr(selftest, "CHECKS", [broken])

    (result,) = run_selftest()

    assert result == CheckResult("broken", False, "ZeroDivisionError: boom")
    assert "Self-test failed: broken" in capsys.readouterr().out
