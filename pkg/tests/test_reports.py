import csv
import logging

import pytest

from kuranishi_atlas.errors import CocycleViolation
from kuranishi_atlas.reports import FAIL, NO_FAILURE, PASS, SKIPPED, CheckReport, merge_reports, write_witnesses


def test_sampled_only_softens_a_pass():
    assert CheckReport("maps").sampled().status == NO_FAILURE
    failed = CheckReport("maps").flag("{1}", (0, 0), "off by one").sampled()
    assert failed.status == FAIL


def test_merge_reports():
    merged = merge_reports("validate", [CheckReport("covering"), CheckReport("maps").sampled(),
                                        CheckReport("tame").skip("not additive")])
    assert merged.status == NO_FAILURE
    assert merged.details == {"covering": PASS, "maps": NO_FAILURE, "tame": SKIPPED}
    assert merged.passed


def test_failure_is_raised_again():
    violation = CocycleViolation("standard", [frozenset({1}), frozenset({1, 2}), frozenset({1, 2, 3})])
    report = merge_reports("validate", [CheckReport("cocycle").fail(violation, "{1,2,3}")])
    assert not report.passed
    with pytest.raises(CocycleViolation):
        report.raise_for_status()


def test_write_witnesses(tmp_path):
    report = CheckReport("covering").flag("{1,2}", (1, 2), "uncovered")
    path = tmp_path / "nested" / "witnesses.csv"
    assert write_witnesses(str(path), [report, CheckReport("maps")]) == 1
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows == [["check", "label", "point", "note"], ["covering", "{1,2}", "(1, 2)", "uncovered"]]


def test_skip_is_logged(caplog):
    with caplog.at_level(logging.WARNING):
        report = CheckReport("tame").skip("not additive")
    assert report.details["reason"] == "not additive"
    assert "tame skipped: not additive" in caplog.text
