"""
Check reports shared by the validators, the pipeline and the service.

A check either passes, fails with a violation carrying a witness, or (for the
sampled checks) finds no failure at the current resolution.
"""
import csv
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence

from kuranishi_atlas.errors import KuranishiError

PASS = "PASS"
FAIL = "FAIL"
NO_FAILURE = "NO-FAILURE-AT-RESOLUTION"
SKIPPED = "SKIPPED"


def format_value(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, (tuple, list)):
        return "(" + ", ".join(format_value(v) for v in value) + ")"
    if isinstance(value, (set, frozenset)):
        return "{" + ",".join(str(v) for v in sorted(value)) + "}"
    return str(value)


@dataclass
class Witness:
    check: str
    label: str
    point: Any
    note: str = ""

    def row(self) -> List[str]:
        return [self.check, self.label, format_value(self.point), self.note]


@dataclass
class CheckReport:
    name: str
    status: str = PASS
    details: Dict[str, Any] = field(default_factory=dict)
    witnesses: List[Witness] = field(default_factory=list)
    violation: Optional[KuranishiError] = None

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def fail(self, violation: KuranishiError, label: str = "", point: Any = None) -> "CheckReport":
        """Record a violation; the first one is kept for :meth:`raise_for_status`."""
        self.status = FAIL
        if self.violation is None:
            self.violation = violation
        witness = point if point is not None else getattr(violation, "witness", None)
        self.witnesses.append(Witness(self.name, label, witness, str(violation)))
        logging.info(f"{self.name}: {violation}")
        return self

    def flag(self, label: str, point: Any, note: str) -> "CheckReport":
        """Record a diagnostic finding that is not an error of the input."""
        self.status = FAIL
        self.witnesses.append(Witness(self.name, label, point, note))
        return self

    def sampled(self) -> "CheckReport":
        """Mark a passing sampled check as inconclusive beyond the sample resolution."""
        if self.status == PASS:
            self.status = NO_FAILURE
        return self

    def skip(self, reason: str) -> "CheckReport":
        self.status = SKIPPED
        self.details["reason"] = reason
        logging.warning(f"{self.name} skipped: {reason}")
        return self

    def raise_for_status(self) -> None:
        if self.violation is not None:
            raise self.violation

    def summary(self) -> str:
        lines = [f"{self.name}: {self.status}"]
        for key, value in self.details.items():
            lines.append(f"  {key}: {format_value(value)}")
        for witness in self.witnesses[:5]:
            lines.append(f"  witness {witness.label} {format_value(witness.point)}: {witness.note}")
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status,
            "details": {key: format_value(value) for key, value in self.details.items()},
            "witnesses": [
                {"label": w.label, "point": format_value(w.point), "note": w.note} for w in self.witnesses
            ],
        }


def merge_reports(name: str, reports: Iterable[CheckReport]) -> CheckReport:
    """One report per check family; the sub-report statuses go into the details."""
    merged = CheckReport(name)
    for report in reports:
        merged.witnesses.extend(report.witnesses)
        merged.details[report.name] = report.status
        if report.status == FAIL:
            merged.status = FAIL
            if merged.violation is None:
                merged.violation = report.violation
        elif report.status == NO_FAILURE and merged.status == PASS:
            merged.status = NO_FAILURE
    return merged


def all_passed(reports: Iterable[CheckReport]) -> bool:
    return all(report.passed for report in reports)


def write_witnesses(path: str, reports: Sequence[CheckReport]) -> int:
    """
    Write every witness of ``reports`` as CSV.

    :param path: destination file; parent directories are created.
    :param reports: reports to collect witnesses from.
    :return: number of witness rows written.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    count = 0
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["check", "label", "point", "note"])
        for report in reports:
            for witness in report.witnesses:
                writer.writerow(witness.row())
                count += 1
    return count
