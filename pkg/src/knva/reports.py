"""Structured check records shared by the verification suites and the CLI.

Reports are append-structured: one JSON record per check, so a partially
written report file is still parseable line by line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    """Outcome of one verification check."""

    name: str
    passed: bool
    residual: str | None = None
    tolerance: str | None = None
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "check": self.name,
            "pass": self.passed,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "params": self.params,
            "details": self.details,
        }
        return json.dumps(payload, sort_keys=True)

    def human(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ""
        if self.residual is not None:
            extra = f"  residual={self.residual}"
            if self.tolerance is not None:
                extra += f" (tol {self.tolerance})"
        params = ""
        if self.params:
            params = " [" + ", ".join(f"{k}={v}" for k, v in sorted(self.params.items())) + "]"
        return f"{status}  {self.name}{params}{extra}"


class Report:
    """Ordered collection of check records with an overall verdict."""

    def __init__(self, records: list[CheckRecord] | None = None):
        self.records: list[CheckRecord] = list(records or [])

    def add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        return record

    def extend(self, records) -> None:
        self.records.extend(records)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def to_jsonl(self) -> str:
        return "\n".join(r.to_json() for r in self.records) + "\n"

    def human(self) -> str:
        lines = [r.human() for r in self.records]
        n_fail = len(self.failures())
        lines.append(
            f"{len(self.records)} checks, "
            + ("all passed" if n_fail == 0 else f"{n_fail} FAILED")
        )
        return "\n".join(lines)
