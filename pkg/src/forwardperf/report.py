"""Structured verification reports.

A report is a keyed collection of check records. Records are addressed by
their ``check_tag`` (plus bracketed qualifiers for parametrized checks), so
merging reports is order-independent and two runs over the same inputs
produce byte-identical serializations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping


@dataclass(frozen=True)
class CheckRecord:
    """One pass/fail verdict with its quantitative context.

    ``value`` is the measured quantity, ``target`` what it was compared
    against; exactly one of ``tolerance`` (deterministic checks) or
    ``std_error`` (statistical checks) is normally set.
    """

    check_tag: str
    verdict: bool
    value: float | None = None
    target: float | None = None
    tolerance: float | None = None
    std_error: float | None = None
    worst_node: str | None = None
    notes: tuple[str, ...] = ()
    details: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "check_tag": self.check_tag,
            "verdict": "pass" if self.verdict else "fail",
            "value": self.value,
            "target": self.target,
        }
        if self.tolerance is not None:
            out["tolerance"] = self.tolerance
        if self.std_error is not None:
            out["std_error"] = self.std_error
        if self.worst_node is not None:
            out["worst_node"] = self.worst_node
        if self.notes:
            out["notes"] = list(self.notes)
        if self.details:
            out["details"] = _plain(self.details)
        return out


def _plain(obj):
    """Recursively convert mappings/sequences/numpy scalars to JSON-safe types."""
    import numpy as np

    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj


class VerificationReport:
    """Keyed set of CheckRecords with stable serialization."""

    def __init__(self, records: Iterable[CheckRecord] = ()):
        self._records: dict[str, CheckRecord] = {}
        for rec in records:
            self.add(rec)

    def add(self, rec: CheckRecord) -> None:
        if rec.check_tag in self._records:
            raise ValueError(f"duplicate check tag {rec.check_tag!r}")
        self._records[rec.check_tag] = rec

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        """Add every record of ``other`` into this report (returns self)."""
        for rec in other._records.values():
            self.add(rec)
        return self

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, tag: str) -> bool:
        return tag in self._records

    def __getitem__(self, tag: str) -> CheckRecord:
        return self._records[tag]

    def records(self) -> list[CheckRecord]:
        return [self._records[k] for k in sorted(self._records)]

    @property
    def all_passed(self) -> bool:
        return all(r.verdict for r in self._records.values())

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records() if not r.verdict]

    def to_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "checks": {k: self._records[k].to_dict() for k in sorted(self._records)},
        }

    def to_json(self, indent: int | None = 2) -> str:
        # sort_keys plus repr-roundtrip floats make the output byte-stable
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True, allow_nan=False)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def to_text(self) -> str:
        lines = []
        for rec in self.records():
            verdict = "PASS" if rec.verdict else "FAIL"
            parts = [f"[{verdict}] {rec.check_tag}"]
            if rec.value is not None:
                parts.append(f"value={rec.value:.10g}")
            if rec.target is not None:
                parts.append(f"target={rec.target:.10g}" if isinstance(rec.target, float) else f"target={rec.target}")
            if rec.tolerance is not None:
                parts.append(f"tol={rec.tolerance:g}")
            if rec.std_error is not None:
                parts.append(f"std_error={rec.std_error:.4g}")
            if rec.worst_node is not None:
                parts.append(f"worst_node={rec.worst_node}")
            lines.append("  ".join(parts))
            for note in rec.notes:
                lines.append(f"    note: {note}")
        lines.append(f"overall: {'PASS' if self.all_passed else 'FAIL'}")
        return "\n".join(lines)
