"""Bug oracles over execution results.

Two vulnerability families: crashes (assertion/precondition violations
and checked arithmetic errors) and arbitrary storage writes, flagged
when a write lands exactly on the campaign's random probe address.
Findings are deduplicated by (kind, site).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from greyline import interp
from greyline.interp import ExecutionResult, InputVector

ASSERTION_VIOLATION = "assertion-violation"
PRECONDITION_VIOLATION = "precondition-violation"
CHECKED_ARITH_ERROR = "checked-arith-error"
ARBITRARY_STORAGE_WRITE = "arbitrary-storage-write"

_OUTCOME_KIND = {
    interp.ASSERT_FAILED: ASSERTION_VIOLATION,
    interp.REQUIRE_FAILED: PRECONDITION_VIOLATION,
    interp.CHECKED_ERROR: CHECKED_ARITH_ERROR,
}


@dataclass
class Bug:
    kind: str
    site: int
    witness: InputVector
    first_seen_seconds: float = 0.0
    first_seen_execs: int = 0
    detail: str = ""

    @property
    def id(self) -> str:
        return f"{self.kind}@{self.site}"


def classify(
    result: ExecutionResult,
    probe_addr: int | None,
    entry_require_sites: set[int] = frozenset(),
    ignore_entry_requires: bool = False,
) -> list[tuple[str, int, str]]:
    """All (kind, site, detail) findings in one execution.

    `entry_require_sites` holds sites of requires in a function's
    leading guard prefix; with `ignore_entry_requires` those failures
    are treated as rejected inputs rather than bugs.
    """
    found = []
    for outcome in result.call_outcomes:
        kind = _OUTCOME_KIND.get(outcome.kind)
        if kind is None:
            continue
        if (ignore_entry_requires and kind == PRECONDITION_VIOLATION
                and outcome.site in entry_require_sites):
            continue
        found.append((kind, outcome.site, outcome.detail))
    if probe_addr is not None:
        for addr, _value, site in result.storage_writes:
            if addr == probe_addr:
                found.append((ARBITRARY_STORAGE_WRITE, site, f"addr=0x{addr:x}"))
    return found


@dataclass
class BugLedger:
    """Campaign-level dedup of findings by (kind, site)."""

    bugs: list[Bug] = field(default_factory=list)
    _seen: set[tuple[str, int]] = field(default_factory=set)

    def report(self, kind: str, site: int, detail: str, witness: InputVector,
               seconds: float, execs: int) -> Bug | None:
        dedup_key = (kind, site)
        if dedup_key in self._seen:
            return None
        self._seen.add(dedup_key)
        bug = Bug(kind=kind, site=site, witness=witness, detail=detail,
                  first_seen_seconds=seconds, first_seen_execs=execs)
        self.bugs.append(bug)
        return bug
