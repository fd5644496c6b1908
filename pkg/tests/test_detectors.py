from greyline.detectors import (
    ARBITRARY_STORAGE_WRITE,
    ASSERTION_VIOLATION,
    CHECKED_ARITH_ERROR,
    PRECONDITION_VIOLATION,
    BugLedger,
    classify,
)
from greyline.interp import Call, ExecConfig, InputVector, execute
from greyline.ir import parse_program

PROG = parse_program(
    """
storage cell n;
fn guarded(x) {
    require(x > 0);
    if x > 10 { require(x < 20); }
    return x;
}
fn broken(x) { assert(x < 5); return x; }
fn hot(x) { return x + 9223372036854775807; }
fn store(x) { n = x; return n; }
"""
)


def run(calls, probe=None):
    return execute(PROG, InputVector(tuple(calls)), ExecConfig(probe_addr=probe))


def test_assert_failure_is_assertion_violation():
    res = run([Call(1, (9,))])
    found = classify(res, None, PROG.entry_require_sites)
    assert [(k, s) for k, s, _ in found] == [(ASSERTION_VIOLATION, res.call_outcomes[0].site)]


def test_require_failure_is_precondition_violation():
    res = run([Call(0, (-3,))])
    found = classify(res, None, PROG.entry_require_sites)
    assert [k for k, _, _ in found] == [PRECONDITION_VIOLATION]


def test_entry_requires_can_be_ignored():
    entry = run([Call(0, (-3,))])
    assert classify(entry, None, PROG.entry_require_sites, ignore_entry_requires=True) == []
    # a require past the function prologue still counts
    inner = run([Call(0, (15,))])
    assert inner.call_outcomes[0].kind == 0  # x=15 passes both
    inner = run([Call(0, (25,))])
    found = classify(inner, None, PROG.entry_require_sites, ignore_entry_requires=True)
    assert [k for k, _, _ in found] == [PRECONDITION_VIOLATION]


def test_overflow_is_checked_arith_error():
    res = run([Call(2, (1,))])
    found = classify(res, None, PROG.entry_require_sites)
    assert [k for k, _, _ in found] == [CHECKED_ARITH_ERROR]


def test_probe_hit_is_arbitrary_storage_write():
    cell = PROG.storage("n").base_addr
    res = run([Call(3, (7,))], probe=cell)
    found = classify(res, cell, PROG.entry_require_sites)
    assert [k for k, _, _ in found] == [ARBITRARY_STORAGE_WRITE]
    # same write with a different probe is clean
    res2 = run([Call(3, (7,))], probe=cell + 1)
    assert classify(res2, cell + 1, PROG.entry_require_sites) == []


def test_clean_run_has_no_findings():
    res = run([Call(0, (5,)), Call(3, (1,))], probe=12345)
    assert classify(res, 12345, PROG.entry_require_sites) == []


def test_ledger_dedups_by_kind_and_site():
    ledger = BugLedger()
    w = InputVector((Call(1, (9,)),))
    first = ledger.report(ASSERTION_VIOLATION, 3, "", w, 0.1, 10)
    dup = ledger.report(ASSERTION_VIOLATION, 3, "", w, 0.2, 20)
    other = ledger.report(ASSERTION_VIOLATION, 4, "", w, 0.3, 30)
    assert first is not None and dup is None and other is not None
    assert [b.id for b in ledger.bugs] == [
        f"{ASSERTION_VIOLATION}@3", f"{ASSERTION_VIOLATION}@4"]
    assert first.first_seen_execs == 10


def test_witness_replays_to_same_finding():
    res = run([Call(1, (9,))])
    found = classify(res, None, PROG.entry_require_sites)
    ledger = BugLedger()
    bug = ledger.report(*found[0][:2], found[0][2], InputVector((Call(1, (9,)),)), 0, 1)
    replay = execute(PROG, bug.witness)
    again = classify(replay, None, PROG.entry_require_sites)
    assert [(k, s) for k, s, _ in again] == [(bug.kind, bug.site)]
