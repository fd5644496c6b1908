from hypothesis import given, settings
from hypothesis import strategies as st

from greyline.costs import TO_FALSE, TO_TRUE, WRITE
from greyline.interp import (
    ASSERT_FAILED,
    CHECKED_ERROR,
    FUEL_EXHAUSTED,
    RETURNED,
    Call,
    ExecConfig,
    InputVector,
    Interpreter,
    execute,
)
from greyline.ir import parse_program


def bar_input(a, b, c):
    return InputVector((Call(0, (a, b, c)),))


def test_simple_returns(bar):
    assert execute(bar, bar_input(-1, 0, -5)).returns() == [1]
    assert execute(bar, bar_input(42, 3, -5)).returns() == [2]
    assert execute(bar, bar_input(-1, 3, -5)).returns() == [3]
    assert execute(bar, bar_input(-1, 6, 0)).returns() == [4]
    assert execute(bar, bar_input(-1, 6, 42)).returns() == [5]


def test_assert_failure_outcome(nested_eq):
    inp = InputVector((Call(0, (49,)),))
    res = execute(nested_eq, inp)
    assert res.call_outcomes[0].kind == ASSERT_FAILED
    ok = execute(nested_eq, InputVector((Call(0, (0,)),)))
    assert ok.call_outcomes[0].kind == RETURNED


def test_deterministic(bar):
    a = execute(bar, bar_input(7, -3, 99))
    b = execute(bar, bar_input(7, -3, 99))
    assert a.costs == b.costs
    assert a.trace == b.trace
    assert [o.kind for o in a.call_outcomes] == [o.kind for o in b.call_outcomes]


COUNTER = parse_program(
    """
storage cell n;
fn bump(x) {
    require(x > 0);
    n = n + x;
    return n;
}
fn read() { return n; }
"""
)


def test_storage_persists_across_calls():
    inp = InputVector((Call(0, (5,)), Call(0, (3,)), Call(1, ())))
    res = execute(COUNTER, inp)
    assert res.returns() == [5, 8, 8]


def test_failed_call_rolls_back_storage():
    inp = InputVector((Call(0, (5,)), Call(0, (-1,)), Call(1, ())))
    res = execute(COUNTER, inp)
    assert res.returns() == [5, None, 5]
    assert res.call_outcomes[1].kind != RETURNED


OVERFLOW = parse_program(
    """
fn add(x, y) { return x + y; }
fn div(x, y) { return x / y; }
"""
)


def test_checked_overflow():
    big = 2**63 - 1
    res = execute(OVERFLOW, InputVector((Call(0, (big, 1)),)))
    assert res.call_outcomes[0].kind == CHECKED_ERROR
    ok = execute(OVERFLOW, InputVector((Call(0, (big, 0)),)))
    assert ok.returns() == [big]


def test_div_by_zero_and_truncation():
    res = execute(OVERFLOW, InputVector((Call(1, (1, 0)),)))
    assert res.call_outcomes[0].kind == CHECKED_ERROR
    assert execute(OVERFLOW, InputVector((Call(1, (-7, 2)),))).returns() == [-3]
    assert execute(OVERFLOW, InputVector((Call(1, (7, -2)),))).returns() == [-3]


LOOP = parse_program(
    """
fn spin(n) {
    let i = 0;
    while i < n { i = i + 1; }
    return i;
}
"""
)


def test_fuel_exhaustion():
    cfg = ExecConfig(fuel=50)
    res = execute(LOOP, InputVector((Call(0, (10**6,)),)), cfg)
    assert res.call_outcomes[0].kind == FUEL_EXHAUSTED
    ok = execute(LOOP, InputVector((Call(0, (5,)),)), cfg)
    assert ok.returns() == [5]


def test_fuel_exhaustion_stops_remaining_calls():
    cfg = ExecConfig(fuel=50)
    inp = InputVector((Call(0, (10**6,)), Call(0, (1,))))
    res = execute(LOOP, inp, cfg)
    assert len(res.call_outcomes) == 1


def test_args_wrap_to_width():
    res = execute(OVERFLOW, InputVector((Call(0, (2**64 + 3, 0)),)))
    assert res.returns() == [3]
    res = execute(OVERFLOW, InputVector((Call(0, (2**63, 0)),)))
    assert res.returns() == [-(2**63)]


def test_cost_vector_matches_branch_semantics(bar):
    res = execute(bar, bar_input(-1, 0, -5))
    s0 = bar.branch_sites[0]
    s1 = bar.branch_sites[1]
    assert res.costs[(s0, TO_FALSE)] == 6
    assert res.costs[(s1, TO_FALSE)] == 3
    assert res.costs[(s0, TO_TRUE)] == 0
    assert res.costs[(s1, TO_TRUE)] == 0


def test_wallet_underflow_enables_oob_write(wallet):
    probe = 123456789
    cfg = ExecConfig(probe_addr=probe)
    codes = wallet.storage("codes")
    # pop on empty wraps the length to u64 max, so a huge index passes the
    # bounds check and the element write lands at an attacker-chosen slot.
    idx = (probe - codes.elem_base) % (1 << 64)
    idx_signed = idx - (1 << 64) if idx >= 1 << 63 else idx
    inp = InputVector((Call(wallet.function_index("PopCode"), ()), Call(wallet.function_index("SetCodeAt"), (idx_signed, 7))))
    res = execute(wallet, inp, cfg)
    addrs = [w[0] for w in res.storage_writes]
    assert probe in addrs
    assert min(c for (s, d), c in res.costs.items() if d == WRITE) == 0


def test_in_bounds_write_without_underflow(wallet):
    cfg = ExecConfig(probe_addr=999)
    inp = InputVector((Call(wallet.function_index("PushCode"), (11,)), Call(wallet.function_index("SetCodeAt"), (0, 22))))
    res = execute(wallet, inp, cfg)
    assert res.call_outcomes[0].kind == RETURNED
    assert res.call_outcomes[1].kind == RETURNED
    codes = wallet.storage("codes")
    assert res.storage[codes.elem_base] == 22


def test_oob_store_is_checked_error_without_underflow(wallet):
    inp = InputVector((Call(wallet.function_index("SetCodeAt"), (5, 1)),))
    res = execute(wallet, inp)
    assert res.call_outcomes[0].kind == CHECKED_ERROR


@settings(max_examples=200)
@given(
    st.integers(-(2**63), 2**63 - 1),
    st.integers(-(2**63), 2**63 - 1),
    st.integers(-(2**63), 2**63 - 1),
)
def test_bar_total_and_costs_nonnegative(bar, a, b, c):
    res = execute(bar, bar_input(a, b, c))
    assert len(res.call_outcomes) == 1
    assert all(cost >= 0 for cost in res.costs.values())
