"""Block-rule semantics: one-shot windows, recurring windows, composition."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakscope.policy import (
    BlockRule,
    InvalidWindowError,
    PolicyStore,
    UnknownDeviceError,
    UnknownRuleError,
    is_active,
)

DEV = "aabbccddeeff"


def make_store(known=(DEV, "112233445566")):
    return PolicyStore(device_exists=lambda d: d in known)


def test_one_shot_window_half_open():
    store = make_store()
    rid = store.add_rule(DEV, block_at=100, unblock_at=200, now=50)
    assert rid == "rule-1"
    assert store.blocked_set(99.9) == set()
    assert store.blocked_set(100.0) == {DEV}
    assert store.blocked_set(199.999) == {DEV}
    assert store.blocked_set(200.0) == set()


def test_zero_block_at_means_immediately():
    store = make_store()
    store.add_rule(DEV, block_at=0, unblock_at=500, now=120)
    assert store.blocked_set(119.0) == set()  # not before creation
    assert store.blocked_set(120.0) == {DEV}
    assert store.blocked_set(499.0) == {DEV}
    assert store.blocked_set(500.0) == set()


def test_zero_unblock_at_means_forever():
    store = make_store()
    store.add_rule(DEV, block_at=300, unblock_at=0, now=10)
    assert store.blocked_set(10 ** 9) == {DEV}
    assert store.blocked_set(299) == set()


def test_unknown_device_rejected():
    store = make_store()
    with pytest.raises(UnknownDeviceError):
        store.add_rule("000000000000", block_at=0, unblock_at=0, now=0)


def test_window_entirely_past_rejected():
    store = make_store()
    with pytest.raises(InvalidWindowError):
        store.add_rule(DEV, block_at=10, unblock_at=20, now=30)


def test_inverted_window_rejected():
    store = make_store()
    with pytest.raises(InvalidWindowError):
        store.add_rule(DEV, block_at=200, unblock_at=100, now=0)


def test_negative_times_rejected():
    store = make_store()
    with pytest.raises(InvalidWindowError):
        store.add_rule(DEV, block_at=-5, unblock_at=100, now=0)


def test_cancel_lifts_block_and_unknown_rule_errors():
    store = make_store()
    rid = store.add_rule(DEV, block_at=0, unblock_at=0, now=0)
    assert store.blocked_set(5) == {DEV}
    store.cancel_rule(rid)
    assert store.blocked_set(5) == set()
    with pytest.raises(UnknownRuleError):
        store.cancel_rule(rid)
    with pytest.raises(UnknownRuleError):
        store.cancel_rule("rule-99")


def test_rule_ids_sequential():
    store = make_store()
    ids = [store.add_rule(DEV, 0, 0, now=0),
           store.add_rule("112233445566", 0, 0, now=0)]
    assert ids == ["rule-1", "rule-2"]


def test_any_active_rule_blocks():
    store = make_store()
    store.add_rule(DEV, block_at=100, unblock_at=200, now=0)
    store.add_rule(DEV, block_at=150, unblock_at=400, now=0)
    # overlap: still blocked when only the second is active
    assert store.blocked_set(300) == {DEV}
    assert store.blocked_set(450) == set()


# Oracle: brute-force evaluation of the interval definition, written
# independently of policy.is_active.
def _oracle_active(created_at, block_at, unblock_at, now):
    start = created_at if block_at == 0 else block_at
    if now < start:
        return False
    if unblock_at == 0:
        return True
    return now < unblock_at


@settings(max_examples=1000, deadline=None)
@given(
    created=st.integers(min_value=0, max_value=10_000),
    block=st.integers(min_value=0, max_value=10_000),
    unblock=st.integers(min_value=0, max_value=10_000),
    now=st.integers(min_value=0, max_value=12_000),
)
def test_one_shot_activity_matches_oracle(created, block, unblock, now):
    rule = BlockRule(rule_id="rule-x", device=DEV, block_at=block,
                     unblock_at=unblock, created_at=created)
    assert is_active(rule, now) == _oracle_active(created, block, unblock, now)


@given(
    block=st.integers(min_value=1, max_value=10_000),
    unblock=st.integers(min_value=1, max_value=10_000),
)
def test_half_open_boundaries(block, unblock):
    if unblock <= block:
        block, unblock = unblock, block + unblock + 1
    rule = BlockRule(rule_id="rule-x", device=DEV, block_at=block,
                     unblock_at=unblock, created_at=0)
    assert is_active(rule, block)
    assert not is_active(rule, unblock)


def test_recurring_window_same_day():
    store = make_store()
    store.add_recurring(DEV, "09:00", "17:00", now=0)
    nine = 9 * 3600
    five_pm = 17 * 3600
    assert store.blocked_set(nine - 1) == set()
    assert store.blocked_set(nine) == {DEV}
    assert store.blocked_set(five_pm - 1) == {DEV}
    assert store.blocked_set(five_pm) == set()
    # same clock times the next day
    day = 86400
    assert store.blocked_set(day + nine) == {DEV}
    assert store.blocked_set(day + five_pm) == set()


def test_recurring_window_overnight_wrap():
    store = make_store()
    store.add_recurring(DEV, "22:00", "06:00", now=0)
    assert store.blocked_set(23 * 3600) == {DEV}
    assert store.blocked_set(86400 + 3 * 3600) == {DEV}   # 03:00 next day
    assert store.blocked_set(12 * 3600) == set()          # midday
    assert store.blocked_set(6 * 3600) == set()           # end is exclusive
    assert store.blocked_set(22 * 3600) == {DEV}          # start is inclusive


def test_recurring_not_active_before_creation():
    store = make_store()
    store.add_recurring(DEV, "00:00", "23:59", now=1000)
    assert store.blocked_set(999) == set()
    assert store.blocked_set(1000) == {DEV}


@pytest.mark.parametrize("start,end", [
    ("9:00", "17:00"), ("09:0", "17:00"), ("24:00", "01:00"),
    ("09:60", "17:00"), ("nope", "17:00"), ("09:00", "09:00"),
])
def test_recurring_bad_windows_rejected(start, end):
    store = make_store()
    with pytest.raises(InvalidWindowError):
        store.add_recurring(DEV, start, end, now=0)


def test_rules_listing_reflects_store():
    store = make_store()
    a = store.add_rule(DEV, 0, 0, now=0)
    b = store.add_recurring(DEV, "01:00", "02:00", now=0)
    listed = {r.rule_id for r in store.rules()}
    assert listed == {a, b}
    store.cancel_rule(a)
    assert {r.rule_id for r in store.rules()} == {b}
