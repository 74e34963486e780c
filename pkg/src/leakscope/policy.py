"""Block rules: when is which device jammed.

One-shot rules use absolute epoch seconds with 0 as the "immediately"/"never"
sentinel; recurring rules are HH:MM windows evaluated on the UTC day grid of
the service clock. A device is blocked while ANY rule is active.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Union

from .netmodel import DeviceId


class PolicyError(ValueError):
    code = "bad_request"


class UnknownDeviceError(PolicyError):
    code = "not_found"


class InvalidWindowError(PolicyError):
    code = "bad_request"


class UnknownRuleError(PolicyError):
    code = "not_found"


@dataclass(frozen=True)
class BlockRule:
    rule_id: str
    device: DeviceId
    block_at: int  # 0 = immediately (from created_at)
    unblock_at: int  # 0 = never
    created_at: int


@dataclass(frozen=True)
class RecurringRule:
    rule_id: str
    device: DeviceId
    start_hhmm: str
    end_hhmm: str
    created_at: int


Rule = Union[BlockRule, RecurringRule]


def _hhmm_seconds(text: str) -> int:
    parts = text.split(":")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise InvalidWindowError(f"bad HH:MM time {text!r}")
    hh, mm = int(parts[0]), int(parts[1])
    if hh > 23 or mm > 59 or len(parts[0]) != 2 or len(parts[1]) != 2:
        raise InvalidWindowError(f"bad HH:MM time {text!r}")
    return hh * 3600 + mm * 60


def is_active(rule: Rule, now: float) -> bool:
    if isinstance(rule, BlockRule):
        effective = rule.created_at if rule.block_at == 0 else rule.block_at
        return effective <= now and (rule.unblock_at == 0 or now < rule.unblock_at)
    if now < rule.created_at:
        return False
    start = _hhmm_seconds(rule.start_hhmm)
    end = _hhmm_seconds(rule.end_hhmm)
    second_of_day = int(now) % 86400
    if start < end:
        return start <= second_of_day < end
    return second_of_day >= start or second_of_day < end


def next_change_at(rule: Rule, now: float) -> int | None:
    """Epoch second when the rule's active state next flips; None if it never will."""
    if isinstance(rule, BlockRule):
        effective = rule.created_at if rule.block_at == 0 else rule.block_at
        if now < effective:
            return effective
        if rule.unblock_at and now < rule.unblock_at:
            return rule.unblock_at
        return None
    start = _hhmm_seconds(rule.start_hhmm)
    end = _hhmm_seconds(rule.end_hhmm)
    day = int(now) // 86400 * 86400
    second_of_day = int(now) % 86400
    boundaries = sorted({start, end})
    for b in boundaries:
        if b > second_of_day:
            return day + b
    return day + 86400 + boundaries[0]


class PolicyStore:
    """Thread-safe rule set; evaluation is a pure function of (rules, now)."""

    def __init__(self, device_exists: Callable[[DeviceId], bool] | None = None):
        self._rules: dict[str, Rule] = {}
        self._lock = threading.Lock()
        self._ids = itertools.count(1)
        self._device_exists = device_exists or (lambda device: True)

    def _next_id(self) -> str:
        return f"rule-{next(self._ids)}"

    def add_rule(self, device: DeviceId, block_at: int, unblock_at: int, now: float) -> str:
        if not self._device_exists(device):
            raise UnknownDeviceError(f"unknown device {device!r}")
        if block_at < 0 or unblock_at < 0:
            raise InvalidWindowError("times must be >= 0")
        if unblock_at and block_at and unblock_at <= block_at:
            raise InvalidWindowError("unblock_at must be after block_at")
        if unblock_at and unblock_at <= now:
            raise InvalidWindowError("window lies entirely in the past")
        rule_id = self._next_id()
        with self._lock:
            self._rules[rule_id] = BlockRule(rule_id, device, int(block_at), int(unblock_at), int(now))
        return rule_id

    def add_recurring(self, device: DeviceId, start_hhmm: str, end_hhmm: str, now: float) -> str:
        if not self._device_exists(device):
            raise UnknownDeviceError(f"unknown device {device!r}")
        start = _hhmm_seconds(start_hhmm)
        end = _hhmm_seconds(end_hhmm)
        if start == end:
            raise InvalidWindowError("recurring window must not be empty")
        rule_id = self._next_id()
        with self._lock:
            self._rules[rule_id] = RecurringRule(rule_id, device, start_hhmm, end_hhmm, int(now))
        return rule_id

    def cancel_rule(self, rule_id: str) -> None:
        with self._lock:
            if rule_id not in self._rules:
                raise UnknownRuleError(f"unknown rule {rule_id!r}")
            del self._rules[rule_id]

    def rules(self) -> list[Rule]:
        with self._lock:
            return list(self._rules.values())

    def blocked_set(self, now: float) -> set[DeviceId]:
        return {rule.device for rule in self.rules() if is_active(rule, now)}
