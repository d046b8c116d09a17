"""Per-cycle fetch-thread selection.

One thread fetches per cycle.  The base policies are a rotating round-robin,
fewest-in-flight-instructions (icount), and fewest-unresolved-branches
(brcount); the feedback wrapper restricts the base policy to normal-priority
threads and falls back to demoted ones only when no normal thread is
eligible, so fetch never idles while any thread could supply work.  All
tie-breaks go to the lowest thread id.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

from .model import (
    BrCount,
    ContractViolationError,
    ICount,
    PolicySpec,
    RoundRobin,
    StallFeedback,
)
from .monitor import PriorityRecommendation


class Priority(Enum):
    NORMAL = "normal"
    DEMOTED = "demoted"


@dataclass
class ThreadSchedState:
    """Arbitration inputs for one thread, maintained by the engine.

    ``fetch_blocked`` is set when the thread cannot supply any fetch this
    cycle; a thread with an unresolved mispredicted branch still fetches
    (wrong-path slots), so only stream exhaustion blocks it.
    """

    inflight: int = 0
    unresolved_branches: int = 0
    priority: Priority = Priority.NORMAL
    fetch_blocked: bool = False


class PickResult(NamedTuple):
    chosen: int | None


def _round_robin(candidates: list[int], cursor: int, n: int) -> int:
    eligible = set(candidates)
    for step in range(1, n + 1):
        t = (cursor + step) % n
        if t in eligible:
            return t
    raise ContractViolationError("round robin found no candidate")


def _argmin(candidates: list[int], key) -> int:
    best = candidates[0]
    best_key = key(best)
    for t in candidates[1:]:
        k = key(t)
        if k < best_key:  # strict: ties keep the lowest thread id
            best, best_key = t, k
    return best


def _pick_base(
    policy: PolicySpec,
    states: Sequence[ThreadSchedState],
    candidates: list[int],
    rr_cursor: int,
) -> int:
    if isinstance(policy, RoundRobin):
        return _round_robin(candidates, rr_cursor, len(states))
    if isinstance(policy, ICount):
        return _argmin(candidates, lambda t: states[t].inflight)
    if isinstance(policy, BrCount):
        return _argmin(candidates, lambda t: states[t].unresolved_branches)
    raise ContractViolationError(f"pick called with non-base policy {policy!r}")


def pick(
    policy: PolicySpec,
    states: Sequence[ThreadSchedState],
    rr_cursor: int,
    window_full: bool = False,
) -> PickResult:
    """Choose the thread to fetch from this cycle, or nobody.

    A full shared window makes every thread ineligible.  The feedback
    wrapper applies its base policy to eligible normal-priority threads
    first and to demoted ones only when no normal thread is eligible.
    """
    if window_full:
        return PickResult(None)
    eligible = [t for t, s in enumerate(states) if not s.fetch_blocked]
    if not eligible:
        return PickResult(None)
    if isinstance(policy, StallFeedback):
        normal = [t for t in eligible if states[t].priority is Priority.NORMAL]
        pool = normal if normal else eligible
        return PickResult(_pick_base(policy.base, states, pool, rr_cursor))
    return PickResult(_pick_base(policy, states, eligible, rr_cursor))


def apply_feedback(
    states: Sequence[ThreadSchedState],
    thread: int,
    rec: PriorityRecommendation,
) -> None:
    """Apply a monitor recommendation to one thread's priority class.

    Demoting an already-demoted thread (or restoring a normal one) means the
    monitor and arbiter disagree about priority state: an engine bug, so the
    run halts.
    """
    state = states[thread]
    if rec is PriorityRecommendation.NO_CHANGE:
        return
    if rec is PriorityRecommendation.DEMOTE:
        if state.priority is not Priority.NORMAL:
            raise ContractViolationError(f"demote of already-demoted thread {thread}")
        state.priority = Priority.DEMOTED
    elif rec is PriorityRecommendation.RESTORE:
        if state.priority is not Priority.DEMOTED:
            raise ContractViolationError(f"restore of normal-priority thread {thread}")
        state.priority = Priority.NORMAL
