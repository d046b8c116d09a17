"""Per-thread branch-stall monitoring and priority recommendations.

Each thread owns two counters over a fixed monitoring window of T cycles: a
misprediction count and the total stall cycles those mispredictions cost
(fetch-to-resolve interval).  At every window boundary the monitor computes
the average stall per misprediction and compares it against the threshold H;
a thread sitting above H is recommended for demotion, one back below H for
restoration.  The optional 2-bit hysteresis filter only demotes after two
consecutive above-threshold windows and only restores after two consecutive
below-threshold windows.

Windows are fixed, globally aligned epochs: boundaries are the cycles that
are multiples of T, shared by all threads.  A window with zero
mispredictions scores 0 (never demotes).  The comparison is strict:
metric > H demotes, equality counts as below.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import ContractViolationError


@dataclass
class WindowCounters:
    """The two per-thread counters, reset at each window boundary."""

    mispredict_count: int = 0
    stall_cycles: int = 0
    window_start: int = 0


class HysteresisState(Enum):
    STABLE_NORMAL = "stable_normal"
    PENDING_DEMOTE = "pending_demote"
    STABLE_DEMOTED = "stable_demoted"
    PENDING_RESTORE = "pending_restore"


class PriorityRecommendation(Enum):
    DEMOTE = "demote"
    RESTORE = "restore"
    NO_CHANGE = "no_change"


@dataclass(frozen=True)
class MonitorEvent:
    """One audit-log row per thread per window boundary.

    Carries the raw counter values so every recommendation can be replayed
    offline from the log alone.
    """

    cycle: int
    thread: int
    mispredicts: int
    stall_cycles: int
    metric: float
    above_threshold: bool
    recommendation: PriorityRecommendation
    fsm_state_after: HysteresisState | None  # None when hysteresis is off


EVENT_CSV_HEADER = "cycle,thread,mispredicts,stall_cycles,metric,above,recommendation,fsm_state"


def event_csv_row(ev: MonitorEvent) -> str:
    fsm = ev.fsm_state_after.value if ev.fsm_state_after is not None else ""
    above = "true" if ev.above_threshold else "false"
    return (
        f"{ev.cycle},{ev.thread},{ev.mispredicts},{ev.stall_cycles},"
        f"{ev.metric!r},{above},{ev.recommendation.value},{fsm}"
    )


def record_misprediction(counters: WindowCounters, stall: int) -> None:
    """Charge one resolved misprediction and its stall to the open window."""
    if stall < 0:
        raise ContractViolationError("negative stall charged to monitor")
    counters.mispredict_count += 1
    counters.stall_cycles += stall


def average_stall(counters: WindowCounters) -> float:
    """Stall cycles per misprediction; 0 for a window with no mispredictions."""
    if counters.mispredict_count == 0:
        return 0.0
    return counters.stall_cycles / counters.mispredict_count


_S = HysteresisState
_R = PriorityRecommendation

# (state, above) -> (next state, recommendation); total over all 8 inputs
_FSM: dict[tuple[HysteresisState, bool], tuple[HysteresisState, PriorityRecommendation]] = {
    (_S.STABLE_NORMAL, True): (_S.PENDING_DEMOTE, _R.NO_CHANGE),
    (_S.STABLE_NORMAL, False): (_S.STABLE_NORMAL, _R.NO_CHANGE),
    (_S.PENDING_DEMOTE, True): (_S.STABLE_DEMOTED, _R.DEMOTE),
    (_S.PENDING_DEMOTE, False): (_S.STABLE_NORMAL, _R.NO_CHANGE),
    (_S.STABLE_DEMOTED, True): (_S.STABLE_DEMOTED, _R.NO_CHANGE),
    (_S.STABLE_DEMOTED, False): (_S.PENDING_RESTORE, _R.NO_CHANGE),
    (_S.PENDING_RESTORE, True): (_S.STABLE_DEMOTED, _R.NO_CHANGE),
    (_S.PENDING_RESTORE, False): (_S.STABLE_NORMAL, _R.RESTORE),
}


def hysteresis_step(
    state: HysteresisState, above: bool
) -> tuple[HysteresisState, PriorityRecommendation]:
    return _FSM[(state, above)]


def end_of_window(
    thread: int,
    counters: WindowCounters,
    fsm: HysteresisState,
    threshold: float,
    hysteresis_enabled: bool,
    currently_demoted: bool,
    cycle: int,
) -> tuple[PriorityRecommendation, HysteresisState, MonitorEvent]:
    """Evaluate one thread at a window boundary.

    Computes the metric, decides the recommendation (immediate threshold
    test, or the hysteresis FSM when enabled), resets the counters for the
    next window, and emits the audit event.  Call exactly once per thread
    per boundary, after all resolutions at that cycle are processed.
    """
    metric = average_stall(counters)
    above = metric > threshold

    if hysteresis_enabled:
        demoted_per_fsm = fsm in (_S.STABLE_DEMOTED, _S.PENDING_RESTORE)
        if demoted_per_fsm != currently_demoted:
            raise ContractViolationError(
                f"thread {thread}: hysteresis state {fsm.value} disagrees with "
                f"priority (demoted={currently_demoted})"
            )
        new_fsm, rec = hysteresis_step(fsm, above)
        fsm_after: HysteresisState | None = new_fsm
    else:
        new_fsm = fsm
        fsm_after = None
        if above and not currently_demoted:
            rec = _R.DEMOTE
        elif not above and currently_demoted:
            rec = _R.RESTORE
        else:
            rec = _R.NO_CHANGE

    event = MonitorEvent(
        cycle=cycle,
        thread=thread,
        mispredicts=counters.mispredict_count,
        stall_cycles=counters.stall_cycles,
        metric=metric,
        above_threshold=above,
        recommendation=rec,
        fsm_state_after=fsm_after,
    )
    counters.mispredict_count = 0
    counters.stall_cycles = 0
    counters.window_start = cycle
    return rec, new_fsm, event
