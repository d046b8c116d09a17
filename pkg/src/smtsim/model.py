"""Configuration and shared domain vocabulary for the simulator.

Everything here is an immutable value type: a validated ``SimConfig`` plus
the policy/predictor selectors it carries, and the ``InstrRecord`` unit that
workload sources stream into the engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Union


class ConfigError(ValueError):
    """A configuration value violates an invariant. CLI exit code 2."""


class WorkloadError(ValueError):
    """A trace or synthetic workload is malformed or inconsistent. Exit code 3."""


class ContractViolationError(RuntimeError):
    """Internal bookkeeping broke an engine contract (a bug). Exit code 4."""


# --------------------------------------------------------------------------
# Fetch policies
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundRobin:
    name = "round_robin"


@dataclass(frozen=True)
class ICount:
    name = "icount"


@dataclass(frozen=True)
class BrCount:
    name = "brcount"


@dataclass(frozen=True)
class StallFeedback:
    """Wraps a base policy; demoted threads are only picked when no
    normal-priority thread is eligible."""

    base: Union[RoundRobin, ICount, BrCount]

    @property
    def name(self) -> str:
        return f"stall_feedback:{self.base.name}"


PolicySpec = Union[RoundRobin, ICount, BrCount, StallFeedback]


# --------------------------------------------------------------------------
# Branch direction predictors (selectors; implementations in predictors.py)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AlwaysTaken:
    name = "always_taken"


@dataclass(frozen=True)
class Bimodal:
    table_bits: int

    @property
    def name(self) -> str:
        return f"bimodal:{self.table_bits}"


@dataclass(frozen=True)
class Gshare:
    history_bits: int
    table_bits: int

    @property
    def name(self) -> str:
        return f"gshare:{self.history_bits}:{self.table_bits}"


@dataclass(frozen=True)
class Perceptron:
    history_len: int
    table_entries: int

    @property
    def name(self) -> str:
        return f"perceptron:{self.history_len}:{self.table_entries}"


@dataclass(frozen=True)
class OracleFlag:
    """No predictor runs; each branch record carries a pre-drawn
    mispredict/correct flag."""

    name = "oracle_flag"


PredictorSpec = Union[AlwaysTaken, Bimodal, Gshare, Perceptron, OracleFlag]


# --------------------------------------------------------------------------
# Simulation configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """All simulation knobs. Immutable once validated; safe to share.

    ``pipeline_depth`` is the fixed front-end component of the misprediction
    penalty; a branch fetched at cycle c resolves at
    c + pipeline_depth + resolve_latency.  ``window_T`` and ``threshold_H``
    drive the per-thread stall monitor; ``threshold_H`` may be +infinity,
    which makes the feedback wrapper a provable no-op.
    """

    num_threads: int
    pipeline_depth: int
    fetch_width: int
    window_capacity: int
    window_T: int
    threshold_H: float
    hysteresis_enabled: bool
    policy: PolicySpec
    predictor: PredictorSpec
    max_cycles: int
    seed: int


_COUNT_FIELDS = (
    "num_threads",
    "pipeline_depth",
    "fetch_width",
    "window_capacity",
    "window_T",
    "max_cycles",
)


def validate_config(cfg: SimConfig) -> SimConfig:
    """Return ``cfg`` unchanged if every invariant holds.

    Raises ``ConfigError`` naming the first violated invariant.  Idempotent:
    validating a validated config yields the identical value.
    """
    for field in _COUNT_FIELDS:
        value = getattr(cfg, field)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ConfigError(f"{field} must be ≥ 1")
    if cfg.window_capacity < cfg.fetch_width:
        raise ConfigError("window_capacity < fetch_width")
    if math.isnan(cfg.threshold_H) or cfg.threshold_H < 0:
        raise ConfigError("threshold_H must be ≥ 0")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not (
        0 <= cfg.seed < 2**64
    ):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    _validate_policy(cfg.policy)
    _validate_predictor(cfg.predictor)
    return cfg


def _validate_policy(policy: PolicySpec) -> None:
    if isinstance(policy, StallFeedback):
        if isinstance(policy.base, StallFeedback):
            raise ConfigError("stall_feedback must wrap a non-feedback base policy")
        if not isinstance(policy.base, (RoundRobin, ICount, BrCount)):
            raise ConfigError("stall_feedback base must be a fetch policy")
    elif not isinstance(policy, (RoundRobin, ICount, BrCount)):
        raise ConfigError("unknown policy")


def _validate_predictor(pred: PredictorSpec) -> None:
    if isinstance(pred, Bimodal):
        if pred.table_bits < 1:
            raise ConfigError("bimodal table_bits must be ≥ 1")
    elif isinstance(pred, Gshare):
        if pred.history_bits < 1:
            raise ConfigError("gshare history_bits must be ≥ 1")
        if pred.table_bits < 1:
            raise ConfigError("gshare table_bits must be ≥ 1")
    elif isinstance(pred, Perceptron):
        if pred.history_len < 1:
            raise ConfigError("perceptron history_len must be ≥ 1")
        if pred.table_entries < 1:
            raise ConfigError("perceptron table_entries must be ≥ 1")
    elif not isinstance(pred, (AlwaysTaken, OracleFlag)):
        raise ConfigError("unknown predictor")


def default_config(**overrides) -> SimConfig:
    """Documentation convenience: a small sane config for demos and tests.

    Never applied implicitly; config files must spell out every key.
    """
    base = dict(
        num_threads=4,
        pipeline_depth=10,
        fetch_width=4,
        window_capacity=128,
        window_T=1024,
        threshold_H=20.0,
        hysteresis_enabled=True,
        policy=RoundRobin(),
        predictor=Gshare(history_bits=8, table_bits=12),
        max_cycles=100_000,
        seed=1,
    )
    base.update(overrides)
    return validate_config(SimConfig(**base))


# --------------------------------------------------------------------------
# Instruction records
# --------------------------------------------------------------------------

class InstrKind(Enum):
    NONBRANCH = "N"
    BRANCH = "B"


class InstrRecord(NamedTuple):
    """One trace instruction.

    ``resolve_latency`` is the extra delay past ``pipeline_depth`` before a
    branch resolves; it is 0 and ``taken`` is None for non-branches.
    ``oracle_mispredict`` is consumed only when the predictor is OracleFlag.
    """

    thread: int
    seq: int
    kind: InstrKind
    taken: bool | None = None
    resolve_latency: int = 0
    oracle_mispredict: bool | None = None
