"""Per-thread instruction streams: synthetic phase generators and trace files.

A workload is a set of per-thread ``InstrRecord`` streams.  Synthetic streams
are built from an ordered list of phases per thread, each phase fixing the
branch density, the mispredict probability, and the branch resolve-latency
distribution; a thread that alternates a cheap-latency phase with an
expensive one reproduces the "phase of consistently costly mispredictions"
situation the stall monitor is built to detect.

Determinism: each thread draws from its own PRNG substream derived as
``seed XOR hash64(thread)``, so adding a thread never perturbs the streams
of the others and equal (spec, seed) pairs yield element-wise identical
streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .model import InstrKind, InstrRecord, WorkloadError

_CHUNK = 1 << 16


@dataclass(frozen=True)
class Fixed:
    cycles: int

    def encode(self) -> str:
        return f"fixed:{self.cycles}"


@dataclass(frozen=True)
class Uniform:
    lo: int
    hi: int

    def encode(self) -> str:
        return f"uniform:{self.lo}:{self.hi}"


LatencyDist = Union[Fixed, Uniform]


@dataclass(frozen=True)
class PhaseSpec:
    """One synthetic phase of a thread's stream."""

    length: int
    branch_fraction: float
    mispredict_prob: float
    resolve_latency: LatencyDist


@dataclass(frozen=True)
class SyntheticSpec:
    """Ordered phases per thread; ``repeat`` loops the phase list forever."""

    threads: tuple[tuple[PhaseSpec, ...], ...]
    repeat: bool = False


def validate_spec(spec: SyntheticSpec) -> SyntheticSpec:
    if len(spec.threads) < 1:
        raise WorkloadError("synthetic spec needs at least one thread")
    for tid, phases in enumerate(spec.threads):
        if len(phases) < 1:
            raise WorkloadError(f"thread {tid} has no phases")
        for i, ph in enumerate(phases):
            where = f"thread {tid} phase {i}"
            if ph.length < 1:
                raise WorkloadError(f"{where}: length must be ≥ 1")
            if not 0.0 <= ph.branch_fraction <= 1.0:
                raise WorkloadError(f"{where}: branch_fraction outside [0, 1]")
            if not 0.0 <= ph.mispredict_prob <= 1.0:
                raise WorkloadError(f"{where}: mispredict_prob outside [0, 1]")
            dist = ph.resolve_latency
            if isinstance(dist, Fixed):
                if dist.cycles < 0:
                    raise WorkloadError(f"{where}: latency must be ≥ 0")
            elif isinstance(dist, Uniform):
                if dist.lo < 0 or dist.lo > dist.hi:
                    raise WorkloadError(f"{where}: need 0 ≤ lo ≤ hi")
            else:
                raise WorkloadError(f"{where}: unknown latency distribution")
    return spec


def _hash64(x: int) -> int:
    # splitmix64 finalizer; stable thread-id hashing for substream seeds
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def thread_substream_seed(seed: int, thread: int) -> int:
    return seed ^ _hash64(thread)


def _phase_records(
    thread: int, phase: PhaseSpec, rng: np.random.Generator, seq_start: int
) -> Iterator[InstrRecord]:
    """Yield one phase worth of records, drawing randomness in chunks."""
    seq = seq_start
    remaining = phase.length
    while remaining > 0:
        n = min(remaining, _CHUNK)
        is_branch = rng.random(n) < phase.branch_fraction
        taken = rng.random(n) < (1.0 - phase.mispredict_prob)
        flagged = rng.random(n) < phase.mispredict_prob
        dist = phase.resolve_latency
        if isinstance(dist, Fixed):
            latency = np.full(n, dist.cycles, dtype=np.int64)
        else:
            latency = rng.integers(dist.lo, dist.hi + 1, size=n, dtype=np.int64)
        for i in range(n):
            if is_branch[i]:
                yield InstrRecord(
                    thread,
                    seq,
                    InstrKind.BRANCH,
                    taken=bool(taken[i]),
                    resolve_latency=int(latency[i]),
                    oracle_mispredict=bool(flagged[i]),
                )
            else:
                yield InstrRecord(thread, seq, InstrKind.NONBRANCH)
            seq += 1
        remaining -= n


def _thread_stream(
    thread: int, phases: Sequence[PhaseSpec], seed: int, repeat: bool
) -> Iterator[InstrRecord]:
    rng = np.random.Generator(np.random.PCG64(thread_substream_seed(seed, thread)))
    seq = 0
    while True:
        for phase in phases:
            yield from _phase_records(thread, phase, rng, seq)
            seq += phase.length
        if not repeat:
            return


class WorkloadSource:
    """Single-consumer per-thread record streams with one-record lookahead.

    Records arrive with strictly increasing ``seq`` per thread; a stream is
    exhausted once its iterator ends (synthetic repeat streams never do).
    """

    def __init__(self, streams: Sequence[Iterator[InstrRecord]]):
        self._iters = list(streams)
        self._peeked: list[InstrRecord | None] = [None] * len(self._iters)
        self._done = [False] * len(self._iters)
        for t in range(len(self._iters)):
            self._fill(t)

    @property
    def num_threads(self) -> int:
        return len(self._iters)

    def _fill(self, thread: int) -> None:
        if self._peeked[thread] is None and not self._done[thread]:
            try:
                self._peeked[thread] = next(self._iters[thread])
            except StopIteration:
                self._done[thread] = True

    def exhausted(self, thread: int) -> bool:
        return self._peeked[thread] is None and self._done[thread]

    def peek(self, thread: int) -> InstrRecord | None:
        return self._peeked[thread]

    def take(self, thread: int) -> InstrRecord | None:
        rec = self._peeked[thread]
        if rec is not None:
            self._peeked[thread] = None
            self._fill(thread)
        return rec

    def take_all(self, thread: int, limit: int | None = None) -> list[InstrRecord]:
        """Drain up to ``limit`` records of one thread (for trace export)."""
        out: list[InstrRecord] = []
        while limit is None or len(out) < limit:
            rec = self.take(thread)
            if rec is None:
                break
            out.append(rec)
        return out


def generate_synthetic(spec: SyntheticSpec, seed: int) -> WorkloadSource:
    """Deterministic synthetic workload: same (spec, seed), same records."""
    validate_spec(spec)
    return WorkloadSource(
        [
            _thread_stream(t, phases, seed, spec.repeat)
            for t, phases in enumerate(spec.threads)
        ]
    )


# --------------------------------------------------------------------------
# Trace file format
# --------------------------------------------------------------------------
#
#   <thread> N                         non-branch
#   <thread> B <T|N> <latency> [M|C]   branch: taken flag, resolve latency,
#                                      optional oracle mispredict/correct flag
#
# '#' starts a comment; blank lines are skipped; any whitespace separates
# fields.  Line order within a thread defines seq.


def parse_trace_line(line: str, lineno: int) -> InstrRecord | None:
    """Parse one line into a (thread, kind, ...) record skeleton.

    Returns None for blank/comment lines.  ``seq`` is filled by the caller
    from per-thread arrival order, so the returned record carries seq = -1.
    """
    body = line.split("#", 1)[0]
    fields = body.split()
    if not fields:
        return None

    def fail(reason: str):
        raise WorkloadError(f"trace line {lineno}: {reason}")

    try:
        thread = int(fields[0])
    except ValueError:
        fail(f"bad thread id {fields[0]!r}")
    if thread < 0:
        fail("thread id must be non-negative")
    if len(fields) < 2:
        fail("missing record kind")
    kind = fields[1]
    if kind == "N":
        if len(fields) != 2:
            fail("trailing fields after non-branch")
        return InstrRecord(thread, -1, InstrKind.NONBRANCH)
    if kind != "B":
        fail(f"bad record kind {kind!r}")
    if len(fields) < 4:
        fail("branch needs taken flag and resolve latency")
    if fields[2] not in ("T", "N"):
        fail(f"bad taken flag {fields[2]!r}")
    taken = fields[2] == "T"
    try:
        latency = int(fields[3])
    except ValueError:
        fail(f"bad resolve latency {fields[3]!r}")
    if latency < 0:
        fail("resolve latency must be ≥ 0")
    oracle: bool | None = None
    if len(fields) == 5:
        if fields[4] not in ("M", "C"):
            fail(f"bad oracle flag {fields[4]!r}")
        oracle = fields[4] == "M"
    elif len(fields) > 5:
        fail("trailing fields after branch")
    return InstrRecord(thread, -1, InstrKind.BRANCH, taken, latency, oracle)


def load_trace(path: str) -> WorkloadSource:
    """Stream records exactly as listed in the file, per thread, in order.

    Thread ids above the configured thread count are rejected later, at
    simulation start, where the config is known.
    """
    per_thread: dict[int, list[InstrRecord]] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise WorkloadError(f"cannot open trace {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            rec = parse_trace_line(line, lineno)
            if rec is None:
                continue
            bucket = per_thread.setdefault(rec.thread, [])
            bucket.append(rec._replace(seq=len(bucket)))
    if not per_thread:
        raise WorkloadError(f"trace {path} contains no records")
    num_threads = max(per_thread) + 1
    return WorkloadSource(
        [iter(per_thread.get(t, [])) for t in range(num_threads)]
    )


def format_record(rec: InstrRecord) -> str:
    if rec.kind is InstrKind.NONBRANCH:
        return f"{rec.thread} N"
    taken = "T" if rec.taken else "N"
    line = f"{rec.thread} B {taken} {rec.resolve_latency}"
    if rec.oracle_mispredict is not None:
        line += " M" if rec.oracle_mispredict else " C"
    return line


def write_trace(
    source: WorkloadSource, path: str, max_per_thread: int | None = None
) -> int:
    """Materialize a workload to a trace file, grouped by thread.

    Drains the source.  ``max_per_thread`` bounds unbounded (repeat) streams;
    returns the number of records written.
    """
    written = 0
    with open(path, "w", encoding="utf-8") as fh:
        for t in range(source.num_threads):
            for rec in source.take_all(t, max_per_thread):
                fh.write(format_record(rec) + "\n")
                written += 1
    return written


# --------------------------------------------------------------------------
# Synthetic spec files (JSON)
# --------------------------------------------------------------------------


def _decode_latency(text: str, where: str) -> LatencyDist:
    parts = text.split(":")
    try:
        if parts[0] == "fixed" and len(parts) == 2:
            return Fixed(int(parts[1]))
        if parts[0] == "uniform" and len(parts) == 3:
            return Uniform(int(parts[1]), int(parts[2]))
    except ValueError:
        pass
    raise WorkloadError(
        f"{where}: latency must be 'fixed:C' or 'uniform:LO:HI', got {text!r}"
    )


def spec_from_json(text: str) -> SyntheticSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkloadError(f"synthetic spec is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "threads" not in doc:
        raise WorkloadError("synthetic spec must be an object with a 'threads' list")
    threads = []
    for tid, phases in enumerate(doc["threads"]):
        decoded = []
        for i, ph in enumerate(phases):
            where = f"thread {tid} phase {i}"
            try:
                decoded.append(
                    PhaseSpec(
                        length=int(ph["length"]),
                        branch_fraction=float(ph["branch_fraction"]),
                        mispredict_prob=float(ph["mispredict_prob"]),
                        resolve_latency=_decode_latency(str(ph["latency"]), where),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise WorkloadError(f"{where}: {exc}") from exc
        threads.append(tuple(decoded))
    spec = SyntheticSpec(threads=tuple(threads), repeat=bool(doc.get("repeat", False)))
    return validate_spec(spec)


def spec_to_json(spec: SyntheticSpec) -> str:
    doc = {
        "repeat": spec.repeat,
        "threads": [
            [
                {
                    "length": ph.length,
                    "branch_fraction": ph.branch_fraction,
                    "mispredict_prob": ph.mispredict_prob,
                    "latency": ph.resolve_latency.encode(),
                }
                for ph in phases
            ]
            for phases in spec.threads
        ],
    }
    return json.dumps(doc, indent=2)


def load_spec(path: str) -> SyntheticSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return spec_from_json(fh.read())
    except OSError as exc:
        raise WorkloadError(
            f"cannot open synthetic spec {path}: {exc.strerror}"
        ) from exc
