"""Branch direction predictors.

Counter and weight tables are shared across hardware threads (capacity is a
shared resource, so cross-thread interference is observable); history
registers are per thread.  Predictors update at branch resolution, in
per-thread program order, and history is never speculatively updated at
fetch, so ``update`` recomputes its table index from the current history.

Branches carry no real addresses in this trace model; each thread cycles
through a small rotating set of synthetic branch-site ids that serve as the
program counter for table indexing.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

from .model import (
    AlwaysTaken,
    Bimodal,
    Gshare,
    OracleFlag,
    Perceptron,
    PredictorSpec,
)

SITES_PER_THREAD = 64

WEIGHT_MIN = -128
WEIGHT_MAX = 127


def branch_site_pc(thread: int, branch_ordinal: int) -> int:
    """Synthetic pc for a thread's n-th fetched branch; stable per site."""
    return (thread << 6) | (branch_ordinal % SITES_PER_THREAD)


class Prediction(NamedTuple):
    taken: bool
    confidence: int | None = None  # perceptron output magnitude


class AlwaysTakenPredictor:
    def __init__(self, num_threads: int):
        pass

    def predict(self, thread: int, pc: int) -> Prediction:
        return Prediction(True)

    def update(self, thread: int, pc: int, taken: bool, predicted: Prediction) -> None:
        pass


class BimodalPredictor:
    """One shared table of 2-bit saturating counters, initialized weakly taken."""

    def __init__(self, spec: Bimodal, num_threads: int):
        self.size = 1 << spec.table_bits
        self.counters = [2] * self.size

    def predict(self, thread: int, pc: int) -> Prediction:
        return Prediction(self.counters[pc % self.size] >= 2)

    def update(self, thread: int, pc: int, taken: bool, predicted: Prediction) -> None:
        idx = pc % self.size
        c = self.counters[idx]
        if taken:
            if c < 3:
                self.counters[idx] = c + 1
        elif c > 0:
            self.counters[idx] = c - 1


class GsharePredictor:
    """Shared 2-bit counter table indexed by pc XOR per-thread history.

    History keeps the newest outcome in bit 0.
    """

    def __init__(self, spec: Gshare, num_threads: int):
        self.size = 1 << spec.table_bits
        self.counters = [2] * self.size
        self.history_mask = (1 << spec.history_bits) - 1
        self.history = [0] * num_threads

    def _index(self, thread: int, pc: int) -> int:
        return (pc ^ self.history[thread]) % self.size

    def predict(self, thread: int, pc: int) -> Prediction:
        return Prediction(self.counters[self._index(thread, pc)] >= 2)

    def update(self, thread: int, pc: int, taken: bool, predicted: Prediction) -> None:
        idx = self._index(thread, pc)
        c = self.counters[idx]
        if taken:
            if c < 3:
                self.counters[idx] = c + 1
        elif c > 0:
            self.counters[idx] = c - 1
        self.history[thread] = ((self.history[thread] << 1) | taken) & self.history_mask


class PerceptronPredictor:
    """Per-site weight vectors over a per-thread +-1 global history.

    Predicts taken when the dot product (bias included) is >= 0 -- an exact
    zero ties toward taken.  Trains by +-1 steps, saturating in
    [WEIGHT_MIN, WEIGHT_MAX], whenever the prediction was wrong or its
    magnitude did not exceed theta.
    """

    def __init__(self, spec: Perceptron, num_threads: int, theta: int | None = None):
        self.entries = spec.table_entries
        self.hlen = spec.history_len
        # weights[row] = [bias, w_1 .. w_hlen]
        self.weights = [[0] * (self.hlen + 1) for _ in range(self.entries)]
        # history[thread][i] in {+1, -1}, newest at index 0
        self.history = [[-1] * self.hlen for _ in range(num_threads)]
        self.theta = theta if theta is not None else int(1.93 * self.hlen + 14)

    def _output(self, thread: int, pc: int) -> int:
        w = self.weights[pc % self.entries]
        h = self.history[thread]
        y = w[0]
        for i in range(self.hlen):
            y += w[i + 1] * h[i]
        return y

    def predict(self, thread: int, pc: int) -> Prediction:
        y = self._output(thread, pc)
        return Prediction(y >= 0, abs(y))

    def update(self, thread: int, pc: int, taken: bool, predicted: Prediction) -> None:
        # train on misprediction or weak output, per the carried prediction
        magnitude = predicted.confidence if predicted.confidence is not None else 0
        if predicted.taken != taken or magnitude <= self.theta:
            w = self.weights[pc % self.entries]
            h = self.history[thread]
            t = 1 if taken else -1
            w[0] = min(WEIGHT_MAX, max(WEIGHT_MIN, w[0] + t))
            for i in range(self.hlen):
                w[i + 1] = min(WEIGHT_MAX, max(WEIGHT_MIN, w[i + 1] + t * h[i]))
        h = self.history[thread]
        h.insert(0, 1 if taken else -1)
        h.pop()


DirectionPredictor = (
    AlwaysTakenPredictor | BimodalPredictor | GsharePredictor | PerceptronPredictor
)


def create_predictor(spec: PredictorSpec, num_threads: int) -> DirectionPredictor | None:
    """Instantiate predictor state; None for OracleFlag (prediction bypassed)."""
    if isinstance(spec, AlwaysTaken):
        return AlwaysTakenPredictor(num_threads)
    if isinstance(spec, Bimodal):
        return BimodalPredictor(spec, num_threads)
    if isinstance(spec, Gshare):
        return GsharePredictor(spec, num_threads)
    if isinstance(spec, Perceptron):
        return PerceptronPredictor(spec, num_threads)
    if isinstance(spec, OracleFlag):
        return None
    raise TypeError(f"unknown predictor spec {spec!r}")


class ProbeResult(NamedTuple):
    hit_rate: float
    count: int


def accuracy_probe(
    predictor: DirectionPredictor,
    stream: Iterable[tuple[int, bool]],
    thread: int = 0,
) -> ProbeResult:
    """Hit rate over a (pc, outcome) stream, updating after each prediction.

    An empty stream probes nothing: hit rate 1.0 with count 0.
    """
    hits = 0
    total = 0
    for pc, outcome in stream:
        pred = predictor.predict(thread, pc)
        if pred.taken == outcome:
            hits += 1
        predictor.update(thread, pc, outcome, pred)
        total += 1
    if total == 0:
        return ProbeResult(1.0, 0)
    return ProbeResult(hits / total, total)
