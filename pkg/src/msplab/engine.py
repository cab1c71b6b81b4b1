"""Random-order arrival model and the trial executor.

Arrival times are 64-bit fixed-point rationals: an element's time is
``t_u64 / 2**64``. All comparisons (including the sampling threshold) happen
in the integer domain, ties broken by element id, so replays are bit-exact
across the compiled and pure simulation paths.

The executor runs any ``SecretaryAlgorithm`` against a matroid and weight
assignment and produces a ``RunTrace``: the time-ordered decision log plus
memory-set deltas, from which the A_t / I_t snapshots after every event can
be replayed.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from enum import Enum
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import AlgorithmFaultError, ParameterError
from .matroids import MatroidOracle, total_weight
from .rng import SCHEDULE_TAG, TrialSeed, stream_array

TIME_DEN = 1 << 64

getcontext().prec = 60
_E = Decimal("2.71828182845904523536028747135266249775724709369995957496697")
ONE_OVER_E_U64 = int(Decimal(TIME_DEN) / _E)  # floor(2^64 / e)


def threshold_from_fraction(t: Fraction) -> int:
    """Fixed-point sampling threshold: arrivals with t_u64 <= this are samples."""
    if not 0 <= t <= 1:
        raise ParameterError("sampling horizon must lie in [0, 1]")
    return (t.numerator * TIME_DEN) // t.denominator


def parse_threshold(text: str) -> int:
    """Parse a sampling horizon: '1/e' (default), a fraction, or a decimal."""
    s = text.strip().lower()
    if s in ("1/e", "e"):
        return ONE_OVER_E_U64
    try:
        return threshold_from_fraction(Fraction(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError(f"cannot parse sampling horizon {text!r}") from exc


@dataclass(frozen=True)
class ArrivalSchedule:
    """Arrival times of elements 0..n-1 as u64 numerators over 2**64."""

    times: np.ndarray

    @property
    def n(self) -> int:
        return len(self.times)

    def order(self) -> np.ndarray:
        """Element ids in arrival order (time ascending, id breaks ties)."""
        return np.argsort(self.times, kind="stable")

    def as_floats(self) -> np.ndarray:
        return self.times.astype(np.float64) / float(TIME_DEN)

    def time_fraction(self, elem: int) -> Fraction:
        return Fraction(int(self.times[elem]), TIME_DEN)

    @staticmethod
    def from_floats(values: Sequence[float]) -> "ArrivalSchedule":
        arr = np.array([min(max(v, 0.0), 1.0) for v in values], dtype=np.float64)
        return ArrivalSchedule(np.floor(arr * float(TIME_DEN)).astype(np.uint64))


def draw_schedule(n: int, seed: TrialSeed) -> ArrivalSchedule:
    """n i.i.d. uniform fixed-point times, deterministic per seed."""
    if n < 1:
        raise ParameterError("schedule needs at least one element")
    return ArrivalSchedule(stream_array(seed.substream(SCHEDULE_TAG), n))


class Decision(Enum):
    SAMPLE = "sample-reject"
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class TraceEvent:
    time_u64: int
    elem: int
    weight: Fraction
    decision: Decision
    mem_added: tuple[int, ...] = ()
    mem_removed: tuple[int, ...] = ()


@dataclass
class RunTrace:
    """Time-ordered log of one trial, sufficient to replay every snapshot.

    Memory snapshots are stored as per-event deltas; ``snapshots()`` replays
    them into the (A_t, I_t) sets after each event.
    """

    n: int
    t_threshold: int
    events: list[TraceEvent] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def accepted(self) -> frozenset:
        return frozenset(e.elem for e in self.events if e.decision is Decision.ACCEPT)

    def samples(self) -> frozenset:
        return frozenset(e.elem for e in self.events if e.decision is Decision.SAMPLE)

    def snapshots(self) -> Iterator[tuple[TraceEvent, frozenset, frozenset]]:
        """Yield (event, A_after, I_after) for every event in time order."""
        acc: set[int] = set()
        mem: set[int] = set()
        for ev in self.events:
            if ev.decision is Decision.ACCEPT:
                acc.add(ev.elem)
            mem.difference_update(ev.mem_removed)
            mem.update(ev.mem_added)
            yield ev, frozenset(acc), frozenset(mem)

    def final_memory(self) -> frozenset:
        mem: set[int] = set()
        for ev in self.events:
            mem.difference_update(ev.mem_removed)
            mem.update(ev.mem_added)
        return frozenset(mem)

    def dump_jsonl(self, path: str) -> None:
        """One JSON object per event: {t, elem, w, decision, A, I}.

        Times are floats, weights exact strings; gzip if path ends in .gz.
        """
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wt", encoding="utf-8") as fh:
            for ev, acc, mem in self.snapshots():
                fh.write(
                    json.dumps(
                        {
                            "t": ev.time_u64 / TIME_DEN,
                            "elem": ev.elem,
                            "w": str(ev.weight),
                            "decision": ev.decision.value,
                            "A": sorted(acc),
                            "I": sorted(mem),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


class SecretaryAlgorithm:
    """Contract for online algorithms run by the executor.

    ``start`` binds the trial context; ``on_arrival`` returns a decision and
    the memory-set delta (elements added to / removed from I_t). Decisions
    may only depend on elements that have already arrived; the executor
    enforces feasibility of the accepted set.
    """

    name = "abstract"
    framework = False

    def start(self, matroid: MatroidOracle, weights: Sequence[Fraction], t_threshold: int, seed: TrialSeed | None = None) -> None:
        raise NotImplementedError

    def on_arrival(self, elem: int, weight: Fraction, time_u64: int) -> tuple[Decision, tuple[int, ...], tuple[int, ...]]:
        raise NotImplementedError


def run_trial(
    matroid: MatroidOracle,
    weights: Sequence[Fraction],
    schedule: ArrivalSchedule,
    alg: SecretaryAlgorithm,
    seed: TrialSeed | None = None,
    t_threshold: int = ONE_OVER_E_U64,
    meta: dict | None = None,
) -> RunTrace:
    """Run one trial and return the full trace.

    The executor enforces feasibility: if the algorithm accepts an element
    that would make the accepted set dependent, the trial crashes with
    ``AlgorithmFaultError`` carrying the trace prefix. It never silently
    corrects the decision.
    """
    if schedule.n != matroid.ground_size:
        raise ParameterError("schedule length does not match ground size")
    alg.start(matroid, weights, t_threshold, seed)
    trace = RunTrace(n=schedule.n, t_threshold=t_threshold, meta=dict(meta or {}))
    accepted: list[int] = []
    for elem in schedule.order():
        elem = int(elem)
        t = int(schedule.times[elem])
        decision, added, removed = alg.on_arrival(elem, weights[elem], t)
        trace.events.append(TraceEvent(t, elem, weights[elem], decision, tuple(added), tuple(removed)))
        if decision is Decision.SAMPLE and t > t_threshold:
            raise AlgorithmFaultError(
                f"algorithm sampled element {elem} after the sampling stage", trace_prefix=trace
            )
        if decision is Decision.ACCEPT:
            accepted.append(elem)
            if not matroid.is_independent(accepted):
                raise AlgorithmFaultError(
                    f"infeasible accept of element {elem}", trace_prefix=trace
                )
    return trace


@dataclass(frozen=True)
class TrialRecord:
    utility: Fraction
    opt_utility: Fraction
    ratio: Fraction
    indicators: dict[int, int]

    def to_row(self, trial_seed: int) -> dict:
        row = {
            "trial_seed": trial_seed,
            "utility": float(self.utility),
            "opt_utility": float(self.opt_utility),
            "ratio": float(self.ratio),
        }
        for elem in sorted(self.indicators):
            row[f"elem_{elem}"] = self.indicators[elem]
        return row


def trace_metrics(trace: RunTrace, weights: Sequence[Fraction], opt: frozenset) -> TrialRecord:
    """Utility, optimum utility, their ratio, and per-optimum-element hits."""
    acc = trace.accepted
    utility = total_weight(weights, acc)
    opt_utility = total_weight(weights, opt)
    ratio = utility / opt_utility if opt_utility > 0 else Fraction(0)
    indicators = {e: (1 if e in acc else 0) for e in sorted(opt)}
    return TrialRecord(utility, opt_utility, ratio, indicators)
