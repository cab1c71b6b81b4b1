"""Arrival model, trial executor, and trace machinery."""

import gzip
import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest

from msplab.engine import (
    ONE_OVER_E_U64,
    TIME_DEN,
    ArrivalSchedule,
    Decision,
    RunTrace,
    SecretaryAlgorithm,
    draw_schedule,
    parse_threshold,
    run_trial,
    threshold_from_fraction,
    trace_metrics,
)
from msplab.errors import AlgorithmFaultError, ParameterError
from msplab.framework import DynkinPolicy, GreedyFramework, SupergreedyPolicy
from msplab.matroids import GraphicMatroid, UniformMatroid, as_weights, max_weight_basis
from msplab.rng import TrialSeed, mix64, stream_value


class AcceptEverything(SecretaryAlgorithm):
    name = "accept-all"

    def start(self, matroid, weights, t_threshold, seed=None):
        pass

    def on_arrival(self, elem, weight, time_u64):
        return Decision.ACCEPT, (elem,), ()


class RejectEverything(SecretaryAlgorithm):
    name = "reject-all"

    def start(self, matroid, weights, t_threshold, seed=None):
        self.t = t_threshold

    def on_arrival(self, elem, weight, time_u64):
        if time_u64 <= self.t:
            return Decision.SAMPLE, (), ()
        return Decision.REJECT, (), ()


def test_threshold_constants():
    assert abs(ONE_OVER_E_U64 / TIME_DEN - math.exp(-1)) < 1e-18
    assert parse_threshold("1/e") == ONE_OVER_E_U64
    assert parse_threshold("1/2") == TIME_DEN // 2
    assert parse_threshold("0.25") == TIME_DEN // 4
    with pytest.raises(ParameterError):
        parse_threshold("nope")
    with pytest.raises(ParameterError):
        threshold_from_fraction(Fraction(3, 2))


def test_splitmix64_reference():
    # independent transcription of the splitmix64 finalizer
    def ref(x):
        x = (x + 0x9E3779B97F4A7C15) & (2 ** 64 - 1)
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & (2 ** 64 - 1)
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & (2 ** 64 - 1)
        return x ^ (x >> 31)

    for seed in (0, 1, 0xDEADBEEF, 2 ** 63 + 17):
        assert stream_value(seed, 0) == ref(seed)
        assert stream_value(seed, 5) == ref((seed + 5 * 0x9E3779B97F4A7C15) & (2 ** 64 - 1))


def test_schedule_determinism_and_distinct_streams():
    s1 = draw_schedule(100, TrialSeed(42, 7))
    s2 = draw_schedule(100, TrialSeed(42, 7))
    s3 = draw_schedule(100, TrialSeed(42, 8))
    assert np.array_equal(s1.times, s2.times)
    assert not np.array_equal(s1.times, s3.times)


def test_schedule_uniformity():
    sched = draw_schedule(100000, TrialSeed(123, 0))
    floats = sched.as_floats()
    assert 0.497 <= floats.mean() <= 0.503
    frac = np.mean(sched.times <= ONE_OVER_E_U64)
    assert abs(frac - math.exp(-1)) <= 0.005


def test_run_trial_dynkin_hand_trace():
    # single-choice: sample at 0.1, accept 9 at 0.5, reject 1 at 0.9
    m = UniformMatroid(3, 1)
    sched = ArrivalSchedule.from_floats([0.1, 0.5, 0.9])
    trace = run_trial(m, as_weights([5, 9, 1]), sched, GreedyFramework(DynkinPolicy))
    assert [ev.decision for ev in trace.events] == [Decision.SAMPLE, Decision.ACCEPT, Decision.REJECT]
    assert trace.accepted == {1}


def test_run_trial_enforces_feasibility(k3):
    sched = ArrivalSchedule.from_floats([0.5, 0.6, 0.7])
    with pytest.raises(AlgorithmFaultError) as exc:
        run_trial(k3, as_weights([1, 2, 3]), sched, AcceptEverything())
    prefix = exc.value.trace_prefix
    assert len(prefix.events) == 3  # fault on the cycle-closing third edge
    assert prefix.events[-1].decision is Decision.ACCEPT


def test_run_trial_reject_everything(k3):
    sched = ArrivalSchedule.from_floats([0.5, 0.6, 0.7])
    trace = run_trial(k3, as_weights([1, 2, 3]), sched, RejectEverything())
    assert trace.accepted == frozenset()


def test_trace_metrics_extremes(k3):
    w = as_weights([3, 2, 1])
    opt = max_weight_basis(k3, w)
    sched = ArrivalSchedule.from_floats([0.5, 0.6, 0.7])
    full = run_trial(k3, w, sched, GreedyFramework(SupergreedyPolicy))
    rec = trace_metrics(full, w, opt)
    assert rec.ratio == 1 and all(v == 1 for v in rec.indicators.values())
    empty = run_trial(k3, w, sched, RejectEverything())
    rec0 = trace_metrics(empty, w, opt)
    assert rec0.ratio == 0 and all(v == 0 for v in rec0.indicators.values())


def test_replay_determinism(k4):
    w = as_weights([5, 4, 3, 2, 1, 6])
    seed = TrialSeed(9, 3)
    sched = draw_schedule(6, seed)
    t1 = run_trial(k4, w, sched, GreedyFramework(SupergreedyPolicy), seed=seed)
    t2 = run_trial(k4, w, sched, GreedyFramework(SupergreedyPolicy), seed=seed)
    assert t1.events == t2.events


def test_prefix_feasibility(k4):
    w = as_weights([5, 4, 3, 2, 1, 6])
    for idx in range(20):
        seed = TrialSeed(77, idx)
        trace = run_trial(k4, w, draw_schedule(6, seed), GreedyFramework(SupergreedyPolicy), seed=seed)
        for _, acc, mem in trace.snapshots():
            assert k4.is_independent(acc)
            assert acc <= mem


def test_online_causality(k4):
    """Permuting weights of not-yet-arrived elements leaves earlier
    decisions unchanged."""
    rng = random.Random(15)
    base = as_weights([7, 6, 5, 4, 3, 2])
    for idx in range(10):
        seed = TrialSeed(31, idx)
        sched = draw_schedule(6, seed)
        trace = run_trial(k4, base, sched, GreedyFramework(SupergreedyPolicy), seed=seed)
        cut = rng.randint(1, 5)
        later = [ev.elem for ev in trace.events[cut:]]
        permuted = list(base)
        shuffled = later[:]
        rng.shuffle(shuffled)
        for a, b in zip(later, shuffled):
            permuted[a] = base[b]
        trace2 = run_trial(k4, as_weights(permuted), sched, GreedyFramework(SupergreedyPolicy), seed=seed)
        head1 = [(ev.elem, ev.decision) for ev in trace.events[:cut]]
        head2 = [(ev.elem, ev.decision) for ev in trace2.events[:cut]]
        assert head1 == head2


def test_trace_dump_jsonl(tmp_path, k3):
    w = as_weights([3, 2, 1])
    sched = ArrivalSchedule.from_floats([0.1, 0.5, 0.9])
    trace = run_trial(k3, w, sched, GreedyFramework(SupergreedyPolicy))
    plain = tmp_path / "trace.jsonl"
    zipped = tmp_path / "trace.jsonl.gz"
    trace.dump_jsonl(str(plain))
    trace.dump_jsonl(str(zipped))
    lines = plain.read_text().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert set(first) == {"t", "elem", "w", "decision", "A", "I"}
    with gzip.open(zipped, "rt") as fh:
        assert fh.read().splitlines() == lines


def test_schedule_length_mismatch(k3):
    with pytest.raises(ParameterError):
        run_trial(k3, as_weights([1, 2, 3]), ArrivalSchedule.from_floats([0.5]), RejectEverything())
