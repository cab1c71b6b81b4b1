"""Greedy framework, memory policies, and the virtual algorithm."""

import math
import random
from fractions import Fraction
from itertools import permutations

import pytest

from msplab.engine import (
    ONE_OVER_E_U64,
    TIME_DEN,
    ArrivalSchedule,
    Decision,
    draw_schedule,
    run_trial,
)
from msplab.errors import ConfigurationError, FrameworkFaultError
from msplab.framework import (
    DynkinPolicy,
    FrameworkState,
    GreedyFramework,
    OptimisticPolicy,
    PessimisticPolicy,
    SupergreedyDirect,
    SupergreedyPolicy,
    VirtualAlgorithm,
    enumerate_decision_sequences,
    framework_accept_rule,
    validate_memory,
)
from msplab.hat import build_hat
from msplab.matroids import GraphicMatroid, UniformMatroid, as_weights
from msplab.rng import TrialSeed

from conftest import random_graphic, random_weight_list

T = ONE_OVER_E_U64


def make_state(matroid, weights, samples, accepted, memory):
    return FrameworkState(matroid, as_weights(weights), T, set(samples), list(accepted), set(memory))


def test_accept_rule_single_choice():
    m = UniformMatroid(2, 1)
    state = make_state(m, [5, 9], {0}, [], {0})
    assert framework_accept_rule(state, 1, T + 1)  # 9 beats the stored 5
    state = make_state(m, [5, 3], {0}, [], {0})
    assert not framework_accept_rule(state, 1, T + 1)
    assert not framework_accept_rule(state, 1, T)  # sampling stage


def test_accept_rule_blocker_on_hat():
    matroid, weights, inst = build_hat(2, 2)
    # claw 1 carries sampled upper + accepted lower (the blocker); claw 2's
    # lower is accepted: the arriving upper of claw 2 must be rejected.
    blocked = FrameworkState(
        matroid, weights, T,
        samples={inst.upper_id(1)},
        accepted=[inst.lower_id(1), inst.lower_id(2)],
        memory={inst.upper_id(1), inst.lower_id(1), inst.lower_id(2)},
    )
    assert not framework_accept_rule(blocked, inst.upper_id(2), T + 1)
    # without the blocker the same arrival is accepted (and loses the run)
    open_state = FrameworkState(
        matroid, weights, T,
        samples={inst.upper_id(1)},
        accepted=[inst.lower_id(2)],
        memory={inst.upper_id(1), inst.lower_id(2)},
    )
    assert framework_accept_rule(open_state, inst.upper_id(2), T + 1)


def test_accept_rule_requires_invariants():
    m = UniformMatroid(3, 1)
    bad = make_state(m, [1, 2, 3], set(), [0], set())  # accepted not in memory
    with pytest.raises(FrameworkFaultError):
        framework_accept_rule(bad, 1, T + 1)


def test_validate_memory_reports():
    m = UniformMatroid(4, 2)
    w = [4, 3, 2, 1]
    ok = make_state(m, w, {0, 1}, [], {0, 1})
    assert validate_memory(ok, m, {0, 1}).ok
    missing = make_state(m, w, {0, 1}, [2], {0})
    rep = validate_memory(missing, m, {0, 1, 2})
    assert not rep.ok and "containment" in rep.violations
    dependent = make_state(m, w, {0, 1, 2}, [], {0, 1, 2})
    assert "independence" in validate_memory(dependent, m, {0, 1, 2}).violations
    hollow = make_state(m, w, {0, 1}, [], set())
    assert "spanning" in validate_memory(hollow, m, {0, 1}).violations


def _uniform_schedule(sample_times, arrival_times):
    return ArrivalSchedule.from_floats(list(sample_times) + list(arrival_times))


def _decisions(matroid, weights, schedule, alg):
    trace = run_trial(matroid, as_weights(weights), schedule, alg, t_threshold=T)
    return [(ev.elem, ev.decision) for ev in trace.events]


def test_dynkin_policy_edges():
    m = UniformMatroid(2, 1)
    # no samples: the first post-T arrival is forced in
    sched = _uniform_schedule([], [0.5, 0.8])
    got = _decisions(m, [1, 2], sched, GreedyFramework(DynkinPolicy))
    assert got[0] == (0, Decision.ACCEPT)
    # heaviest element sampled: nothing is ever accepted
    m3 = UniformMatroid(3, 1)
    sched = _uniform_schedule([0.1], [0.5, 0.8])
    got = _decisions(m3, [9, 5, 7], sched, GreedyFramework(DynkinPolicy))
    assert all(d is not Decision.ACCEPT for _, d in got)


def test_dynkin_policy_requires_single_choice():
    alg = GreedyFramework(DynkinPolicy)
    with pytest.raises(ConfigurationError):
        alg.start(UniformMatroid(4, 2), as_weights([1, 2, 3, 4]), T)
    with pytest.raises(ConfigurationError):
        GreedyFramework(OptimisticPolicy).start(
            GraphicMatroid(3, [(0, 1)]), as_weights([1]), T
        )


def _direct_dynkin_position(ranks, cut):
    """Classic single-choice rule on an arrival sequence of distinct ranks
    (0 = heaviest): reject the first `cut`, then take the first running
    best. Returns the accepting arrival position or None."""
    best = None
    for pos, r in enumerate(ranks):
        if best is None or r < best:
            if pos >= cut:
                return pos
            best = r
    return None


def test_dynkin_exhaustive_n7():
    """All 7! arrival orders x all sample-phase sizes: the framework run of
    the single-choice policy makes exactly the classic rule's decision, so
    the win probability equals the exact enumeration."""
    n = 7
    t_frac = Fraction(T, TIME_DEN)
    post_step = (TIME_DEN - T) // (n + 2)
    win_weight = Fraction(0)
    total_weight_sum = Fraction(0)
    m = UniformMatroid(n, 1)
    for perm in permutations(range(n)):
        for cut in range(n + 1):
            # schedule realizing this order with the first `cut` sampled
            times = [0] * n
            for pos, rank in enumerate(perm):
                elem = rank  # element id = rank; weight n - rank
                if pos < cut:
                    times[elem] = pos + 1
                else:
                    times[elem] = T + (pos + 1) * post_step
            weights = as_weights([n - r for r in range(n)])
            alg = GreedyFramework(DynkinPolicy)
            alg.start(m, weights, T)
            framework_pos = None
            order = sorted(range(n), key=lambda e: times[e])
            for pos, elem in enumerate(order):
                decision, _, _ = alg.on_arrival(elem, weights[elem], times[elem])
                if decision is Decision.ACCEPT:
                    framework_pos = pos
                    break
            direct_pos = _direct_dynkin_position(perm, cut)
            assert framework_pos == direct_pos, (perm, cut)
            prob = (
                math.comb(n, cut) * t_frac ** cut * (1 - t_frac) ** (n - cut)
            ) / Fraction(math.factorial(n))
            total_weight_sum += prob
            if direct_pos is not None and perm[direct_pos] == 0:
                win_weight += prob
    assert total_weight_sum == 1
    # exact win probability of the rule, compared against a literal
    # re-enumeration of the classic rule alone
    direct = Fraction(0)
    for perm in permutations(range(n)):
        for cut in range(n + 1):
            pos = _direct_dynkin_position(perm, cut)
            if pos is not None and perm[pos] == 0:
                direct += (
                    math.comb(n, cut) * t_frac ** cut * (1 - t_frac) ** (n - cut)
                ) / Fraction(math.factorial(n))
    assert win_weight == direct
    assert abs(float(win_weight) - math.exp(-1)) < 0.05


def test_optimistic_hand_trace():
    # samples 9, 7; arrivals 8 then 10: 8 kicks 7, 10 kicks 9
    m = UniformMatroid(4, 2)
    sched = _uniform_schedule([0.1, 0.2], [0.5, 0.7])
    got = _decisions(m, [9, 7, 8, 10], sched, GreedyFramework(OptimisticPolicy))
    assert got[2:] == [(2, Decision.ACCEPT), (3, Decision.ACCEPT)]
    # arrivals 10 then 8: 10 kicks 7 leaving U={9}; 8 loses to 9
    got = _decisions(m, [9, 7, 10, 8], sched, GreedyFramework(OptimisticPolicy))
    assert got[2:] == [(2, Decision.ACCEPT), (3, Decision.REJECT)]


def test_pessimistic_hand_traces():
    m = UniformMatroid(4, 2)
    sched = _uniform_schedule([0.1, 0.2], [0.5, 0.7])
    # arrivals 8 then 10: 8 removes 7, 10 removes 9
    got = _decisions(m, [9, 7, 8, 10], sched, GreedyFramework(PessimisticPolicy))
    assert got[2:] == [(2, Decision.ACCEPT), (3, Decision.ACCEPT)]
    # arrivals 10 then 8: 10 removes 9, 8 removes 7, both accepted
    got = _decisions(m, [9, 7, 10, 8], sched, GreedyFramework(PessimisticPolicy))
    assert got[2:] == [(2, Decision.ACCEPT), (3, Decision.ACCEPT)]


def test_k1_policies_reduce_to_dynkin():
    m = UniformMatroid(8, 1)
    rng = random.Random(4)
    for idx in range(150):
        seed = TrialSeed(1000 + idx)
        sched = draw_schedule(8, seed)
        weights = [Fraction(rng.randint(1, 10 ** 6)) for _ in range(8)]
        reference = _decisions(m, weights, sched, GreedyFramework(DynkinPolicy))
        for policy in (OptimisticPolicy, PessimisticPolicy):
            assert _decisions(m, weights, sched, GreedyFramework(policy)) == reference


def test_large_k_accepts_everything_after_t():
    m = UniformMatroid(4, 5)
    sched = _uniform_schedule([0.1], [0.4, 0.6, 0.8])
    for policy in (OptimisticPolicy, PessimisticPolicy):
        got = _decisions(m, [1, 2, 3, 4], sched, GreedyFramework(policy))
        assert [d for _, d in got[1:]] == [Decision.ACCEPT] * 3


def test_virtual_k1_description():
    """Accept iff the arrival is the running best and the previous best was
    a sample; checked against an independent transcription."""
    m = UniformMatroid(8, 1)
    for idx in range(100):
        seed = TrialSeed(777, idx)
        sched = draw_schedule(8, seed)
        weights = as_weights([(i * 37) % 101 + 1 for i in range(8)])
        trace = run_trial(m, weights, sched, VirtualAlgorithm(), seed=seed, t_threshold=T)
        best = None  # (weight key, was_sample)
        for ev in trace.events:
            key = (-weights[ev.elem], ev.elem)
            if ev.decision is not Decision.SAMPLE:
                expect = best is not None and key < best[0] and best[1]
                assert (ev.decision is Decision.ACCEPT) == expect
            if best is None or key < best[0]:
                best = (key, ev.decision is Decision.SAMPLE)


def test_virtual_accepts_nothing_when_everything_sampled():
    m = UniformMatroid(3, 2)
    sched = _uniform_schedule([0.1, 0.2, 0.3], [])
    got = _decisions(m, [3, 2, 1], sched, VirtualAlgorithm())
    assert all(d is Decision.SAMPLE for _, d in got)


def test_virtual_escapes_every_memory_policy():
    """Witness that the virtual rule is outside the framework: with no
    samples, every valid memory forces the framework to accept the first
    post-T arrival, while the virtual rule rejects it (its reference list
    holds no sample to kick out). Exhausting all memory choices shows no
    policy reproduces that decision sequence."""
    m = UniformMatroid(3, 1)
    weights = as_weights([1, 2, 3])
    sched = _uniform_schedule([], [0.5, 0.7, 0.9])
    trace = run_trial(m, weights, sched, VirtualAlgorithm(), t_threshold=T)
    virtual_seq = tuple(
        ev.decision is Decision.ACCEPT for ev in trace.events if ev.decision is not Decision.SAMPLE
    )
    assert virtual_seq[0] is False
    reachable = enumerate_decision_sequences(m, weights, sched, T)
    assert all(seq[0] is True for seq in reachable)
    assert virtual_seq not in reachable


def test_supergreedy_policy_matches_direct_formulation():
    """Identical accept sets for the framework instantiation and the
    standalone three-condition rule across random small instances."""
    rng = random.Random(20240229)
    checked = 0
    while checked < 1000:
        kind = rng.randrange(3)
        if kind == 0:
            matroid = random_graphic(rng)
        elif kind == 1:
            matroid = UniformMatroid(rng.randint(1, 8), rng.randint(1, 4))
        else:
            matroid, w, _ = build_hat(rng.randint(1, 4), Fraction(rng.randint(2, 6)))
        n = matroid.ground_size
        if n == 0:
            continue
        weights = (
            w if kind == 2 else random_weight_list(rng, n, allow_ties=True)
        )
        seed = TrialSeed(rng.getrandbits(32), checked)
        sched = draw_schedule(n, seed)
        t1 = run_trial(matroid, weights, sched, GreedyFramework(SupergreedyPolicy), seed=seed)
        t2 = run_trial(matroid, weights, sched, SupergreedyDirect(), seed=seed)
        assert t1.accepted == t2.accepted, (kind, checked)
        checked += 1


def test_memory_invariants_hold_across_policies():
    rng = random.Random(8)
    cases = [
        (UniformMatroid(6, 1), DynkinPolicy),
        (UniformMatroid(6, 2), OptimisticPolicy),
        (UniformMatroid(6, 3), PessimisticPolicy),
    ]
    matroid_hat, weights_hat, _ = build_hat(3, 2)
    cases.append((matroid_hat, SupergreedyPolicy))
    for matroid, policy in cases:
        n = matroid.ground_size
        for idx in range(40):
            weights = (
                weights_hat if matroid is matroid_hat else random_weight_list(rng, n, allow_ties=False)
            )
            seed = TrialSeed(555, idx)
            alg = GreedyFramework(policy, validate_each_event=True)
            run_trial(matroid, weights, draw_schedule(n, seed), alg, seed=seed)


def test_rejected_after_t_never_re_enters_memory():
    matroid, weights, _ = build_hat(4, 2)
    for idx in range(60):
        seed = TrialSeed(91, idx)
        trace = run_trial(
            matroid, weights, draw_schedule(9, seed), GreedyFramework(SupergreedyPolicy), seed=seed
        )
        rejected = set()
        for ev, acc, mem in trace.snapshots():
            if ev.decision is Decision.REJECT:
                rejected.add(ev.elem)
            assert not (rejected & mem)
