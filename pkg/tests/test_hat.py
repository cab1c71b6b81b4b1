"""Hat construction, claw classification, and the lemma audits."""

from fractions import Fraction

import pytest

from msplab import _kernels
from msplab.engine import (
    ONE_OVER_E_U64,
    ArrivalSchedule,
    Decision,
    RunTrace,
    TraceEvent,
    draw_schedule,
    run_trial,
)
from msplab.errors import FrameworkFaultError, ParameterError
from msplab.framework import GreedyFramework, SupergreedyPolicy
from msplab.hat import (
    HatInstance,
    audit_kernel_traces,
    build_hat,
    classify_claws,
    claw_states,
    find_blocker,
    hat_optimum,
    is_loss,
    kernel_trace_to_runtrace,
    run_hat_batch,
    verify_structural_lemmas,
)
from msplab.matroids import brute_force_mwb, total_weight
from msplab.rng import TrialSeed

T = ONE_OVER_E_U64


def test_build_hat_shape_and_weights():
    matroid, weights, inst = build_hat(5, 2)
    assert matroid.ground_size == 11
    assert weights[0] == 6  # heavy shared edge weight n+1
    uppers = [weights[inst.upper_id(i)] for i in range(1, 6)]
    lowers = [weights[inst.lower_id(i)] for i in range(1, 6)]
    assert all(Fraction(1, 4) < w < Fraction(1, 2) for w in uppers)
    assert all(Fraction(1, 6) < w < Fraction(1, 4) for w in lowers)
    assert uppers == sorted(uppers, reverse=True)
    assert lowers == sorted(lowers, reverse=True)
    assert min(uppers) > max(lowers)
    with pytest.raises(ParameterError):
        build_hat(3, 1)
    with pytest.raises(ParameterError):
        build_hat(0, 2)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_hat_optimum_is_shared_edge_plus_uppers(n):
    matroid, weights, inst = build_hat(n, 3)
    opt, opt_utility = hat_optimum(inst, weights)
    assert brute_force_mwb(matroid, weights) == opt
    assert opt_utility == total_weight(weights, opt)


def test_missing_heavy_edge_caps_utility():
    matroid, weights, inst = build_hat(6, 4)
    rest = matroid.restrict(set(matroid.ground) - {inst.infinity_id})
    best_without = brute_force_mwb(rest, weights)
    _, opt_utility = hat_optimum(inst, weights)
    assert total_weight(weights, best_without) < opt_utility / inst.alpha


def test_classify_claws_and_blocker():
    matroid, weights, inst = build_hat(3, 2)
    states = claw_states(frozenset(), frozenset(), frozenset(), inst)
    assert states == ["--", "--", "--"]
    # sampled upper held in memory, lower absent
    states = claw_states(
        frozenset(), frozenset({inst.upper_id(2)}), frozenset({inst.upper_id(2)}), inst
    )
    assert states[1] == "S-"
    states = claw_states(
        frozenset({inst.lower_id(3)}),
        frozenset({inst.upper_id(3), inst.lower_id(3)}),
        frozenset({inst.upper_id(3)}),
        inst,
    )
    assert states[2] == "SA"
    assert find_blocker(states) == 3
    assert find_blocker(["--", "-A", "--"]) is None
    with pytest.raises(FrameworkFaultError):
        find_blocker(["SA", "--", "SA"])


def test_classify_claws_from_trace():
    matroid, weights, inst = build_hat(2, 2)
    seed = TrialSeed(5, 1)
    sched = draw_schedule(5, seed)
    trace = run_trial(matroid, weights, sched, GreedyFramework(SupergreedyPolicy), seed=seed)
    assert classify_claws(trace, 0, inst) == ["--", "--"]
    final = classify_claws(trace, 1, inst)
    assert len(final) == 2 and all(len(s) == 2 for s in final)


def test_is_loss_cases():
    matroid, weights, inst = build_hat(2, 2)
    # heavy edge sampled: immediate loss
    for idx in range(200):
        seed = TrialSeed(303, idx)
        sched = draw_schedule(5, seed)
        trace = run_trial(matroid, weights, sched, GreedyFramework(SupergreedyPolicy), seed=seed)
        if int(sched.times[inst.infinity_id]) <= T:
            assert is_loss(trace, inst)
        if inst.infinity_id in trace.accepted:
            assert not is_loss(trace, inst)


def test_loss_equivalence_over_trials():
    """Per-trace audit: loss iff a fully-accepted claw predates the heavy
    edge, or the heavy edge was sampled."""
    matroid, weights, inst = build_hat(5, 2)
    for idx in range(300):
        seed = TrialSeed(606, idx)
        trace = run_trial(
            matroid, weights, draw_schedule(11, seed), GreedyFramework(SupergreedyPolicy), seed=seed
        )
        report = verify_structural_lemmas(trace, inst, check_memory=False)
        assert report.loss_matches_claw_condition, idx


def test_structural_lemmas_on_generic_traces():
    matroid, weights, inst = build_hat(4, 2)
    pooled_a = pooled_b = 0
    for idx in range(250):
        seed = TrialSeed(909, idx)
        trace = run_trial(
            matroid, weights, draw_schedule(9, seed), GreedyFramework(SupergreedyPolicy), seed=seed
        )
        report = verify_structural_lemmas(trace, inst, matroid, weights, check_memory=True)
        assert report.ok, (idx, report.counterexamples)
        pooled_a += report.checks_a
        pooled_b += report.checks_b
    assert pooled_a > 0 and pooled_b > 0


def test_structural_lemmas_negative_control():
    """A hand-built trace that accepts the lower edge of an (S-) claw while
    a blocker is held must be reported at that exact event."""
    inst = HatInstance(2, Fraction(2))
    matroid, weights, _ = build_hat(2, 2)
    t = lambda f: int(f * 2 ** 64)
    up1, lo1 = inst.upper_id(1), inst.lower_id(1)
    up2, lo2 = inst.upper_id(2), inst.lower_id(2)
    trace = RunTrace(n=5, t_threshold=T)
    trace.events = [
        TraceEvent(t(0.1), up1, weights[up1], Decision.SAMPLE, (up1,), ()),
        TraceEvent(t(0.2), up2, weights[up2], Decision.SAMPLE, (up2,), ()),
        TraceEvent(t(0.5), lo1, weights[lo1], Decision.ACCEPT, (lo1,), ()),  # blocker at claw 1
        TraceEvent(t(0.6), lo2, weights[lo2], Decision.ACCEPT, (lo2,), ()),  # forbidden accept
        TraceEvent(t(0.9), inst.infinity_id, weights[0], Decision.REJECT, (), ()),
    ]
    report = verify_structural_lemmas(trace, inst, matroid, weights, check_memory=False)
    assert report.checks_b == 1 and report.mismatches_b == 1
    kinds = [c[0] for c in report.counterexamples]
    assert "lemma-b" in kinds
    event_index = next(c[1] for c in report.counterexamples if c[0] == "lemma-b")
    assert event_index == 3


def test_structural_lemmas_no_minus_a_claws():
    """A trace whose post-T arrivals never hit a (-A) claw reports zero
    type-(a) checks."""
    inst = HatInstance(1, Fraction(2))
    matroid, weights, _ = build_hat(1, 2)
    t = lambda f: int(f * 2 ** 64)
    up1, lo1 = inst.upper_id(1), inst.lower_id(1)
    trace = RunTrace(n=3, t_threshold=T)
    trace.events = [
        TraceEvent(t(0.5), up1, weights[up1], Decision.ACCEPT, (up1,), ()),
        TraceEvent(t(0.7), lo1, weights[lo1], Decision.REJECT, (), ()),
        TraceEvent(t(0.9), 0, weights[0], Decision.ACCEPT, (0,), ()),
    ]
    report = verify_structural_lemmas(trace, inst, matroid, weights, check_memory=False)
    assert report.checks_a == 0


def test_run_hat_batch_accounting():
    res = run_hat_batch(10, 3, 400, 7117, T, audit_every=8)
    assert res.trials == 400
    assert 0 <= res.losses <= 400
    assert res.trials_inf_after_t + int(
        sum(1 for f in res.t_inf if int(f) <= T)
    ) == 400
    assert 0 < float(res.mean_ratio) < 1.5
    for key in ("mismatch_a", "mismatch_b", "double_blocker", "obs1_mismatch", "mem_violations"):
        assert res.audit[key] == 0, key


def test_audit_kernel_traces_pools_reports():
    pooled = audit_kernel_traces(6, 2, 2468, T, range(20), check_memory=True)
    assert pooled.ok, pooled.counterexamples
    assert pooled.memory_checks > 0


def test_kernel_trace_roundtrip_matches_batch_outcomes():
    n = 8
    res = _kernels.hat_supergreedy_batch(n, 30, 1212, T, 5, 1)
    matroid, weights, inst = build_hat(n, 5)
    for idx in range(30):
        raw = _kernels.hat_supergreedy_trace(n, 1212, idx, T)
        trace = kernel_trace_to_runtrace(inst, weights, raw, T)
        assert is_loss(trace, inst) == bool(res["loss"][idx])
