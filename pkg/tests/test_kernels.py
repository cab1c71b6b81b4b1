"""Cross-checks between the compiled kernels, the pure fallback, and the
generic reference implementations.

The pure and compiled modules must agree bit for bit; both must agree with
the slow matroid-oracle machinery on small instances.
"""

import numpy as np
import pytest

from msplab import _kernels
from msplab._kernels import _pure
from msplab.engine import ONE_OVER_E_U64, Decision, draw_schedule, run_trial
from msplab.framework import DynkinPolicy, GreedyFramework, SupergreedyPolicy
from msplab.hat import build_hat, kernel_trace_to_runtrace
from msplab.matroids import UniformMatroid, weight_key
from msplab.partition import (
    KorulaPalAlgorithm,
    complete_graph_matroid,
    korula_pal_partition,
    plant_broom,
    run_partition_dynkin,
)
from msplab.rng import TrialSeed

T = ONE_OVER_E_U64

try:
    from msplab._kernels import _compiled
except ImportError:
    _compiled = None

needs_compiled = pytest.mark.skipif(_compiled is None, reason="compiled kernel unavailable")


def test_selected_implementation_exposed():
    assert _kernels.IMPLEMENTATION in ("compiled", "pure-python")


@needs_compiled
@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_hat_batch_bitwise_equality(n):
    a = _pure.hat_supergreedy_batch(n, 60, 31415, T, 7, 2, audit_every=1)
    b = _compiled.hat_supergreedy_batch(n, 60, 31415, T, 7, 2, audit_every=1)
    for key in ("loss", "inf_sampled", "aa_before_inf", "t_inf", "util_scaled", "n_accepted", "accept_counts"):
        assert np.array_equal(a[key], b[key]), key
    assert a["audit"] == b["audit"]
    assert a["weight_scale"] == b["weight_scale"]


@needs_compiled
def test_hat_trace_bitwise_equality():
    for n in (1, 4, 9):
        for idx in range(15):
            a = _pure.hat_supergreedy_trace(n, 999, idx, T)
            b = _compiled.hat_supergreedy_trace(n, 999, idx, T)
            for key in ("elem", "time", "decision", "claw_code", "inf_code", "times"):
                assert np.array_equal(a[key], b[key]), (n, idx, key)


@needs_compiled
def test_uniform_dynkin_bitwise_equality():
    rng = np.random.default_rng(7)
    for n in (1, 2, 13, 100):
        rank = rng.permutation(n).astype(np.int64)
        a = _pure.uniform_dynkin_batch(n, rank, 400, 5, T)
        b = _compiled.uniform_dynkin_batch(n, rank, 400, 5, T)
        assert np.array_equal(a, b)


@needs_compiled
def test_partition_and_broom_bitwise_equality():
    nv = 6
    edges = [(u, v) for u in range(nv) for v in range(u + 1, nv)]
    eu = np.array([e[0] for e in edges], dtype=np.int64)
    ev = np.array([e[1] for e in edges], dtype=np.int64)
    ws = np.random.default_rng(3).integers(0, 50, len(edges)).astype(np.int64)
    for part in (None, (eu * 2 + ev) % 4):
        a = _pure.partition_dynkin_batch(nv, eu, ev, ws, 250, 11, T, part_of_edge=part, tracked_elems=[0, 7])
        b = _compiled.partition_dynkin_batch(nv, eu, ev, ws, 250, 11, T, part_of_edge=part, tracked_elems=[0, 7])
        for key in ("accept_counts", "util_scaled", "tracked"):
            assert np.array_equal(a[key], b[key]), key
    for single in (False, True):
        a = _pure.broom_batch(8, 150, 21, T, single_part=single)
        b = _compiled.broom_batch(8, 150, 21, T, single_part=single)
        for key in ("slot_counts", "handle_deg", "util_legs"):
            assert np.array_equal(a[key], b[key]), key


@pytest.mark.parametrize("n", [1, 2, 3, 6, 10])
def test_hat_kernel_matches_generic_framework(n):
    """The claw-state machine is exactly the framework + supergreedy memory:
    identical decision sequences and identical memory snapshots."""
    matroid, weights, inst = build_hat(n, 3)
    for idx in range(25):
        seed = TrialSeed(52 + 7 * n, idx)
        sched = draw_schedule(2 * n + 1, seed)
        generic = run_trial(
            matroid, weights, sched,
            GreedyFramework(SupergreedyPolicy, validate_each_event=True),
            seed=seed, t_threshold=T,
        )
        raw = _kernels.hat_supergreedy_trace(n, seed.master_seed, seed.trial_index, T)
        kernel = kernel_trace_to_runtrace(inst, weights, raw, T)
        assert [(e.elem, e.decision) for e in generic.events] == [
            (e.elem, e.decision) for e in kernel.events
        ]
        assert [m for _, _, m in generic.snapshots()] == [m for _, _, m in kernel.snapshots()]


def test_hat_kernel_schedule_matches_engine():
    seed = TrialSeed(12345, 6)
    sched = draw_schedule(9, seed)
    raw = _kernels.hat_supergreedy_trace(4, 12345, 6, T)
    assert np.array_equal(raw["times"], sched.times)


def test_uniform_kernel_matches_engine_dynkin():
    n = 8
    weights = [__import__("fractions").Fraction(w) for w in (3, 9, 1, 7, 5, 8, 2, 6)]
    rank = np.empty(n, dtype=np.int64)
    for pos, e in enumerate(sorted(range(n), key=lambda e: weight_key(weights, e))):
        rank[e] = pos
    m = UniformMatroid(n, 1)
    accepted = _kernels.uniform_dynkin_batch(n, rank, 120, 2024, T)
    for idx in range(120):
        seed = TrialSeed(2024, idx)
        trace = run_trial(m, weights, draw_schedule(n, seed), GreedyFramework(DynkinPolicy), seed=seed)
        got = sorted(trace.accepted)
        expect = [int(accepted[idx])] if accepted[idx] >= 0 else []
        assert got == expect, idx


def test_partition_kernel_matches_python_runner():
    """Fixed-partition kernel vs the per-trial python parallel-Dynkin."""
    n = 5
    p = korula_pal_partition(n, TrialSeed(17, 0))
    matroid = complete_graph_matroid(n)
    m = len(matroid.edges)
    weights = [__import__("fractions").Fraction(w) for w in range(m, 0, -1)]
    ws = np.array([int(w) for w in weights], dtype=np.int64)
    eu = np.array([e[0] for e in matroid.edges], dtype=np.int64)
    ev = np.array([e[1] for e in matroid.edges], dtype=np.int64)
    res = _kernels.partition_dynkin_batch(
        n, eu, ev, ws, 100, 777, T, part_of_edge=p.as_array(), tracked_elems=list(range(m))
    )
    for idx in range(100):
        seed = TrialSeed(777, idx)
        sched = draw_schedule(m, seed)
        accepted = run_partition_dynkin(p, weights, sched, T)
        from_kernel = {e for e in range(m) if res["tracked"][idx, e]}
        assert accepted == from_kernel, idx


def test_kp_kernel_matches_engine_algorithm():
    """Resampled-ordering kernel vs the engine adapter that draws the same
    ordering keys from the trial seed."""
    n = 5
    matroid = complete_graph_matroid(n)
    m = len(matroid.edges)
    weights = [__import__("fractions").Fraction(2 * m - e, 2) for e in range(m)]
    ws = np.array([int(w * 2) for w in weights], dtype=np.int64)
    eu = np.array([e[0] for e in matroid.edges], dtype=np.int64)
    ev = np.array([e[1] for e in matroid.edges], dtype=np.int64)
    res = _kernels.partition_dynkin_batch(n, eu, ev, ws, 80, 31, T, tracked_elems=list(range(m)))
    for idx in range(80):
        seed = TrialSeed(31, idx)
        trace = run_trial(
            matroid, weights, draw_schedule(m, seed), KorulaPalAlgorithm(n), seed=seed, t_threshold=T
        )
        from_kernel = {e for e in range(m) if res["tracked"][idx, e]}
        assert trace.accepted == from_kernel, idx


def test_broom_kernel_matches_python_pipeline():
    """Kernel broom trials vs plant_broom + korula_pal_partition +
    run_partition_dynkin stitched together in python."""
    n = 6
    matroid = complete_graph_matroid(n)
    m = len(matroid.edges)
    res = _kernels.broom_batch(n, 60, 4242, T)
    for idx in range(60):
        seed = TrialSeed(4242, idx)
        weights, inst = plant_broom(n, seed)
        p = korula_pal_partition(n, seed)
        sched = draw_schedule(m, seed)
        accepted = run_partition_dynkin(p, weights, sched, T)
        legs_accepted = sum(1 for e in inst.leg_ids if e in accepted)
        assert legs_accepted == int(res["util_legs"][idx]), idx
    # aggregate slot counts match a python recount
    recount = np.zeros(n - 2, dtype=np.int64)
    for idx in range(60):
        seed = TrialSeed(4242, idx)
        weights, inst = plant_broom(n, seed)
        p = korula_pal_partition(n, seed)
        sched = draw_schedule(m, seed)
        accepted = run_partition_dynkin(p, weights, sched, T)
        for s, e in enumerate(inst.leg_ids):
            if e in accepted:
                recount[s] += 1
    assert np.array_equal(recount, res["slot_counts"])


def test_hat_audits_clean_on_batches():
    res = _kernels.hat_supergreedy_batch(25, 300, 8080, T, 5, 1, audit_every=1)
    audit = res["audit"]
    assert audit["mismatch_a"] == 0 and audit["mismatch_b"] == 0
    assert audit["double_blocker"] == 0 and audit["obs1_mismatch"] == 0
    assert audit["aggregate_mismatch"] == 0 and audit["mem_violations"] == 0
    assert audit["checks_a"] > 0 and audit["checks_b"] > 0
