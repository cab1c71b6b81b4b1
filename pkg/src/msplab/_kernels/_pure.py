"""Pure-Python / numpy implementations of the hot simulation kernels.

These are the fallback for environments without the compiled extension and
the behavioral reference the Cython kernel must match bit for bit: both
sides consume the same splitmix64 streams and implement the same integer
state machines, so outputs are identical, not merely statistically alike.

Hat kernel
----------
The greedy-framework run with the supergreedy memory rule on a hat graph is
simulated by a claw-state machine instead of generic matroid queries. With
claws indexed 1..n (heaviest leftmost), element ids are::

    0        the heavy shared edge ("infinity edge")
    1..n     upper edges (claw index = id)
    n+1..2n  lower edges (claw index = id - n)

Because Kruskal connectivity after processing all elements heavier than a
given edge equals connectivity of that whole heavier set, membership of a
sample in the stored set I_t = MWB(samples / accepted) + accepted reduces to
closed-form tests over a few aggregates of the raw sampled/accepted flags:

* ``conn_raw``   -- infinity edge sampled or accepted
* ``aa_exists``  -- some claw fully accepted
* ``l_sa``       -- leftmost claw with sampled upper and accepted lower
* ``minpos_xs``  -- leftmost claw with present upper and sampled lower
* ``exists_xa``  -- some claw with present upper and accepted lower

and the accept rule of the framework becomes:

* infinity edge: accept iff no fully-accepted claw exists
* upper i: accept iff not (lower i accepted and
  (conn_raw or aa_exists or l_sa < i))
* lower i: accept iff not (upper i present and
  (conn_raw or exists_xa or minpos_xs < i))

Equivalence of this machine with the generic framework implementation is
covered by tests on small hats over many seeds.
"""

from __future__ import annotations

import numpy as np

from ..rng import (
    BROOM_TAG,
    GOLDEN,
    MASK64,
    PARTITION_TAG,
    SCHEDULE_TAG,
    mix64,
    stream_array,
    stream_value,
)

IMPLEMENTATION = "pure-python"

LABEL_CHARS = "-SA"
SENTINEL = 1 << 30


def _trial_seed(master_seed: int, trial_index: int) -> int:
    return mix64((master_seed ^ trial_index) & MASK64)


def _substream(trial_seed: int, tag: int) -> int:
    return mix64(trial_seed ^ tag)


def hat_scaled_weights(n: int, alpha_num: int, alpha_den: int) -> np.ndarray:
    """Integer edge weights on the common denominator 6*(n+1)*alpha_num.

    Index layout matches the kernel element ids; the weight order is
    infinity > uppers (left to right) > lowers (left to right).
    """
    w = np.zeros(2 * n + 1, dtype=np.int64)
    w[0] = 6 * (n + 1) * (n + 1) * alpha_num
    for i in range(1, n + 1):
        w[i] = 3 * alpha_den * (2 * n - i + 2)
        w[n + i] = alpha_den * (3 * n - i + 3)
    return w


class _HatAudit:
    """Counters accumulated across a batch of hat trials."""

    __slots__ = (
        "checks_a", "mismatch_a", "checks_b", "mismatch_b",
        "double_blocker", "obs1_mismatch", "scan_events",
        "aggregate_mismatch", "mem_checks", "mem_violations",
    )

    def __init__(self):
        for name in self.__slots__:
            setattr(self, name, 0)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__slots__}


class _HatSim:
    """One hat trial under the framework + supergreedy memory rule."""

    def __init__(self, n: int, times: np.ndarray, t_threshold: int):
        self.n = n
        self.times = times
        self.t_thr = t_threshold
        self.samp_up = np.zeros(n + 1, dtype=bool)
        self.samp_lo = np.zeros(n + 1, dtype=bool)
        self.acc_up = np.zeros(n + 1, dtype=bool)
        self.acc_lo = np.zeros(n + 1, dtype=bool)
        self.arr_up = np.zeros(n + 1, dtype=bool)
        self.arr_lo = np.zeros(n + 1, dtype=bool)
        self.inf_sampled = False
        self.inf_accepted = False
        self.inf_arrived = False
        self.aa_exists = False
        self.first_aa_time = None
        self.conn_raw = False
        self.l_sa = SENTINEL
        self.minpos_xs = SENTINEL
        self.exists_xa = False

    # -- claw labels ----------------------------------------------------

    def up_label(self, i: int) -> int:
        if self.acc_up[i]:
            return 2
        if self.samp_up[i] and not (
            self.acc_lo[i] and (self.conn_raw or self.aa_exists or self.l_sa < i)
        ):
            return 1
        return 0

    def lo_label(self, i: int) -> int:
        if self.acc_lo[i]:
            return 2
        if self.samp_lo[i] and not (
            (self.samp_up[i] or self.acc_up[i])
            and (self.conn_raw or self.exists_xa or self.minpos_xs < i)
        ):
            return 1
        return 0

    def inf_code(self) -> int:
        if self.inf_accepted:
            return 2
        if self.inf_sampled and not self.aa_exists:
            return 1
        return 0

    def blocker_pos(self):
        if self.l_sa < SENTINEL and not (self.conn_raw or self.aa_exists):
            return self.l_sa
        return None

    # -- event processing ------------------------------------------------

    def mark_sample(self, elem: int) -> None:
        if elem == 0:
            self.inf_sampled = True
            self.inf_arrived = True
            self.conn_raw = True
        elif elem <= self.n:
            self.samp_up[elem] = True
            self.arr_up[elem] = True
            if self.samp_lo[elem] and elem < self.minpos_xs:
                self.minpos_xs = elem
        else:
            i = elem - self.n
            self.samp_lo[i] = True
            self.arr_lo[i] = True
            if self.samp_up[i] and i < self.minpos_xs:
                self.minpos_xs = i

    def decide(self, elem: int) -> bool:
        """Framework accept rule specialized to the hat (post-T arrivals)."""
        if elem == 0:
            return not self.aa_exists
        if elem <= self.n:
            i = elem
            return not (
                self.acc_lo[i] and (self.conn_raw or self.aa_exists or self.l_sa < i)
            )
        i = elem - self.n
        return not (
            (self.samp_up[i] or self.acc_up[i])
            and (self.conn_raw or self.exists_xa or self.minpos_xs < i)
        )

    def apply(self, elem: int, accept: bool, time: int) -> None:
        if elem == 0:
            self.inf_arrived = True
            if accept:
                self.inf_accepted = True
                self.conn_raw = True
            return
        if elem <= self.n:
            i = elem
            self.arr_up[i] = True
            if accept:
                self.acc_up[i] = True
                if self.samp_lo[i] and i < self.minpos_xs:
                    self.minpos_xs = i
                if self.acc_lo[i]:
                    self.exists_xa = True
                    if not self.aa_exists:
                        self.aa_exists = True
                        self.first_aa_time = time
            return
        i = elem - self.n
        self.arr_lo[i] = True
        if accept:
            self.acc_lo[i] = True
            if self.samp_up[i]:
                self.exists_xa = True
                if i < self.l_sa:
                    self.l_sa = i
            if self.acc_up[i]:
                self.exists_xa = True
                if not self.aa_exists:
                    self.aa_exists = True
                    self.first_aa_time = time

    # -- audits -----------------------------------------------------------

    def check_lemmas(self, elem: int, accept: bool, audit: _HatAudit) -> None:
        """Per-event decision checks against the blocker lemmas."""
        if elem == 0:
            return
        if elem <= self.n:
            i = elem
            # upper edge of a (-A) claw, no fully-accepted claw, heavy edge
            # not in memory: accepted iff no blocker to its left.
            if self.acc_lo[i] and not self.aa_exists and not self.conn_raw:
                audit.checks_a += 1
                blocker = self.blocker_pos()
                predicted = not (blocker is not None and blocker < i)
                if predicted != accept:
                    audit.mismatch_a += 1
        else:
            i = elem - self.n
            # lower edge of an (S -) claw while a blocker exists: rejected.
            if self.samp_up[i] and self.up_label(i) == 1 and self.blocker_pos() is not None:
                audit.checks_b += 1
                if accept:
                    audit.mismatch_b += 1

    def scan_audit(self, audit: _HatAudit) -> None:
        """O(n) recomputation of aggregates, blocker multiplicity, and the
        memory invariants (containment, independence, spanning)."""
        n = self.n
        audit.scan_events += 1

        conn = bool(self.inf_sampled or self.inf_accepted)
        aa = bool(np.any(self.acc_up[1:] & self.acc_lo[1:]))
        sa = np.nonzero(self.samp_up[1:] & self.acc_lo[1:])[0]
        l_sa = int(sa[0]) + 1 if sa.size else SENTINEL
        xs = np.nonzero((self.samp_up[1:] | self.acc_up[1:]) & self.samp_lo[1:])[0]
        minpos = int(xs[0]) + 1 if xs.size else SENTINEL
        exists = bool(np.any((self.samp_up[1:] | self.acc_up[1:]) & self.acc_lo[1:]))
        if (conn, aa, l_sa, minpos, exists) != (
            self.conn_raw, self.aa_exists, self.l_sa, self.minpos_xs, self.exists_xa
        ):
            audit.aggregate_mismatch += 1

        audit.mem_checks += 1
        up = np.array([self.up_label(i) for i in range(1, n + 1)], dtype=np.int8)
        lo = np.array([self.lo_label(i) for i in range(1, n + 1)], dtype=np.int8)
        inf_in = self.inf_code() != 0

        blockers = int(np.sum((up == 1) & (lo == 2)))
        if blockers > 1:
            audit.double_blocker += 1

        # independence: at most one a-b connector held in memory
        full = int(np.sum((up != 0) & (lo != 0)))
        connectors = full + (1 if inf_in else 0)
        violation = connectors > 1
        # containment: accepted flags and labels must agree
        if np.any((self.acc_up[1:] != (up == 2))) or np.any(self.acc_lo[1:] != (lo == 2)):
            violation = True
        if self.inf_accepted and self.inf_code() != 2:
            violation = True
        # spanning: every arrived edge outside memory must close a cycle
        ab_conn = inf_in or full > 0
        up_out = self.arr_up[1:] & (up == 0)
        lo_out = self.arr_lo[1:] & (lo == 0)
        if np.any(up_out & ~((lo != 0) & ab_conn)):
            violation = True
        if np.any(lo_out & ~((up != 0) & ab_conn)):
            violation = True
        if self.inf_arrived and not inf_in and not ab_conn:
            violation = True
        if violation:
            audit.mem_violations += 1


def _hat_order(times: np.ndarray) -> np.ndarray:
    return np.argsort(times, kind="stable")


def hat_supergreedy_batch(
    n: int,
    trials: int,
    master_seed: int,
    t_threshold: int,
    alpha_num: int,
    alpha_den: int,
    audit_every: int = 64,
    start_trial: int = 0,
    tracked_elems=None,
) -> dict:
    """Run `trials` hat trials; per-trial outcomes plus pooled audit counts."""
    weights = hat_scaled_weights(n, alpha_num, alpha_den)
    tracked_slot = {int(e): j for j, e in enumerate(tracked_elems)} if tracked_elems is not None else None
    tracked = (
        np.zeros((trials, len(tracked_slot)), dtype=np.uint8) if tracked_slot is not None else None
    )
    loss = np.zeros(trials, dtype=np.uint8)
    inf_sampled = np.zeros(trials, dtype=np.uint8)
    aa_before_inf = np.zeros(trials, dtype=np.uint8)
    t_inf = np.zeros(trials, dtype=np.uint64)
    util = np.zeros(trials, dtype=np.int64)
    n_accepted = np.zeros(trials, dtype=np.int32)
    accept_counts = np.zeros(2 * n + 1, dtype=np.int64)
    audit = _HatAudit()

    for t in range(trials):
        seed = _substream(_trial_seed(master_seed, start_trial + t), SCHEDULE_TAG)
        times = stream_array(seed, 2 * n + 1)
        sim = _HatSim(n, times, t_threshold)
        order = _hat_order(times)
        post = []
        for elem in order:
            elem = int(elem)
            if int(times[elem]) <= t_threshold:
                sim.mark_sample(elem)
            else:
                post.append(elem)
        sim.scan_audit(audit)

        total = 0
        count = 0
        for k, elem in enumerate(post):
            tm = int(times[elem])
            accept = sim.decide(elem)
            sim.check_lemmas(elem, accept, audit)
            sim.apply(elem, accept, tm)
            if accept:
                total += int(weights[elem])
                count += 1
                accept_counts[elem] += 1
                if tracked_slot is not None and elem in tracked_slot:
                    tracked[t, tracked_slot[elem]] = 1
            if audit_every > 0 and (k + 1) % audit_every == 0:
                sim.scan_audit(audit)
        sim.scan_audit(audit)

        t_inf[t] = times[0]
        inf_sampled[t] = 1 if sim.inf_sampled else 0
        loss[t] = 0 if sim.inf_accepted else 1
        expected_loss = sim.inf_sampled or (
            sim.aa_exists and sim.first_aa_time is not None and sim.first_aa_time < int(times[0])
        )
        if bool(loss[t]) != bool(expected_loss):
            audit.obs1_mismatch += 1
        aa_before_inf[t] = (
            1 if (sim.aa_exists and sim.first_aa_time is not None and sim.first_aa_time < int(times[0])) else 0
        )
        util[t] = total
        n_accepted[t] = count

    return {
        "loss": loss,
        "inf_sampled": inf_sampled,
        "aa_before_inf": aa_before_inf,
        "t_inf": t_inf,
        "util_scaled": util,
        "n_accepted": n_accepted,
        "accept_counts": accept_counts,
        "tracked": tracked,
        "weight_scale": 6 * (n + 1) * alpha_num,
        "audit": audit.as_dict(),
    }


def hat_supergreedy_trace(n: int, master_seed: int, trial_index: int, t_threshold: int) -> dict:
    """Full event log of one hat trial: decisions plus the claw-state matrix
    (state AFTER each event), for trace reconstruction and python audits."""
    seed = _substream(_trial_seed(master_seed, trial_index), SCHEDULE_TAG)
    times = stream_array(seed, 2 * n + 1)
    sim = _HatSim(n, times, t_threshold)
    order = _hat_order(times)
    events = len(order)
    elem_out = np.zeros(events, dtype=np.int32)
    time_out = np.zeros(events, dtype=np.uint64)
    decision = np.zeros(events, dtype=np.int8)  # 0 sample, 1 accept, 2 reject
    claw_code = np.zeros((events, n), dtype=np.int8)  # up*3 + lo
    inf_code = np.zeros(events, dtype=np.int8)

    for k, elem in enumerate(order):
        elem = int(elem)
        tm = int(times[elem])
        if tm <= t_threshold:
            sim.mark_sample(elem)
            decision[k] = 0
        else:
            accept = sim.decide(elem)
            sim.apply(elem, accept, tm)
            decision[k] = 1 if accept else 2
        elem_out[k] = elem
        time_out[k] = tm
        for i in range(1, n + 1):
            claw_code[k, i - 1] = sim.up_label(i) * 3 + sim.lo_label(i)
        inf_code[k] = sim.inf_code()

    return {
        "elem": elem_out,
        "time": time_out,
        "decision": decision,
        "claw_code": claw_code,
        "inf_code": inf_code,
        "times": times,
    }


# ---------------------------------------------------------------------------
# 1-uniform Dynkin kernel
# ---------------------------------------------------------------------------


def uniform_dynkin_batch(
    n: int,
    rank_of_elem: np.ndarray,
    trials: int,
    master_seed: int,
    t_threshold: int,
    start_trial: int = 0,
    chunk: int = 8192,
) -> np.ndarray:
    """Element accepted by the single-choice rule per trial (-1 if none).

    ``rank_of_elem[e]`` is e's position in the weight-descending id-ascending
    order (0 = heaviest). Vectorized over trials: an element is a running
    best at its arrival iff it arrives before every better-ranked element,
    and the rule accepts the earliest post-T running best, i.e. the
    deepest-ranked candidate with arrival time above the threshold.
    """
    order = np.argsort(rank_of_elem, kind="stable")  # element ids, best first
    out = np.full(trials, -1, dtype=np.int32)
    thr = np.uint64(t_threshold)
    idx1 = np.arange(1, n + 1, dtype=np.uint64)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        tidx = np.arange(start_trial + lo, start_trial + hi, dtype=np.uint64)
        seeds = np.uint64(master_seed & MASK64) ^ tidx
        with np.errstate(over="ignore"):
            seeds = _mix_vec(seeds)
            seeds = _mix_vec(seeds ^ np.uint64(SCHEDULE_TAG))
            times = _mix_vec(seeds[:, None] + idx1[None, :] * np.uint64(GOLDEN))
        by_rank = times[:, order]
        pm = np.minimum.accumulate(by_rank, axis=1)
        prev_min = np.empty_like(pm)
        prev_min[:, 0] = np.iinfo(np.uint64).max
        prev_min[:, 1:] = pm[:, :-1]
        cand = (by_rank > thr) & (by_rank < prev_min)
        any_cand = cand.any(axis=1)
        last = n - 1 - np.argmax(cand[:, ::-1], axis=1)
        out[lo:hi] = np.where(any_cand, order[last], -1)
    return out


def _mix_vec(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x.copy()
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return x


# ---------------------------------------------------------------------------
# Parallel-Dynkin partition kernels
# ---------------------------------------------------------------------------


def _partition_trial(
    rank_order: np.ndarray,
    part: np.ndarray,
    times: np.ndarray,
    t_threshold: int,
    pm: list,
    acc: list,
    stamp: list,
    trial_stamp: int,
) -> list[int]:
    """Dynkin per part, one trial. Scans edges in global rank order keeping
    a per-part running minimum of earlier (better) arrival times; the
    accepted edge of a part is its deepest candidate above the threshold."""
    touched = []
    part_l = part.tolist()
    times_l = times.tolist()
    no_time = MASK64 + 1
    for e in rank_order:
        p = part_l[e]
        t = times_l[e]
        if stamp[p] != trial_stamp:
            stamp[p] = trial_stamp
            pm[p] = no_time
            acc[p] = -1
            touched.append(p)
        if t < pm[p]:
            if t > t_threshold:
                acc[p] = e
            pm[p] = t
    return [acc[p] for p in touched if acc[p] >= 0]


def rank_order_for_weights(weights_scaled: np.ndarray) -> np.ndarray:
    """Edge ids sorted weight-descending, id-ascending."""
    m = len(weights_scaled)
    return np.lexsort((np.arange(m), -weights_scaled))


def kp_parts_from_keys(edge_u: np.ndarray, edge_v: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Owner endpoint per edge: the one with the smaller (key, id) pair."""
    ku = keys[edge_u]
    kv = keys[edge_v]
    take_u = (ku < kv) | ((ku == kv) & (edge_u < edge_v))
    return np.where(take_u, edge_u, edge_v).astype(np.int64)


def partition_dynkin_batch(
    n_vertices: int,
    edge_u: np.ndarray,
    edge_v: np.ndarray,
    weights_scaled: np.ndarray,
    trials: int,
    master_seed: int,
    t_threshold: int,
    part_of_edge: np.ndarray | None = None,
    start_trial: int = 0,
    tracked_elems=None,
) -> dict:
    """Parallel Dynkin over an edge partition of a graph on fixed weights.

    With ``part_of_edge`` given the partition is fixed; otherwise each trial
    draws a fresh random vertex ordering and owns each edge by its earlier
    endpoint. Returns per-edge accept counts and per-trial utilities.
    """
    m = len(edge_u)
    rank_order = rank_order_for_weights(weights_scaled).tolist()
    counts = np.zeros(m, dtype=np.int64)
    util = np.zeros(trials, dtype=np.int64)
    tracked_slot = {int(e): j for j, e in enumerate(tracked_elems)} if tracked_elems is not None else None
    tracked = (
        np.zeros((trials, len(tracked_slot)), dtype=np.uint8) if tracked_slot is not None else None
    )
    pm = [0] * (n_vertices + 1)
    acc = [-1] * (n_vertices + 1)
    stamp = [-1] * (n_vertices + 1)

    for t in range(trials):
        tseed = _trial_seed(master_seed, start_trial + t)
        times = stream_array(_substream(tseed, SCHEDULE_TAG), m)
        if part_of_edge is None:
            keys = stream_array(_substream(tseed, PARTITION_TAG), n_vertices)
            part = kp_parts_from_keys(edge_u, edge_v, keys)
        else:
            part = part_of_edge
        accepted = _partition_trial(rank_order, part, times, t_threshold, pm, acc, stamp, t + 1)
        total = 0
        for e in accepted:
            counts[e] += 1
            total += int(weights_scaled[e])
            if tracked_slot is not None and e in tracked_slot:
                tracked[t, tracked_slot[e]] = 1
        util[t] = total
    return {"accept_counts": counts, "util_scaled": util, "tracked": tracked}


def broom_batch(
    n_vertices: int,
    trials: int,
    master_seed: int,
    t_threshold: int,
    single_part: bool = False,
    start_trial: int = 0,
) -> dict:
    """Broom attack trials: replant the broom, repartition (unless
    ``single_part``), rerun parallel Dynkin; tally acceptance per leg slot.

    Leg slots order the u-side legs by ascending spoke vertex, then the
    v-side legs. ``handle_deg`` is the handle's within-part edge degree.
    """
    n = n_vertices
    if n < 4 or n % 2:
        raise ValueError("broom needs an even vertex count >= 4")
    m = n * (n - 1) // 2
    half = (n - 2) // 2
    edge_u = np.zeros(m, dtype=np.int64)
    edge_v = np.zeros(m, dtype=np.int64)
    k = 0
    for u in range(n):
        for v in range(u + 1, n):
            edge_u[k] = u
            edge_v[k] = v
            k += 1
    eidx = np.full((n, n), -1, dtype=np.int64)
    for e in range(m):
        eidx[edge_u[e], edge_v[e]] = e
        eidx[edge_v[e], edge_u[e]] = e

    slot_counts = np.zeros(n - 2, dtype=np.int64)
    handle_deg = np.zeros(trials, dtype=np.int32)
    util = np.zeros(trials, dtype=np.int64)
    pm = [0] * (n + 1)
    acc = [-1] * (n + 1)
    stamp = [-1] * (n + 1)

    for t in range(trials):
        tseed = _trial_seed(master_seed, start_trial + t)
        bseed = _substream(tseed, BROOM_TAG)
        handle = stream_value(bseed, 0) % m
        u, v = int(edge_u[handle]), int(edge_v[handle])
        side_keys = stream_array(bseed, n, start=1)
        others = [z for z in range(n) if z != u and z != v]
        others.sort(key=lambda z: (int(side_keys[z]), z))
        xs = sorted(others[:half])
        ys = sorted(others[half:])

        leg_of_slot = np.empty(n - 2, dtype=np.int64)
        w1 = np.zeros(m, dtype=bool)
        for s, x in enumerate(xs):
            e = int(eidx[u, x])
            leg_of_slot[s] = e
            w1[e] = True
        for s, y in enumerate(ys):
            e = int(eidx[v, y])
            leg_of_slot[half + s] = e
            w1[e] = True

        if single_part:
            part = np.zeros(m, dtype=np.int64)
        else:
            keys = stream_array(_substream(tseed, PARTITION_TAG), n)
            part = kp_parts_from_keys(edge_u, edge_v, keys)

        # within-part degree of the handle
        hp = int(part[handle])
        deg = 0
        in_p = part == hp
        deg = int(np.sum(in_p & ((edge_u == u) | (edge_v == u)))) + int(
            np.sum(in_p & ((edge_u == v) | (edge_v == v)))
        ) - 1
        handle_deg[t] = deg

        times = stream_array(_substream(tseed, SCHEDULE_TAG), m)
        # rank order: weight-1 legs by id, then weight-0 edges by id
        ones = np.nonzero(w1)[0]
        zeros = np.nonzero(~w1)[0]
        rank_order = np.concatenate([ones, zeros]).tolist()
        accepted = _partition_trial(rank_order, part, times, t_threshold, pm, acc, stamp, t + 1)
        total = 0
        slot_of_leg = {int(leg_of_slot[s]): s for s in range(n - 2)}
        for e in accepted:
            if w1[e]:
                total += 1
                slot_counts[slot_of_leg[e]] += 1
        util[t] = total
    return {
        "slot_counts": slot_counts,
        "handle_deg": handle_deg,
        "util_legs": util,
        "opt_legs": n - 2,
    }
