# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled simulation kernels: the behavioral twin of ``_pure``.

Same splitmix64 streams, same integer state machines, identical outputs;
only the execution speed differs. Any divergence from the pure module is a
bug, and the cross-implementation tests assert exact equality.
"""

import numpy as np

from libc.stdint cimport int8_t, int32_t, int64_t, uint8_t, uint64_t
from libc.stdlib cimport free, malloc, qsort
from libc.string cimport memset

IMPLEMENTATION = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15
cdef uint64_t MIX_A = 0xBF58476D1CE4E5B9
cdef uint64_t MIX_B = 0x94D049BB133111EB
cdef uint64_t SCHEDULE_TAG = 0x5343484544554C45
cdef uint64_t PARTITION_TAG = 0x504152544954494E
cdef uint64_t BROOM_TAG = 0x42524F4F4D544147

cdef int SENTINEL = 1 << 30


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    x ^= x >> 30
    x *= MIX_A
    x ^= x >> 27
    x *= MIX_B
    x ^= x >> 31
    return x


cdef inline uint64_t stream_value(uint64_t seed, uint64_t index) noexcept nogil:
    return mix64(seed + (index + 1) * GOLDEN)


cdef inline uint64_t trial_seed(uint64_t master, uint64_t index) noexcept nogil:
    return mix64(master ^ index)


cdef inline uint64_t substream(uint64_t tseed, uint64_t tag) noexcept nogil:
    return mix64(tseed ^ tag)


cdef struct TimeId:
    uint64_t t
    int32_t elem


cdef int cmp_timeid(const void *pa, const void *pb) noexcept nogil:
    cdef TimeId *a = <TimeId *> pa
    cdef TimeId *b = <TimeId *> pb
    if a.t < b.t:
        return -1
    if a.t > b.t:
        return 1
    if a.elem < b.elem:
        return -1
    if a.elem > b.elem:
        return 1
    return 0


cdef struct KeyId:
    uint64_t key
    int32_t ident


cdef int cmp_keyid(const void *pa, const void *pb) noexcept nogil:
    cdef KeyId *a = <KeyId *> pa
    cdef KeyId *b = <KeyId *> pb
    if a.key < b.key:
        return -1
    if a.key > b.key:
        return 1
    if a.ident < b.ident:
        return -1
    if a.ident > b.ident:
        return 1
    return 0


cdef int cmp_keyid_by_ident(const void *pa, const void *pb) noexcept nogil:
    cdef KeyId *a = <KeyId *> pa
    cdef KeyId *b = <KeyId *> pb
    if a.ident < b.ident:
        return -1
    if a.ident > b.ident:
        return 1
    return 0


# ---------------------------------------------------------------------------
# Hat kernel
# ---------------------------------------------------------------------------


cdef struct HatState:
    int n
    uint8_t *samp_up
    uint8_t *samp_lo
    uint8_t *acc_up
    uint8_t *acc_lo
    uint8_t *arr_up
    uint8_t *arr_lo
    bint inf_sampled
    bint inf_accepted
    bint inf_arrived
    bint aa_exists
    bint have_first_aa
    uint64_t first_aa_time
    bint conn_raw
    int l_sa
    int minpos_xs
    bint exists_xa


cdef struct HatAudit:
    int64_t checks_a
    int64_t mismatch_a
    int64_t checks_b
    int64_t mismatch_b
    int64_t double_blocker
    int64_t obs1_mismatch
    int64_t scan_events
    int64_t aggregate_mismatch
    int64_t mem_checks
    int64_t mem_violations


cdef void hat_reset(HatState *s) noexcept nogil:
    memset(s.samp_up, 0, (s.n + 1) * sizeof(uint8_t))
    memset(s.samp_lo, 0, (s.n + 1) * sizeof(uint8_t))
    memset(s.acc_up, 0, (s.n + 1) * sizeof(uint8_t))
    memset(s.acc_lo, 0, (s.n + 1) * sizeof(uint8_t))
    memset(s.arr_up, 0, (s.n + 1) * sizeof(uint8_t))
    memset(s.arr_lo, 0, (s.n + 1) * sizeof(uint8_t))
    s.inf_sampled = False
    s.inf_accepted = False
    s.inf_arrived = False
    s.aa_exists = False
    s.have_first_aa = False
    s.first_aa_time = 0
    s.conn_raw = False
    s.l_sa = SENTINEL
    s.minpos_xs = SENTINEL
    s.exists_xa = False


cdef inline int hat_up_label(HatState *s, int i) noexcept nogil:
    if s.acc_up[i]:
        return 2
    if s.samp_up[i] and not (
        s.acc_lo[i] and (s.conn_raw or s.aa_exists or s.l_sa < i)
    ):
        return 1
    return 0


cdef inline int hat_lo_label(HatState *s, int i) noexcept nogil:
    if s.acc_lo[i]:
        return 2
    if s.samp_lo[i] and not (
        (s.samp_up[i] or s.acc_up[i])
        and (s.conn_raw or s.exists_xa or s.minpos_xs < i)
    ):
        return 1
    return 0


cdef inline int hat_inf_code(HatState *s) noexcept nogil:
    if s.inf_accepted:
        return 2
    if s.inf_sampled and not s.aa_exists:
        return 1
    return 0


cdef inline int hat_blocker_pos(HatState *s) noexcept nogil:
    # returns SENTINEL when unprotected
    if s.l_sa < SENTINEL and not (s.conn_raw or s.aa_exists):
        return s.l_sa
    return SENTINEL


cdef void hat_mark_sample(HatState *s, int elem) noexcept nogil:
    cdef int i
    if elem == 0:
        s.inf_sampled = True
        s.inf_arrived = True
        s.conn_raw = True
    elif elem <= s.n:
        s.samp_up[elem] = 1
        s.arr_up[elem] = 1
        if s.samp_lo[elem] and elem < s.minpos_xs:
            s.minpos_xs = elem
    else:
        i = elem - s.n
        s.samp_lo[i] = 1
        s.arr_lo[i] = 1
        if s.samp_up[i] and i < s.minpos_xs:
            s.minpos_xs = i


cdef inline bint hat_decide(HatState *s, int elem) noexcept nogil:
    cdef int i
    if elem == 0:
        return not s.aa_exists
    if elem <= s.n:
        i = elem
        return not (
            s.acc_lo[i] and (s.conn_raw or s.aa_exists or s.l_sa < i)
        )
    i = elem - s.n
    return not (
        (s.samp_up[i] or s.acc_up[i])
        and (s.conn_raw or s.exists_xa or s.minpos_xs < i)
    )


cdef void hat_apply(HatState *s, int elem, bint accept, uint64_t time) noexcept nogil:
    cdef int i
    if elem == 0:
        s.inf_arrived = True
        if accept:
            s.inf_accepted = True
            s.conn_raw = True
        return
    if elem <= s.n:
        i = elem
        s.arr_up[i] = 1
        if accept:
            s.acc_up[i] = 1
            if s.samp_lo[i] and i < s.minpos_xs:
                s.minpos_xs = i
            if s.acc_lo[i]:
                s.exists_xa = True
                if not s.aa_exists:
                    s.aa_exists = True
                    s.have_first_aa = True
                    s.first_aa_time = time
        return
    i = elem - s.n
    s.arr_lo[i] = 1
    if accept:
        s.acc_lo[i] = 1
        if s.samp_up[i]:
            s.exists_xa = True
            if i < s.l_sa:
                s.l_sa = i
        if s.acc_up[i]:
            s.exists_xa = True
            if not s.aa_exists:
                s.aa_exists = True
                s.have_first_aa = True
                s.first_aa_time = time


cdef void hat_check_lemmas(HatState *s, int elem, bint accept, HatAudit *a) noexcept nogil:
    cdef int i, blocker
    cdef bint predicted
    if elem == 0:
        return
    if elem <= s.n:
        i = elem
        if s.acc_lo[i] and not s.aa_exists and not s.conn_raw:
            a.checks_a += 1
            blocker = hat_blocker_pos(s)
            predicted = not (blocker < i)
            if predicted != accept:
                a.mismatch_a += 1
    else:
        i = elem - s.n
        if s.samp_up[i] and hat_up_label(s, i) == 1 and hat_blocker_pos(s) != SENTINEL:
            a.checks_b += 1
            if accept:
                a.mismatch_b += 1


cdef void hat_scan_audit(HatState *s, HatAudit *a) noexcept nogil:
    cdef int n = s.n
    cdef int i, up, lo
    cdef bint conn, aa, exists, violation, inf_in, ab_conn
    cdef int l_sa, minpos, blockers, full

    a.scan_events += 1
    conn = s.inf_sampled or s.inf_accepted
    aa = False
    exists = False
    l_sa = SENTINEL
    minpos = SENTINEL
    for i in range(1, n + 1):
        if s.acc_up[i] and s.acc_lo[i]:
            aa = True
        if s.samp_up[i] and s.acc_lo[i] and i < l_sa:
            l_sa = i
        if (s.samp_up[i] or s.acc_up[i]) and s.samp_lo[i] and i < minpos:
            minpos = i
        if (s.samp_up[i] or s.acc_up[i]) and s.acc_lo[i]:
            exists = True
    if (
        conn != s.conn_raw or aa != s.aa_exists or l_sa != s.l_sa
        or minpos != s.minpos_xs or exists != s.exists_xa
    ):
        a.aggregate_mismatch += 1

    a.mem_checks += 1
    inf_in = hat_inf_code(s) != 0
    blockers = 0
    full = 0
    violation = False
    ab_conn = inf_in
    for i in range(1, n + 1):
        up = hat_up_label(s, i)
        lo = hat_lo_label(s, i)
        if up == 1 and lo == 2:
            blockers += 1
        if up != 0 and lo != 0:
            full += 1
        if (up == 2) != (s.acc_up[i] != 0):
            violation = True
        if (lo == 2) != (s.acc_lo[i] != 0):
            violation = True
    if blockers > 1:
        a.double_blocker += 1
    if full + (1 if inf_in else 0) > 1:
        violation = True
    if s.inf_accepted and hat_inf_code(s) != 2:
        violation = True
    ab_conn = inf_in or full > 0
    for i in range(1, n + 1):
        up = hat_up_label(s, i)
        lo = hat_lo_label(s, i)
        if s.arr_up[i] and up == 0 and not (lo != 0 and ab_conn):
            violation = True
        if s.arr_lo[i] and lo == 0 and not (up != 0 and ab_conn):
            violation = True
    if s.inf_arrived and not inf_in and not ab_conn:
        violation = True
    if violation:
        a.mem_violations += 1


cdef class _HatBuffers:
    cdef uint8_t *mem
    cdef TimeId *events
    cdef int n

    def __cinit__(self, int n):
        self.n = n
        self.mem = <uint8_t *> malloc(6 * (n + 1) * sizeof(uint8_t))
        self.events = <TimeId *> malloc((2 * n + 1) * sizeof(TimeId))
        if self.mem == NULL or self.events == NULL:
            raise MemoryError

    def __dealloc__(self):
        if self.mem != NULL:
            free(self.mem)
        if self.events != NULL:
            free(self.events)


def hat_supergreedy_batch(
    int n,
    long long trials,
    object master_seed,
    object t_threshold,
    object alpha_num,
    object alpha_den,
    int audit_every=64,
    long long start_trial=0,
    tracked_elems=None,
):
    cdef uint64_t master = <uint64_t> (int(master_seed) & ((1 << 64) - 1))
    cdef uint64_t thr = <uint64_t> int(t_threshold)
    cdef int64_t a_num = int(alpha_num)
    cdef int64_t a_den = int(alpha_den)

    cdef bint want_tracked = tracked_elems is not None
    tracked_slot = np.full(2 * n + 1, -1, dtype=np.int64)
    if want_tracked:
        for jj, ee in enumerate(tracked_elems):
            tracked_slot[int(ee)] = jj
        tracked = np.zeros((trials, len(tracked_elems)), dtype=np.uint8)
    else:
        tracked = np.zeros((1, 1), dtype=np.uint8)
    cdef int64_t[::1] tslot_v = tracked_slot
    cdef uint8_t[:, ::1] tracked_v = tracked

    loss = np.zeros(trials, dtype=np.uint8)
    inf_sampled = np.zeros(trials, dtype=np.uint8)
    aa_before_inf = np.zeros(trials, dtype=np.uint8)
    t_inf = np.zeros(trials, dtype=np.uint64)
    util = np.zeros(trials, dtype=np.int64)
    n_accepted = np.zeros(trials, dtype=np.int32)
    accept_counts = np.zeros(2 * n + 1, dtype=np.int64)
    weights = np.zeros(2 * n + 1, dtype=np.int64)

    cdef uint8_t[::1] loss_v = loss
    cdef uint8_t[::1] infs_v = inf_sampled
    cdef uint8_t[::1] aab_v = aa_before_inf
    cdef uint64_t[::1] tinf_v = t_inf
    cdef int64_t[::1] util_v = util
    cdef int32_t[::1] nacc_v = n_accepted
    cdef int64_t[::1] acc_counts_v = accept_counts
    cdef int64_t[::1] w_v = weights

    cdef int i
    w_v[0] = 6 * (n + 1) * (n + 1) * a_num
    for i in range(1, n + 1):
        w_v[i] = 3 * a_den * (2 * n - i + 2)
        w_v[n + i] = a_den * (3 * n - i + 3)

    cdef _HatBuffers buf = _HatBuffers(n)
    cdef HatState s
    s.n = n
    s.samp_up = buf.mem
    s.samp_lo = buf.mem + (n + 1)
    s.acc_up = buf.mem + 2 * (n + 1)
    s.acc_lo = buf.mem + 3 * (n + 1)
    s.arr_up = buf.mem + 4 * (n + 1)
    s.arr_lo = buf.mem + 5 * (n + 1)

    cdef HatAudit audit
    memset(&audit, 0, sizeof(HatAudit))

    cdef long long t
    cdef int m_total = 2 * n + 1
    cdef int elem, k, n_post, count
    cdef uint64_t seed, tm, ts
    cdef int64_t total
    cdef bint accept, expected_loss, aa_before

    with nogil:
        for t in range(trials):
            ts = trial_seed(master, <uint64_t> (start_trial + t))
            seed = substream(ts, SCHEDULE_TAG)
            hat_reset(&s)
            for elem in range(m_total):
                buf.events[elem].t = stream_value(seed, <uint64_t> elem)
                buf.events[elem].elem = elem
            tinf_v[t] = buf.events[0].t
            n_post = 0
            for elem in range(m_total):
                if buf.events[elem].t <= thr:
                    hat_mark_sample(&s, elem)
                else:
                    buf.events[n_post] = buf.events[elem]
                    n_post += 1
            qsort(buf.events, n_post, sizeof(TimeId), cmp_timeid)
            hat_scan_audit(&s, &audit)

            total = 0
            count = 0
            for k in range(n_post):
                elem = buf.events[k].elem
                tm = buf.events[k].t
                accept = hat_decide(&s, elem)
                hat_check_lemmas(&s, elem, accept, &audit)
                hat_apply(&s, elem, accept, tm)
                if accept:
                    total += w_v[elem]
                    count += 1
                    acc_counts_v[elem] += 1
                    if want_tracked and tslot_v[elem] >= 0:
                        tracked_v[t, tslot_v[elem]] = 1
                if audit_every > 0 and (k + 1) % audit_every == 0:
                    hat_scan_audit(&s, &audit)
            hat_scan_audit(&s, &audit)

            infs_v[t] = 1 if s.inf_sampled else 0
            loss_v[t] = 0 if s.inf_accepted else 1
            aa_before = s.aa_exists and s.have_first_aa and s.first_aa_time < tinf_v[t]
            expected_loss = s.inf_sampled or aa_before
            if (loss_v[t] != 0) != expected_loss:
                audit.obs1_mismatch += 1
            aab_v[t] = 1 if aa_before else 0
            util_v[t] = total
            nacc_v[t] = count

    return {
        "loss": loss,
        "inf_sampled": inf_sampled,
        "aa_before_inf": aa_before_inf,
        "t_inf": t_inf,
        "util_scaled": util,
        "n_accepted": n_accepted,
        "accept_counts": accept_counts,
        "tracked": tracked if tracked_elems is not None else None,
        "weight_scale": 6 * (n + 1) * int(alpha_num),
        "audit": {
            "checks_a": audit.checks_a,
            "mismatch_a": audit.mismatch_a,
            "checks_b": audit.checks_b,
            "mismatch_b": audit.mismatch_b,
            "double_blocker": audit.double_blocker,
            "obs1_mismatch": audit.obs1_mismatch,
            "scan_events": audit.scan_events,
            "aggregate_mismatch": audit.aggregate_mismatch,
            "mem_checks": audit.mem_checks,
            "mem_violations": audit.mem_violations,
        },
    }


def hat_supergreedy_trace(int n, object master_seed, long long trial_index, object t_threshold):
    cdef uint64_t master = <uint64_t> (int(master_seed) & ((1 << 64) - 1))
    cdef uint64_t thr = <uint64_t> int(t_threshold)
    cdef int m_total = 2 * n + 1

    times = np.zeros(m_total, dtype=np.uint64)
    elem_out = np.zeros(m_total, dtype=np.int32)
    time_out = np.zeros(m_total, dtype=np.uint64)
    decision = np.zeros(m_total, dtype=np.int8)
    claw_code = np.zeros((m_total, n), dtype=np.int8)
    inf_code = np.zeros(m_total, dtype=np.int8)

    cdef uint64_t[::1] times_v = times
    cdef int32_t[::1] elem_v = elem_out
    cdef uint64_t[::1] tout_v = time_out
    cdef int8_t[::1] dec_v = decision
    cdef int8_t[:, ::1] code_v = claw_code
    cdef int8_t[::1] inf_v = inf_code

    cdef _HatBuffers buf = _HatBuffers(n)
    cdef HatState s
    s.n = n
    s.samp_up = buf.mem
    s.samp_lo = buf.mem + (n + 1)
    s.acc_up = buf.mem + 2 * (n + 1)
    s.acc_lo = buf.mem + 3 * (n + 1)
    s.arr_up = buf.mem + 4 * (n + 1)
    s.arr_lo = buf.mem + 5 * (n + 1)

    cdef uint64_t ts = trial_seed(master, <uint64_t> trial_index)
    cdef uint64_t seed = substream(ts, SCHEDULE_TAG)
    cdef int elem, k, i
    cdef uint64_t tm
    cdef bint accept

    hat_reset(&s)
    for elem in range(m_total):
        times_v[elem] = stream_value(seed, <uint64_t> elem)
        buf.events[elem].t = times_v[elem]
        buf.events[elem].elem = elem
    qsort(buf.events, m_total, sizeof(TimeId), cmp_timeid)

    for k in range(m_total):
        elem = buf.events[k].elem
        tm = buf.events[k].t
        if tm <= thr:
            hat_mark_sample(&s, elem)
            dec_v[k] = 0
        else:
            accept = hat_decide(&s, elem)
            hat_apply(&s, elem, accept, tm)
            dec_v[k] = 1 if accept else 2
        elem_v[k] = elem
        tout_v[k] = tm
        for i in range(1, n + 1):
            code_v[k, i - 1] = <int8_t> (hat_up_label(&s, i) * 3 + hat_lo_label(&s, i))
        inf_v[k] = <int8_t> hat_inf_code(&s)

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
    int n,
    object rank_of_elem,
    long long trials,
    object master_seed,
    object t_threshold,
    long long start_trial=0,
    int chunk=8192,
):
    cdef uint64_t master = <uint64_t> (int(master_seed) & ((1 << 64) - 1))
    cdef uint64_t thr = <uint64_t> int(t_threshold)
    order_arr = np.argsort(np.asarray(rank_of_elem), kind="stable").astype(np.int32)
    out = np.full(trials, -1, dtype=np.int32)
    cdef int32_t[::1] order_v = order_arr
    cdef int32_t[::1] out_v = out
    cdef long long t
    cdef int j, elem, best
    cdef uint64_t seed, tm, prev_min, ts
    cdef bint have

    with nogil:
        for t in range(trials):
            ts = trial_seed(master, <uint64_t> (start_trial + t))
            seed = substream(ts, SCHEDULE_TAG)
            prev_min = 0
            have = False
            best = -1
            for j in range(n):
                elem = order_v[j]
                tm = stream_value(seed, <uint64_t> elem)
                if (not have) or tm < prev_min:
                    if tm > thr:
                        best = elem
                    prev_min = tm
                    have = True
            out_v[t] = best
    return out


# ---------------------------------------------------------------------------
# Parallel-Dynkin partition kernels
# ---------------------------------------------------------------------------


def partition_dynkin_batch(
    object n_vertices,
    object edge_u,
    object edge_v,
    object weights_scaled,
    long long trials,
    object master_seed,
    object t_threshold,
    object part_of_edge=None,
    long long start_trial=0,
    tracked_elems=None,
):
    cdef uint64_t master = <uint64_t> (int(master_seed) & ((1 << 64) - 1))
    cdef uint64_t thr = <uint64_t> int(t_threshold)
    cdef int nv = int(n_vertices)

    eu = np.ascontiguousarray(edge_u, dtype=np.int64)
    ev = np.ascontiguousarray(edge_v, dtype=np.int64)
    ws = np.ascontiguousarray(weights_scaled, dtype=np.int64)
    cdef int m = len(eu)
    rank_order = np.lexsort((np.arange(m), -ws)).astype(np.int64)
    counts = np.zeros(m, dtype=np.int64)
    util = np.zeros(trials, dtype=np.int64)

    fixed = part_of_edge is not None
    if fixed:
        part_fixed = np.ascontiguousarray(part_of_edge, dtype=np.int64)
    else:
        part_fixed = np.zeros(m, dtype=np.int64)

    want_tracked_py = tracked_elems is not None
    tracked_slot = np.full(m, -1, dtype=np.int64)
    if want_tracked_py:
        for jj, ee in enumerate(tracked_elems):
            tracked_slot[int(ee)] = jj
        tracked = np.zeros((trials, len(tracked_elems)), dtype=np.uint8)
    else:
        tracked = np.zeros((1, 1), dtype=np.uint8)

    times = np.zeros(m, dtype=np.uint64)
    keys = np.zeros(nv, dtype=np.uint64)
    part = np.zeros(m, dtype=np.int64)
    pm = np.zeros(nv + 1, dtype=np.uint64)
    acc = np.zeros(nv + 1, dtype=np.int64)
    stamp = np.full(nv + 1, -1, dtype=np.int64)
    seen = np.zeros(nv + 1, dtype=np.uint8)
    touched = np.zeros(nv + 1, dtype=np.int64)

    cdef int64_t[::1] eu_v = eu
    cdef int64_t[::1] ev_v = ev
    cdef int64_t[::1] ws_v = ws
    cdef int64_t[::1] order_v = rank_order
    cdef int64_t[::1] counts_v = counts
    cdef int64_t[::1] util_v = util
    cdef int64_t[::1] partf_v = part_fixed
    cdef uint64_t[::1] times_v = times
    cdef uint64_t[::1] keys_v = keys
    cdef int64_t[::1] part_v = part
    cdef uint64_t[::1] pm_v = pm
    cdef int64_t[::1] acc_v = acc
    cdef int64_t[::1] stamp_v = stamp
    cdef uint8_t[::1] seen_v = seen
    cdef int64_t[::1] touched_v = touched
    cdef int64_t[::1] tslot_v = tracked_slot
    cdef uint8_t[:, ::1] tracked_v = tracked
    cdef bint want_tracked = want_tracked_py

    cdef bint is_fixed = fixed
    cdef long long t
    cdef int e, j, v, n_touched, p, a
    cdef uint64_t seed, tm, ku, kv, ts
    cdef int64_t total

    with nogil:
        for t in range(trials):
            ts = trial_seed(master, <uint64_t> (start_trial + t))
            seed = substream(ts, SCHEDULE_TAG)
            for e in range(m):
                times_v[e] = stream_value(seed, <uint64_t> e)
            if is_fixed:
                for e in range(m):
                    part_v[e] = partf_v[e]
            else:
                seed = substream(ts, PARTITION_TAG)
                for v in range(nv):
                    keys_v[v] = stream_value(seed, <uint64_t> v)
                for e in range(m):
                    ku = keys_v[eu_v[e]]
                    kv = keys_v[ev_v[e]]
                    part_v[e] = eu_v[e] if (ku < kv or (ku == kv and eu_v[e] < ev_v[e])) else ev_v[e]
            n_touched = 0
            for j in range(m):
                e = <int> order_v[j]
                p = <int> part_v[e]
                tm = times_v[e]
                if stamp_v[p] != t + 1:
                    stamp_v[p] = t + 1
                    seen_v[p] = 0
                    acc_v[p] = -1
                    touched_v[n_touched] = p
                    n_touched += 1
                if seen_v[p] == 0 or tm < pm_v[p]:
                    if tm > thr:
                        acc_v[p] = e
                    pm_v[p] = tm
                    seen_v[p] = 1
            total = 0
            for j in range(n_touched):
                a = <int> acc_v[touched_v[j]]
                if a >= 0:
                    counts_v[a] += 1
                    total += ws_v[a]
                    if want_tracked and tslot_v[a] >= 0:
                        tracked_v[t, tslot_v[a]] = 1
            util_v[t] = total
    return {"accept_counts": counts, "util_scaled": util, "tracked": tracked if want_tracked_py else None}


def broom_batch(
    object n_vertices,
    long long trials,
    object master_seed,
    object t_threshold,
    bint single_part=False,
    long long start_trial=0,
):
    cdef int n = int(n_vertices)
    if n < 4 or n % 2:
        raise ValueError("broom needs an even vertex count >= 4")
    cdef uint64_t master = <uint64_t> (int(master_seed) & ((1 << 64) - 1))
    cdef uint64_t thr = <uint64_t> int(t_threshold)
    cdef int m = n * (n - 1) // 2
    cdef int half = (n - 2) // 2

    edge_u = np.zeros(m, dtype=np.int64)
    edge_v = np.zeros(m, dtype=np.int64)
    eidx = np.full((n, n), -1, dtype=np.int64)
    k = 0
    for u in range(n):
        for v in range(u + 1, n):
            edge_u[k] = u
            edge_v[k] = v
            eidx[u, v] = k
            eidx[v, u] = k
            k += 1

    slot_counts = np.zeros(n - 2, dtype=np.int64)
    handle_deg = np.zeros(trials, dtype=np.int32)
    util = np.zeros(trials, dtype=np.int64)

    times = np.zeros(m, dtype=np.uint64)
    keys = np.zeros(n, dtype=np.uint64)
    part = np.zeros(m, dtype=np.int64)
    w1 = np.zeros(m, dtype=np.uint8)
    slot_of_edge = np.full(m, -1, dtype=np.int64)
    rank_order = np.zeros(m, dtype=np.int64)
    pm = np.zeros(n + 1, dtype=np.uint64)
    acc = np.zeros(n + 1, dtype=np.int64)
    stamp = np.full(n + 1, -1, dtype=np.int64)
    seen = np.zeros(n + 1, dtype=np.uint8)
    touched = np.zeros(n + 1, dtype=np.int64)

    cdef int64_t[::1] eu_v = edge_u
    cdef int64_t[::1] ev_v = edge_v
    cdef int64_t[:, ::1] eidx_v = eidx
    cdef int64_t[::1] slots_v = slot_counts
    cdef int32_t[::1] hdeg_v = handle_deg
    cdef int64_t[::1] util_v = util
    cdef uint64_t[::1] times_v = times
    cdef uint64_t[::1] keys_v = keys
    cdef int64_t[::1] part_v = part
    cdef uint8_t[::1] w1_v = w1
    cdef int64_t[::1] soe_v = slot_of_edge
    cdef int64_t[::1] order_v = rank_order
    cdef uint64_t[::1] pm_v = pm
    cdef int64_t[::1] acc_v = acc
    cdef int64_t[::1] stamp_v = stamp
    cdef uint8_t[::1] seen_v = seen
    cdef int64_t[::1] touched_v = touched

    cdef KeyId *order_buf = <KeyId *> malloc(n * sizeof(KeyId))
    if order_buf == NULL:
        raise MemoryError

    cdef long long t
    cdef int e, j, hu, hv, hp, deg, z, n_others, s_idx, pos, n_ones, n_touched, p, a
    cdef uint64_t seed, bseed, tm, ku, kv, ts
    cdef int64_t handle, total

    try:
        with nogil:
            for t in range(trials):
                ts = trial_seed(master, <uint64_t> (start_trial + t))
                bseed = substream(ts, BROOM_TAG)
                handle = <int64_t> (stream_value(bseed, 0) % <uint64_t> m)
                hu = <int> eu_v[handle]
                hv = <int> ev_v[handle]
                n_others = 0
                for z in range(n):
                    if z != hu and z != hv:
                        order_buf[n_others].key = stream_value(bseed, <uint64_t> (1 + z))
                        order_buf[n_others].ident = z
                        n_others += 1
                qsort(order_buf, n_others, sizeof(KeyId), cmp_keyid)
                # X = first half sorted by vertex id; Y = rest. Slots: X spokes
                # ascending then Y spokes ascending. Re-sort each side by id.
                qsort(order_buf, half, sizeof(KeyId), cmp_keyid_by_ident)
                qsort(order_buf + half, n_others - half, sizeof(KeyId), cmp_keyid_by_ident)

                for e in range(m):
                    w1_v[e] = 0
                    soe_v[e] = -1
                for s_idx in range(half):
                    e = <int> eidx_v[hu, order_buf[s_idx].ident]
                    w1_v[e] = 1
                    soe_v[e] = s_idx
                for s_idx in range(half, n_others):
                    e = <int> eidx_v[hv, order_buf[s_idx].ident]
                    w1_v[e] = 1
                    soe_v[e] = s_idx

                if single_part:
                    for e in range(m):
                        part_v[e] = 0
                else:
                    seed = substream(ts, PARTITION_TAG)
                    for z in range(n):
                        keys_v[z] = stream_value(seed, <uint64_t> z)
                    for e in range(m):
                        ku = keys_v[eu_v[e]]
                        kv = keys_v[ev_v[e]]
                        part_v[e] = eu_v[e] if (ku < kv or (ku == kv and eu_v[e] < ev_v[e])) else ev_v[e]

                hp = <int> part_v[handle]
                deg = -1
                for e in range(m):
                    if part_v[e] == hp and (
                        eu_v[e] == hu or ev_v[e] == hu or eu_v[e] == hv or ev_v[e] == hv
                    ):
                        deg += 1
                        if eu_v[e] == hu and ev_v[e] == hv:
                            deg += 1
                hdeg_v[t] = deg

                seed = substream(ts, SCHEDULE_TAG)
                for e in range(m):
                    times_v[e] = stream_value(seed, <uint64_t> e)

                n_ones = 0
                for e in range(m):
                    if w1_v[e]:
                        order_v[n_ones] = e
                        n_ones += 1
                pos = n_ones
                for e in range(m):
                    if not w1_v[e]:
                        order_v[pos] = e
                        pos += 1

                n_touched = 0
                for j in range(m):
                    e = <int> order_v[j]
                    p = <int> part_v[e]
                    tm = times_v[e]
                    if stamp_v[p] != t + 1:
                        stamp_v[p] = t + 1
                        seen_v[p] = 0
                        acc_v[p] = -1
                        touched_v[n_touched] = p
                        n_touched += 1
                    if seen_v[p] == 0 or tm < pm_v[p]:
                        if tm > thr:
                            acc_v[p] = e
                        pm_v[p] = tm
                        seen_v[p] = 1
                total = 0
                for j in range(n_touched):
                    a = <int> acc_v[touched_v[j]]
                    if a >= 0 and w1_v[a]:
                        total += 1
                        slots_v[soe_v[a]] += 1
                util_v[t] = total
    finally:
        free(order_buf)

    return {
        "slot_counts": slot_counts,
        "handle_deg": handle_deg,
        "util_legs": util,
        "opt_legs": n - 2,
    }

