"""The hat construction and its claw-level runtime verification.

A hat on n+2 vertices is n triangles sharing one heavy edge. Claw i is the
pair (upper_i, lower_i); at any time each claw is in one of nine states
from {-, A, S}^2 read off the algorithm's memory: A for accepted edges, S
for stored samples, - for everything else. The lemma audits in this module
reconstruct those states from trace snapshots alone, independently of how
the trace was produced (generic engine or the specialized kernel).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .engine import Decision, RunTrace, TIME_DEN, TraceEvent
from .errors import FrameworkFaultError, ParameterError
from .matroids import GraphicMatroid, total_weight
from .framework import FrameworkState, validate_memory

LOSS_META_KEY = "hat"


@dataclass(frozen=True)
class HatInstance:
    """Hat layout: element 0 is the heavy shared edge, 1..n the upper edges
    (left to right), n+1..2n the lower edges."""

    n: int
    alpha: Fraction

    @property
    def infinity_id(self) -> int:
        return 0

    def upper_id(self, claw: int) -> int:
        return claw

    def lower_id(self, claw: int) -> int:
        return self.n + claw

    def claw_of(self, elem: int) -> int | None:
        """1-based claw index, or None for the shared edge."""
        if elem == 0:
            return None
        return elem if elem <= self.n else elem - self.n

    def is_upper(self, elem: int) -> bool:
        return 1 <= elem <= self.n


def build_hat(n: int, alpha) -> tuple[GraphicMatroid, list[Fraction], HatInstance]:
    """Hat on n+2 vertices with weights evenly spaced inside the alpha
    windows: uppers in (1/(2a), 1/a), lowers in (1/(3a), 1/(2a)), strictly
    decreasing left to right, shared edge weight n+1.
    """
    alpha = Fraction(alpha)
    if n < 1:
        raise ParameterError("hat needs at least one claw")
    if alpha <= 1:
        raise ParameterError("hat weight parameter must exceed 1")
    # vertices: a=0, b=1, spokes v_i = 1+i
    edges = [(0, 1)]
    edges += [(0, 1 + i) for i in range(1, n + 1)]
    edges += [(1, 1 + i) for i in range(1, n + 1)]
    matroid = GraphicMatroid(n + 2, edges)
    weights = [Fraction(n + 1)]
    weights += [Fraction(2 * n - i + 2, 2 * (n + 1)) / alpha for i in range(1, n + 1)]
    weights += [Fraction(3 * n - i + 3, 6 * (n + 1)) / alpha for i in range(1, n + 1)]
    return matroid, weights, HatInstance(n, alpha)


def hat_optimum(instance: HatInstance, weights: list[Fraction]) -> tuple[frozenset, Fraction]:
    """The max-weight basis of any hat: the shared edge plus all uppers."""
    opt = frozenset([instance.infinity_id]) | frozenset(range(1, instance.n + 1))
    return opt, total_weight(weights, opt)


def claw_states(accepted: frozenset, memory: frozenset, samples: frozenset, instance: HatInstance) -> list[str]:
    """Two-character state per claw (index 1..n -> list position claw-1)."""
    states = []
    for i in range(1, instance.n + 1):
        chars = []
        for elem in (instance.upper_id(i), instance.lower_id(i)):
            if elem in accepted:
                chars.append("A")
            elif elem in memory and elem in samples:
                chars.append("S")
            else:
                chars.append("-")
        states.append("".join(chars))
    return states


def classify_claws(trace: RunTrace, at_time, instance: HatInstance) -> list[str]:
    """Claw states at a given time, reconstructed from the trace snapshot."""
    if isinstance(at_time, int):
        t_u64 = at_time
    else:
        frac = Fraction(at_time)
        t_u64 = (frac.numerator * TIME_DEN) // frac.denominator
    acc: frozenset = frozenset()
    mem: frozenset = frozenset()
    samples = set()
    for ev, a, m in trace.snapshots():
        if ev.time_u64 > t_u64:
            break
        acc, mem = a, m
        if ev.decision is Decision.SAMPLE:
            samples.add(ev.elem)
    return claw_states(acc, mem, frozenset(samples), instance)


def find_blocker(states: list[str]) -> int | None:
    """Index (1-based) of the unique SA claw, None if there is none."""
    hits = [i + 1 for i, st in enumerate(states) if st == "SA"]
    if len(hits) > 1:
        raise FrameworkFaultError(f"two blockers present at claws {hits}")
    return hits[0] if hits else None


def is_loss(trace: RunTrace, instance: HatInstance) -> bool:
    """The run loses iff the shared heavy edge was not accepted."""
    return instance.infinity_id not in trace.accepted


@dataclass
class LemmaAuditReport:
    """Event-level audit of the blocker lemmas and memory invariants."""

    events_checked: int = 0
    checks_a: int = 0
    mismatches_a: int = 0
    checks_b: int = 0
    mismatches_b: int = 0
    double_blocker_events: int = 0
    memory_checks: int = 0
    memory_violations: int = 0
    loss: bool = False
    loss_matches_claw_condition: bool = True
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.mismatches_a == 0
            and self.mismatches_b == 0
            and self.double_blocker_events == 0
            and self.memory_violations == 0
            and self.loss_matches_claw_condition
        )


def verify_structural_lemmas(
    trace: RunTrace,
    instance: HatInstance,
    matroid: GraphicMatroid | None = None,
    weights: list[Fraction] | None = None,
    check_memory: bool = True,
    max_counterexamples: int = 5,
) -> LemmaAuditReport:
    """Check, event by event, that the trace obeys the claw lemmas.

    (a) When the upper edge of a (-A) claw arrives with no fully-accepted
        claw and the heavy edge outside memory, it is accepted iff no SA
        claw sits to its left.
    (b) When the lower edge of an (S-) claw arrives while an SA claw is
        held, it is rejected.

    Also verifies at every event that at most one SA claw exists, that the
    memory invariants hold, and at the end that the loss condition matches
    "fully-accepted claw before the heavy edge, or heavy edge sampled".
    """
    if matroid is None or weights is None:
        matroid, weights, _ = build_hat(instance.n, instance.alpha)
    report = LemmaAuditReport()
    samples: set = set()
    arrived: set = set()
    prev_acc: frozenset = frozenset()
    prev_mem: frozenset = frozenset()
    first_aa_time: int | None = None
    t_inf: int | None = None
    inf_sampled = False

    def note(kind, ev_index, ev):
        if len(report.counterexamples) < max_counterexamples:
            report.counterexamples.append((kind, ev_index, ev.elem, ev.time_u64 / TIME_DEN))

    for idx, (ev, acc, mem) in enumerate(trace.snapshots()):
        if ev.elem == instance.infinity_id:
            t_inf = ev.time_u64
            if ev.decision is Decision.SAMPLE:
                inf_sampled = True
        if ev.decision is not Decision.SAMPLE:
            report.events_checked += 1
            states_prev = claw_states(prev_acc, prev_mem, frozenset(samples), instance)
            claw = instance.claw_of(ev.elem)
            if claw is not None:
                aa_exists = "AA" in states_prev
                inf_in_mem = instance.infinity_id in prev_mem
                if (
                    instance.is_upper(ev.elem)
                    and states_prev[claw - 1] == "-A"
                    and not aa_exists
                    and not inf_in_mem
                ):
                    report.checks_a += 1
                    blocked = any(states_prev[j - 1] == "SA" for j in range(1, claw))
                    predicted = not blocked
                    actual = ev.decision is Decision.ACCEPT
                    if predicted != actual:
                        report.mismatches_a += 1
                        note("lemma-a", idx, ev)
                if (
                    not instance.is_upper(ev.elem)
                    and states_prev[claw - 1] == "S-"
                    and "SA" in states_prev
                ):
                    report.checks_b += 1
                    if ev.decision is Decision.ACCEPT:
                        report.mismatches_b += 1
                        note("lemma-b", idx, ev)
        else:
            samples.add(ev.elem)
        arrived.add(ev.elem)

        states_now = claw_states(acc, mem, frozenset(samples), instance)
        if sum(1 for st in states_now if st == "SA") > 1:
            report.double_blocker_events += 1
            note("double-blocker", idx, ev)
        if first_aa_time is None and "AA" in states_now:
            first_aa_time = ev.time_u64
        if check_memory:
            report.memory_checks += 1
            state = FrameworkState(matroid, weights, trace.t_threshold, set(samples), sorted(acc), set(mem))
            mem_report = validate_memory(state, matroid, arrived)
            if not mem_report.ok:
                report.memory_violations += 1
                note(f"memory:{','.join(mem_report.violations)}", idx, ev)
        prev_acc, prev_mem = acc, mem

    report.loss = is_loss(trace, instance)
    expected_loss = inf_sampled or (
        first_aa_time is not None and t_inf is not None and first_aa_time < t_inf
    )
    report.loss_matches_claw_condition = report.loss == expected_loss
    if not report.loss_matches_claw_condition:
        report.counterexamples.append(("loss-condition", -1, instance.infinity_id, None))
    return report


# ---------------------------------------------------------------------------
# Kernel bridge
# ---------------------------------------------------------------------------


def kernel_trace_to_runtrace(instance: HatInstance, weights: list[Fraction], raw: dict, t_threshold: int) -> RunTrace:
    """Convert the kernel's compact event log into an engine RunTrace."""
    n = instance.n
    trace = RunTrace(n=2 * n + 1, t_threshold=t_threshold, meta={"instance": f"hat:{n}:{instance.alpha}"})
    decisions = {0: Decision.SAMPLE, 1: Decision.ACCEPT, 2: Decision.REJECT}
    prev_mem: set = set()
    for k in range(len(raw["elem"])):
        mem = set()
        if raw["inf_code"][k]:
            mem.add(instance.infinity_id)
        codes = raw["claw_code"][k]
        for i in range(1, n + 1):
            code = int(codes[i - 1])
            if code // 3:
                mem.add(instance.upper_id(i))
            if code % 3:
                mem.add(instance.lower_id(i))
        elem = int(raw["elem"][k])
        trace.events.append(
            TraceEvent(
                time_u64=int(raw["time"][k]),
                elem=elem,
                weight=weights[elem],
                decision=decisions[int(raw["decision"][k])],
                mem_added=tuple(sorted(mem - prev_mem)),
                mem_removed=tuple(sorted(prev_mem - mem)),
            )
        )
        prev_mem = mem
    return trace


@dataclass
class HatBatchResult:
    """Aggregated outcome of a batch of hat trials (one n, one alpha)."""

    n: int
    alpha: Fraction
    trials: int
    losses: int
    losses_inf_after_t: int
    trials_inf_after_t: int
    mean_ratio: Fraction
    audit: dict
    t_inf: np.ndarray
    loss_flags: np.ndarray

    @property
    def loss_rate(self) -> float:
        return self.losses / self.trials

    @property
    def conditional_loss_rate(self) -> float:
        if not self.trials_inf_after_t:
            return float("nan")
        return self.losses_inf_after_t / self.trials_inf_after_t


def run_hat_batch(
    n: int,
    alpha,
    trials: int,
    master_seed: int,
    t_threshold: int,
    audit_every: int = 64,
    start_trial: int = 0,
) -> HatBatchResult:
    """Supergreedy-on-hat trials through the selected kernel, with exact
    utility accounting and pooled lemma audits."""
    alpha = Fraction(alpha)
    raw = _kernels.hat_supergreedy_batch(
        n,
        trials,
        master_seed,
        t_threshold,
        alpha.numerator,
        alpha.denominator,
        audit_every=audit_every,
        start_trial=start_trial,
    )
    _, weights, instance = build_hat(n, alpha)
    _, opt_utility = hat_optimum(instance, weights)
    scale = int(raw["weight_scale"])
    total_util = int(np.sum(raw["util_scaled"]))
    mean_ratio = Fraction(total_util, scale) / (opt_utility * trials)
    inf_after = raw["inf_sampled"] == 0
    return HatBatchResult(
        n=n,
        alpha=alpha,
        trials=trials,
        losses=int(np.sum(raw["loss"])),
        losses_inf_after_t=int(np.sum(raw["loss"][inf_after])),
        trials_inf_after_t=int(np.sum(inf_after)),
        mean_ratio=mean_ratio,
        audit=raw["audit"],
        t_inf=raw["t_inf"],
        loss_flags=raw["loss"],
    )


def audit_kernel_traces(
    n: int,
    alpha,
    master_seed: int,
    t_threshold: int,
    trial_indices,
    check_memory: bool = True,
) -> LemmaAuditReport:
    """Replay selected kernel trials as full traces and run the snapshot
    audits on them; reports are pooled."""
    matroid, weights, instance = build_hat(n, alpha)
    pooled = LemmaAuditReport()
    for idx in trial_indices:
        raw = _kernels.hat_supergreedy_trace(n, master_seed, int(idx), t_threshold)
        trace = kernel_trace_to_runtrace(instance, weights, raw, t_threshold)
        rep = verify_structural_lemmas(trace, instance, matroid, weights, check_memory=check_memory)
        for name in (
            "events_checked", "checks_a", "mismatches_a", "checks_b", "mismatches_b",
            "double_blocker_events", "memory_checks", "memory_violations",
        ):
            setattr(pooled, name, getattr(pooled, name) + getattr(rep, name))
        pooled.loss_matches_claw_condition &= rep.loss_matches_claw_condition
        pooled.counterexamples.extend(rep.counterexamples)
    return pooled
