"""Greedy framework for online selection, with pluggable memory policies.

A framework algorithm (i) rejects but stores everything arriving before the
sampling horizon T, (ii) maintains an independent memory set I_t with
A_t <= I_t <= A_t + S that spans everything arrived so far, and (iii)
accepts an arrival e iff e lands in the max-weight basis of I_t + {e} after
contracting by the accepted set. The policy's only freedom is which samples
to keep in I_t.

On top of the framework this module provides the policy zoo (supergreedy,
dynkin, optimistic, pessimistic), the virtual algorithm (which deliberately
does NOT fit the framework and is flagged as such), and a standalone
formulation of the supergreedy rule used as an independent reference in
equivalence tests.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Sequence

from .engine import Decision, SecretaryAlgorithm
from .errors import ConfigurationError, FrameworkFaultError
from .matroids import MatroidOracle, UniformMatroid, max_weight_basis, weight_key
from .rng import TrialSeed


@dataclass
class FrameworkState:
    """Everything a memory policy is allowed to see.

    Post-T rejected elements are deliberately absent: a policy can only
    drop them from memory (they were never there), not inspect them.
    """

    matroid: MatroidOracle
    weights: Sequence[Fraction]
    t_threshold: int
    samples: set = field(default_factory=set)
    accepted: list = field(default_factory=list)
    memory: set = field(default_factory=set)

    def accepted_set(self) -> frozenset:
        return frozenset(self.accepted)


def framework_accept_rule(state: FrameworkState, elem: int, time_u64: int) -> bool:
    """Property (iii): accept iff elem is in the max-weight basis of
    I_t + {elem} after contracting by the accepted set (and t > T)."""
    if time_u64 <= state.t_threshold:
        return False
    acc = state.accepted_set()
    if not (acc <= state.memory):
        raise FrameworkFaultError("memory does not contain the accepted set")
    if not state.matroid.is_independent(state.memory):
        raise FrameworkFaultError("memory set is dependent")
    contracted = state.matroid.contract(acc)
    view = contracted.restrict((state.memory | {elem}) - acc)
    return elem in max_weight_basis(view, state.weights)


@dataclass(frozen=True)
class MemoryReport:
    ok: bool
    violations: tuple[str, ...] = ()


def validate_memory(state: FrameworkState, matroid: MatroidOracle, arrived: set) -> MemoryReport:
    """Check containment, independence, and spanning of the memory set.

    Violations are data, not exceptions: callers audit traces with this.
    """
    violations = []
    acc = state.accepted_set()
    if not (acc <= state.memory and state.memory <= acc | state.samples):
        violations.append("containment")
    independent = matroid.is_independent(state.memory)
    if not independent:
        violations.append("independence")
    if independent and not matroid.spans(state.memory, arrived):
        violations.append("spanning")
    return MemoryReport(not violations, tuple(violations))


class MemoryPolicy:
    """Chooses which samples stay in I_t. Stateful, one instance per trial."""

    name = "abstract"

    def requires(self, matroid: MatroidOracle) -> None:
        """Raise ConfigurationError if the matroid is unsupported."""

    def at_sample(self, state: FrameworkState, elem: int) -> set:
        raise NotImplementedError

    def at_decision(self, state: FrameworkState, elem: int, accepted: bool) -> set:
        raise NotImplementedError


class SupergreedyPolicy(MemoryPolicy):
    """Keep the heaviest feasible memory: I_t is the max-weight basis of the
    samples contracted by the accepted set, plus the accepted set."""

    name = "supergreedy"

    def _recompute(self, state: FrameworkState) -> set:
        acc = state.accepted_set()
        view = state.matroid.contract(acc).restrict(state.samples - acc)
        return set(max_weight_basis(view, state.weights)) | set(acc)

    def at_sample(self, state, elem):
        return self._recompute(state)

    def at_decision(self, state, elem, accepted):
        return self._recompute(state)


class DynkinPolicy(MemoryPolicy):
    """Single-choice rule: remember only the heaviest sample until the one
    allowed accept happens."""

    name = "dynkin"

    def requires(self, matroid):
        if not (isinstance(matroid, UniformMatroid) and matroid.k == 1):
            raise ConfigurationError("dynkin policy needs a 1-uniform matroid")

    def _best_sample(self, state):
        if not state.samples:
            return set()
        return {min(state.samples, key=lambda e: weight_key(state.weights, e))}

    def at_sample(self, state, elem):
        return self._best_sample(state)

    def at_decision(self, state, elem, accepted):
        if state.accepted:
            return set(state.accepted)
        return self._best_sample(state)


class _TopListPolicy(MemoryPolicy):
    """Shared machinery for the k-uniform policies that keep a list U of
    reference samples and set I_t = A_t + U."""

    def __init__(self):
        self._keys: list = []  # sorted ascending = heaviest first
        self._elems: list = []

    def requires(self, matroid):
        if not isinstance(matroid, UniformMatroid):
            raise ConfigurationError(f"{self.name} policy needs a uniform matroid")

    def _insert(self, state, elem):
        key = weight_key(state.weights, elem)
        pos = bisect.bisect_left(self._keys, key)
        self._keys.insert(pos, key)
        self._elems.insert(pos, elem)

    def at_sample(self, state, elem):
        self._insert(state, elem)
        k = state.matroid.k
        if len(self._elems) > k:
            del self._keys[k:], self._elems[k:]
        return set(self._elems)

    def _drop(self, idx):
        del self._keys[idx], self._elems[idx]

    def at_decision(self, state, elem, accepted):
        # Drop a reference sample only when capacity forces it; while fewer
        # than k samples exist the rule accepts into spare capacity and the
        # whole list must stay in memory to keep it spanning.
        if accepted and self._elems and len(state.accepted) + len(self._elems) > state.matroid.k:
            self._remove_for(state, elem)
        return set(state.accepted) | set(self._elems)

    def _remove_for(self, state, elem):
        raise NotImplementedError


class OptimisticPolicy(_TopListPolicy):
    """On accept, drop the lightest element of U."""

    name = "optimistic"

    def _remove_for(self, state, elem):
        self._drop(len(self._elems) - 1)


class PessimisticPolicy(_TopListPolicy):
    """On accept, drop the heaviest element of U lighter than the accepted
    element (if any)."""

    name = "pessimistic"

    def _remove_for(self, state, elem):
        key = weight_key(state.weights, elem)
        pos = bisect.bisect_right(self._keys, key)
        if pos < len(self._elems):
            self._drop(pos)


POLICY_FACTORIES: dict[str, Callable[[], MemoryPolicy]] = {
    "supergreedy": SupergreedyPolicy,
    "dynkin": DynkinPolicy,
    "optimistic": OptimisticPolicy,
    "pessimistic": PessimisticPolicy,
}


class GreedyFramework(SecretaryAlgorithm):
    """Runs Algorithm-1 semantics around a memory policy.

    Policies are invoked after every sample arrival and after every post-T
    decision, so the memory invariants are maintainable at every event.
    With ``validate_each_event`` the state is checked after every event and
    any violation raises FrameworkFaultError (used in tests).
    """

    framework = True

    def __init__(self, policy_factory: Callable[[], MemoryPolicy], validate_each_event: bool = False):
        self._factory = policy_factory
        self._validate = validate_each_event
        policy = policy_factory()
        self.name = f"greedy:{policy.name}"

    def start(self, matroid, weights, t_threshold, seed: TrialSeed | None = None):
        self.policy = self._factory()
        self.policy.requires(matroid)
        self.state = FrameworkState(matroid, weights, t_threshold)
        self._arrived: set = set()

    def on_arrival(self, elem, weight, time_u64):
        state = self.state
        self._arrived.add(elem)
        if time_u64 <= state.t_threshold:
            state.samples.add(elem)
            new_mem = set(self.policy.at_sample(state, elem))
            decision = Decision.SAMPLE
        else:
            accepted = framework_accept_rule(state, elem, time_u64)
            if accepted:
                state.accepted.append(elem)
            new_mem = set(self.policy.at_decision(state, elem, accepted))
            decision = Decision.ACCEPT if accepted else Decision.REJECT
        added = tuple(sorted(new_mem - state.memory))
        removed = tuple(sorted(state.memory - new_mem))
        state.memory = new_mem
        if self._validate:
            report = validate_memory(state, state.matroid, self._arrived)
            if not report.ok:
                raise FrameworkFaultError(f"memory invariant violated: {report.violations}")
        return decision, added, removed


class VirtualAlgorithm(SecretaryAlgorithm):
    """The k-uniform virtual rule: accept e iff e is among the k heaviest
    elements seen so far and the k-th heaviest of the earlier arrivals is a
    sample (e "kicks out a sample" from the top k).

    Deliberately outside the greedy framework: the rule consults weights of
    post-T rejected elements, which no memory policy can retain.
    """

    name = "virtual"
    framework = False

    def start(self, matroid, weights, t_threshold, seed: TrialSeed | None = None):
        if not isinstance(matroid, UniformMatroid):
            raise ConfigurationError("virtual algorithm needs a uniform matroid")
        self.k = matroid.k
        self.weights = weights
        self.t_threshold = t_threshold
        self._keys: list = []  # all seen, heaviest first
        self._is_sample: dict[int, bool] = {}
        self._elems: list = []
        self.accepted: list = []

    def _remember(self, elem, time_u64):
        key = weight_key(self.weights, elem)
        pos = bisect.bisect_left(self._keys, key)
        self._keys.insert(pos, key)
        self._elems.insert(pos, elem)
        self._is_sample[elem] = time_u64 <= self.t_threshold

    def on_arrival(self, elem, weight, time_u64):
        if time_u64 <= self.t_threshold:
            self._remember(elem, time_u64)
            return Decision.SAMPLE, (), ()
        accept = False
        if len(self._keys) >= self.k:
            kth_elem = self._elems[self.k - 1]
            beats_kth = weight_key(self.weights, elem) < self._keys[self.k - 1]
            accept = beats_kth and self._is_sample[kth_elem]
        self._remember(elem, time_u64)
        if accept:
            self.accepted.append(elem)
            return Decision.ACCEPT, (elem,), ()
        return Decision.REJECT, (), ()


class SupergreedyDirect(SecretaryAlgorithm):
    """Standalone supergreedy rule, independent of the framework machinery:
    accept e iff t(e) > T, the accept is feasible, and e is still in the
    max-weight basis of everything seen so far after contracting by the
    accepted set. Used as the reference in equivalence tests.
    """

    name = "supergreedy-direct"
    framework = False

    def start(self, matroid, weights, t_threshold, seed: TrialSeed | None = None):
        self.matroid = matroid
        self.weights = weights
        self.t_threshold = t_threshold
        self.seen: set = set()
        self.accepted: list = []

    def on_arrival(self, elem, weight, time_u64):
        self.seen.add(elem)
        if time_u64 <= self.t_threshold:
            return Decision.SAMPLE, (), ()
        acc = frozenset(self.accepted)
        if not self.matroid.is_independent(acc | {elem}):
            return Decision.REJECT, (), ()
        view = self.matroid.contract(acc).restrict(self.seen - acc)
        if elem in max_weight_basis(view, self.weights):
            self.accepted.append(elem)
            return Decision.ACCEPT, (elem,), ()
        return Decision.REJECT, (), ()


def enumerate_decision_sequences(
    matroid: MatroidOracle,
    weights: Sequence[Fraction],
    schedule,
    t_threshold: int,
) -> set[tuple[bool, ...]]:
    """All post-T decision sequences achievable by *some* memory policy.

    Exhaustive search over every valid memory choice after every event;
    only usable on tiny instances. The accept decisions themselves are
    forced by the framework rule once the memory is fixed, so the result
    characterizes the whole framework on this instance.
    """
    order = [int(e) for e in schedule.order()]
    results: set[tuple[bool, ...]] = set()

    def memory_choices(samples: frozenset, acc: tuple, arrived: frozenset):
        acc_set = frozenset(acc)
        pool = sorted(samples - acc_set)
        for r in range(len(pool) + 1):
            for extra in combinations(pool, r):
                mem = acc_set | frozenset(extra)
                if not matroid.is_independent(mem):
                    continue
                if arrived and not matroid.spans(mem, arrived):
                    continue
                yield mem

    def walk(idx: int, samples: frozenset, acc: tuple, mem: frozenset, arrived: frozenset, decisions: tuple):
        if idx == len(order):
            results.add(decisions)
            return
        elem = order[idx]
        t = int(schedule.times[elem])
        arrived2 = arrived | {elem}
        if t <= t_threshold:
            for mem2 in memory_choices(samples | {elem}, acc, arrived2):
                walk(idx + 1, samples | {elem}, acc, mem2, arrived2, decisions)
            return
        state = FrameworkState(matroid, weights, t_threshold, set(samples), list(acc), set(mem))
        accepted = framework_accept_rule(state, elem, t)
        acc2 = acc + (elem,) if accepted else acc
        for mem2 in memory_choices(samples, acc2, arrived2):
            walk(idx + 1, samples, acc2, mem2, arrived2, decisions + (accepted,))

    walk(0, frozenset(), (), frozenset(), frozenset(), ())
    return results
