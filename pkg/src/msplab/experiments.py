"""Monte Carlo estimators and the headline experiments.

Estimators compute both competitiveness notions from trial tallies:
expected-utility ratio (mean of per-trial w(A)/w(OPT)) and per-element
acceptance frequencies over the offline optimum, whose minimum is the
probability-competitiveness headline. Fast kernel paths cover the
single-choice rule on 1-uniform matroids, the supergreedy rule on hats,
and parallel-Dynkin partition runs on complete graphs; everything else
falls back to the generic trial executor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .engine import (
    ONE_OVER_E_U64,
    draw_schedule,
    parse_threshold,
    run_trial,
    trace_metrics,
)
from .errors import ConfigurationError, DegenerateInstanceError, ParameterError
from .framework import (
    POLICY_FACTORIES,
    GreedyFramework,
    SupergreedyDirect,
    VirtualAlgorithm,
)
from .hat import HatInstance, build_hat, hat_optimum, run_hat_batch
from .matroids import (
    GraphicMatroid,
    MatroidOracle,
    UniformMatroid,
    max_weight_basis,
    parse_graph_file,
    total_weight,
    weight_key,
)
from .partition import (
    EdgePartition,
    KorulaPalAlgorithm,
    complete_graph_matroid,
    deterministic_adversary_weights,
    korula_pal_partition,
    plant_broom,
)
from .reports import (
    EstimateReport,
    binomial_std_error,
    fraction_str,
    hoeffding_halfwidth,
    wilson_interval,
)
from .rng import WEIGHTS_TAG, TrialSeed, stream_array

WEIGHT_RESOLUTION_BITS = 31  # random weights are k / 2^31 with k < 2^31


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully serializable description of one estimate run."""

    instance: str
    algorithm: str
    metric: str = "probability"
    trials: int = 100_000
    master_seed: int = 0
    horizon: str = "1/e"
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "algorithm": self.algorithm,
            "metric": self.metric,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "horizon": self.horizon,
            "extras": dict(self.extras),
        }

    @property
    def t_threshold(self) -> int:
        return parse_threshold(self.horizon)


@dataclass
class InstanceBundle:
    kind: str
    matroid: MatroidOracle
    weights: list[Fraction]
    hat: HatInstance | None = None
    n_vertices: int | None = None


def random_weights(count: int, master_seed: int) -> list[Fraction]:
    """Pairwise-distinct-with-overwhelming-probability rational weights in
    (0, 1), drawn from the experiment's weight stream."""
    seed = TrialSeed(master_seed, 0).substream(WEIGHTS_TAG)
    raw = stream_array(seed, count)
    shift = 64 - WEIGHT_RESOLUTION_BITS
    return [Fraction(int(v >> np.uint64(shift)) + 1, 1 << (WEIGHT_RESOLUTION_BITS + 1)) for v in raw]


def parse_instance(spec: str, master_seed: int) -> InstanceBundle:
    """Instance mini-language: uniform:k:n | graphic:file | hat:n:alpha | broom:n."""
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "uniform":
            k, n = int(parts[1]), int(parts[2])
            return InstanceBundle("uniform", UniformMatroid(n, k), random_weights(n, master_seed))
        if kind == "graphic":
            path = ":".join(parts[1:])
            with open(path, "r", encoding="utf-8") as fh:
                matroid, weights = parse_graph_file(fh.read())
            if weights is None:
                weights = random_weights(len(matroid.edges), master_seed)
            return InstanceBundle("graphic", matroid, weights, n_vertices=matroid.vertex_count)
        if kind == "hat":
            n, alpha = int(parts[1]), Fraction(parts[2])
            matroid, weights, inst = build_hat(n, alpha)
            return InstanceBundle("hat", matroid, weights, hat=inst)
        if kind == "broom":
            n = int(parts[1])
            weights, _ = plant_broom(n, TrialSeed(master_seed, 0))
            return InstanceBundle("broom", complete_graph_matroid(n), weights, n_vertices=n)
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"cannot parse instance spec {spec!r}") from exc
    raise ParameterError(f"unknown instance kind {kind!r}")


def make_algorithm(name: str, bundle: InstanceBundle):
    if name in POLICY_FACTORIES:
        return GreedyFramework(POLICY_FACTORIES[name])
    if name == "virtual":
        return VirtualAlgorithm()
    if name == "supergreedy-direct":
        return SupergreedyDirect()
    if name == "korula-pal":
        if bundle.n_vertices is None:
            raise ConfigurationError("korula-pal runs on graphic instances of complete graphs")
        return KorulaPalAlgorithm(bundle.n_vertices)
    raise ParameterError(f"unknown algorithm {name!r}")


def scaled_int_weights(weights: list[Fraction]) -> tuple[np.ndarray, int]:
    """Common-denominator integer weights for kernel use (exact)."""
    den = 1
    for w in weights:
        den = den * w.denominator // math.gcd(den, w.denominator)
    scaled = [int(w * den) for w in weights]
    if max(scaled, default=0) * max(len(weights), 1) >= 1 << 62:
        raise ParameterError("weights too fine-grained for integer kernel scaling")
    return np.array(scaled, dtype=np.int64), den


@dataclass
class _Tally:
    trials: int
    opt: frozenset
    opt_utility: Fraction
    utility_num_sum: int = 0  # sum of per-trial scaled utilities
    utility_scale: int = 1
    element_counts: dict[int, int] = field(default_factory=dict)

    def mean_ratio(self) -> Fraction:
        if self.trials == 0:
            return Fraction(0)
        return Fraction(self.utility_num_sum, self.utility_scale) / (self.opt_utility * self.trials)

    def per_element(self) -> list[dict]:
        out = []
        for e in sorted(self.opt):
            c = self.element_counts.get(e, 0)
            lo, hi = wilson_interval(c, self.trials)
            out.append({"id": int(e), "p": c / self.trials, "count": int(c), "wilson99": [lo, hi]})
        return out

    def min_probability(self) -> Fraction:
        if not self.opt:
            return Fraction(0)
        c = min(self.element_counts.get(e, 0) for e in self.opt)
        return Fraction(c, self.trials)


def _kernel_tally(cfg: ExperimentConfig, bundle: InstanceBundle) -> _Tally | None:
    """Route to a compiled kernel when one covers the (instance, algorithm)."""
    thr = cfg.t_threshold
    if cfg.algorithm == "dynkin" and bundle.kind == "uniform" and bundle.matroid.k == 1:
        n = bundle.matroid.ground_size
        rank = np.empty(n, dtype=np.int64)
        order = sorted(range(n), key=lambda e: weight_key(bundle.weights, e))
        for pos, e in enumerate(order):
            rank[e] = pos
        accepted = _kernels.uniform_dynkin_batch(n, rank, cfg.trials, cfg.master_seed, thr)
        ws, den = scaled_int_weights(bundle.weights)
        opt = max_weight_basis(bundle.matroid, bundle.weights)
        tally = _Tally(cfg.trials, opt, total_weight(bundle.weights, opt), utility_scale=den)
        counts = np.bincount(accepted[accepted >= 0], minlength=n)
        got = accepted >= 0
        tally.utility_num_sum = int(np.sum(ws[accepted[got]]))
        for e in range(n):
            if counts[e]:
                tally.element_counts[e] = int(counts[e])
        return tally
    if cfg.algorithm == "supergreedy" and bundle.kind == "hat":
        inst = bundle.hat
        res = _kernels.hat_supergreedy_batch(
            inst.n, cfg.trials, cfg.master_seed, thr,
            inst.alpha.numerator, inst.alpha.denominator,
        )
        opt, opt_utility = hat_optimum(inst, bundle.weights)
        tally = _Tally(cfg.trials, opt, opt_utility, utility_scale=int(res["weight_scale"]))
        tally.utility_num_sum = int(np.sum(res["util_scaled"]))
        for e in range(2 * inst.n + 1):
            c = int(res["accept_counts"][e])
            if c:
                tally.element_counts[e] = c
        return tally
    if cfg.algorithm == "korula-pal" and bundle.kind in ("graphic", "broom"):
        matroid = bundle.matroid
        if not isinstance(matroid, GraphicMatroid):
            return None
        nv = matroid.vertex_count
        if sorted(matroid.edges) != [(u, v) for u in range(nv) for v in range(u + 1, nv)]:
            return None  # kernel assumes the complete graph in canonical order
        eu = np.array([e[0] for e in matroid.edges], dtype=np.int64)
        ev = np.array([e[1] for e in matroid.edges], dtype=np.int64)
        ws, den = scaled_int_weights(bundle.weights)
        res = _kernels.partition_dynkin_batch(nv, eu, ev, ws, cfg.trials, cfg.master_seed, thr)
        opt = max_weight_basis(matroid, bundle.weights)
        tally = _Tally(cfg.trials, opt, total_weight(bundle.weights, opt), utility_scale=den)
        tally.utility_num_sum = int(np.sum(res["util_scaled"]))
        for e in range(len(eu)):
            c = int(res["accept_counts"][e])
            if c:
                tally.element_counts[e] = c
        return tally
    return None


def _generic_tally(cfg: ExperimentConfig, bundle: InstanceBundle) -> _Tally:
    thr = cfg.t_threshold
    opt = max_weight_basis(bundle.matroid, bundle.weights)
    opt_utility = total_weight(bundle.weights, opt)
    den = 1
    for w in bundle.weights:
        den = den * w.denominator // math.gcd(den, w.denominator)
    tally = _Tally(cfg.trials, opt, opt_utility, utility_scale=den)
    n = bundle.matroid.ground_size
    for t in range(cfg.trials):
        seed = TrialSeed(cfg.master_seed, t)
        schedule = draw_schedule(n, seed)
        alg = make_algorithm(cfg.algorithm, bundle)
        trace = run_trial(bundle.matroid, bundle.weights, schedule, alg, seed=seed, t_threshold=thr)
        util = total_weight(bundle.weights, trace.accepted)
        tally.utility_num_sum += int(util * den)
        for e in trace.accepted:
            tally.element_counts[e] = tally.element_counts.get(e, 0) + 1
    return tally


def estimate_trial_rows(cfg: ExperimentConfig) -> list[dict]:
    """Per-trial rows for CSV emission: trial_seed, utility, opt_utility,
    ratio, then one 0/1 column per optimum element."""
    bundle = parse_instance(cfg.instance, cfg.master_seed)
    thr = cfg.t_threshold
    opt = sorted(max_weight_basis(bundle.matroid, bundle.weights))
    opt_utility = total_weight(bundle.weights, opt)
    if opt_utility == 0:
        raise DegenerateInstanceError("optimum has zero weight; ratios are undefined")

    utils: list[Fraction] = []
    tracked = None
    if cfg.algorithm == "dynkin" and bundle.kind == "uniform" and bundle.matroid.k == 1:
        n = bundle.matroid.ground_size
        rank = np.empty(n, dtype=np.int64)
        for pos, e in enumerate(sorted(range(n), key=lambda e: weight_key(bundle.weights, e))):
            rank[e] = pos
        accepted = _kernels.uniform_dynkin_batch(n, rank, cfg.trials, cfg.master_seed, thr)
        utils = [bundle.weights[a] if a >= 0 else Fraction(0) for a in accepted.tolist()]
        tracked = np.zeros((cfg.trials, len(opt)), dtype=np.uint8)
        for j, e in enumerate(opt):
            tracked[:, j] = accepted == e
    elif cfg.algorithm == "supergreedy" and bundle.kind == "hat":
        inst = bundle.hat
        res = _kernels.hat_supergreedy_batch(
            inst.n, cfg.trials, cfg.master_seed, thr,
            inst.alpha.numerator, inst.alpha.denominator, tracked_elems=opt,
        )
        scale = int(res["weight_scale"])
        utils = [Fraction(int(u), scale) for u in res["util_scaled"].tolist()]
        tracked = res["tracked"]
    elif cfg.algorithm == "korula-pal" and isinstance(bundle.matroid, GraphicMatroid):
        matroid = bundle.matroid
        nv = matroid.vertex_count
        if sorted(matroid.edges) == [(u, v) for u in range(nv) for v in range(u + 1, nv)]:
            eu = np.array([e[0] for e in matroid.edges], dtype=np.int64)
            ev = np.array([e[1] for e in matroid.edges], dtype=np.int64)
            ws, den = scaled_int_weights(bundle.weights)
            res = _kernels.partition_dynkin_batch(
                nv, eu, ev, ws, cfg.trials, cfg.master_seed, thr, tracked_elems=opt
            )
            utils = [Fraction(int(u), den) for u in res["util_scaled"].tolist()]
            tracked = res["tracked"]

    rows = []
    if tracked is not None:
        for t in range(cfg.trials):
            row = {
                "trial_seed": TrialSeed(cfg.master_seed, t).derived,
                "utility": float(utils[t]),
                "opt_utility": float(opt_utility),
                "ratio": float(utils[t] / opt_utility),
            }
            for j, e in enumerate(opt):
                row[f"elem_{e}"] = int(tracked[t, j])
            rows.append(row)
        return rows

    n = bundle.matroid.ground_size
    for t in range(cfg.trials):
        seed = TrialSeed(cfg.master_seed, t)
        schedule = draw_schedule(n, seed)
        alg = make_algorithm(cfg.algorithm, bundle)
        trace = run_trial(bundle.matroid, bundle.weights, schedule, alg, seed=seed, t_threshold=thr)
        record = trace_metrics(trace, bundle.weights, frozenset(opt))
        rows.append(record.to_row(seed.derived))
    return rows


def estimate_competitiveness(cfg: ExperimentConfig) -> EstimateReport:
    """Run the configured estimate and build its report.

    metric="utility": headline is the mean per-trial ratio w(A)/w(OPT).
    metric="probability": headline is the minimum, over optimum elements,
    of the acceptance frequency.
    """
    if cfg.metric not in ("utility", "probability"):
        raise ParameterError(f"unknown metric {cfg.metric!r}")
    if cfg.trials < 1:
        raise ParameterError("trials must be positive")
    bundle = parse_instance(cfg.instance, cfg.master_seed)
    opt_check = max_weight_basis(bundle.matroid, bundle.weights)
    if total_weight(bundle.weights, opt_check) == 0:
        raise DegenerateInstanceError("optimum has zero weight; ratios are undefined")
    tally = _kernel_tally(cfg, bundle)
    if tally is None:
        tally = _generic_tally(cfg, bundle)

    per_element = tally.per_element()
    if cfg.metric == "utility":
        mean = tally.mean_ratio()
    else:
        mean = tally.min_probability()
    return EstimateReport(
        config=cfg.to_dict(),
        metric=cfg.metric,
        trials=cfg.trials,
        mean=float(mean),
        mean_exact=fraction_str(mean),
        ci99=hoeffding_halfwidth(cfg.trials),
        per_element=per_element,
        audits={},
        opt={
            "elements": sorted(int(e) for e in tally.opt),
            "weight": fraction_str(tally.opt_utility),
        },
    )


# ---------------------------------------------------------------------------
# Headline experiments
# ---------------------------------------------------------------------------


@dataclass
class HatExperimentRow:
    n: int
    alpha: Fraction
    trials: int
    loss_rate: float
    conditional_loss_rate: float
    conditional_ci99: float
    trials_inf_after_t: int
    mean_ratio: float
    audit: dict

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha": str(self.alpha),
            "trials": self.trials,
            "loss_rate": self.loss_rate,
            "conditional_loss_rate": self.conditional_loss_rate,
            "conditional_ci99": self.conditional_ci99,
            "trials_inf_after_t": self.trials_inf_after_t,
            "mean_ratio": self.mean_ratio,
            "audit": dict(self.audit),
        }


def hat_failure_experiment(
    n_values: list[int],
    alpha,
    policy: str,
    trials: int,
    master_seed: int,
    t_threshold: int = ONE_OVER_E_U64,
    audit_every: int = 64,
) -> list[HatExperimentRow]:
    """Loss probabilities and utility ratios of the supergreedy rule on hats
    of increasing size, with the structural-lemma audits run inline."""
    if policy != "supergreedy":
        raise ConfigurationError(
            "hat experiments run the supergreedy rule; the uniform-matroid "
            f"policies do not apply to graphic hats (got {policy!r})"
        )
    rows = []
    for n in n_values:
        res = run_hat_batch(n, alpha, trials, master_seed, t_threshold, audit_every=audit_every)
        p = res.conditional_loss_rate
        se = binomial_std_error(res.losses_inf_after_t, res.trials_inf_after_t)
        rows.append(
            HatExperimentRow(
                n=n,
                alpha=Fraction(alpha),
                trials=trials,
                loss_rate=res.loss_rate,
                conditional_loss_rate=p,
                conditional_ci99=2.5758293035489004 * se,
                trials_inf_after_t=res.trials_inf_after_t,
                mean_ratio=float(res.mean_ratio),
                audit=res.audit,
            )
        )
    return rows


@dataclass
class BroomExperimentReport:
    n: int
    distribution: str
    trials: int
    utility_ratio: float
    min_leg_probability: float
    min_leg_slot: int
    high_degree_cutoff: float
    high_degree_fraction: float
    handle_degree_mean: float
    slot_probabilities: list[float]

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        return d


def broom_attack_experiment(
    n: int,
    distribution: str,
    trials: int,
    master_seed: int,
    t_threshold: int = ONE_OVER_E_U64,
) -> BroomExperimentReport:
    """Plant a fresh broom each trial, resample the partition from the
    distribution, run parallel Dynkin, and tally per-leg acceptance."""
    if distribution not in ("korula-pal", "single-part"):
        raise ParameterError(f"unknown partition distribution {distribution!r}")
    res = _kernels.broom_batch(
        n, trials, master_seed, t_threshold, single_part=(distribution == "single-part")
    )
    slots = res["slot_counts"]
    probs = [c / trials for c in slots.tolist()]
    min_slot = int(np.argmin(slots))
    cutoff = float(n) ** 0.125
    if round(cutoff) ** 8 == n:
        cutoff = float(round(cutoff))
    high_frac = float(np.mean(res["handle_deg"] >= cutoff))
    ratio = float(np.sum(res["util_legs"])) / (trials * (n - 2))
    return BroomExperimentReport(
        n=n,
        distribution=distribution,
        trials=trials,
        utility_ratio=ratio,
        min_leg_probability=probs[min_slot],
        min_leg_slot=min_slot,
        high_degree_cutoff=cutoff,
        high_degree_fraction=high_frac,
        handle_degree_mean=float(np.mean(res["handle_deg"])),
        slot_probabilities=probs,
    )


@dataclass
class AdversaryExperimentReport:
    n: int
    trials: int
    forest_size: int
    min_probability: float
    min_element: int
    threshold: float
    per_element: list[dict]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def deterministic_partition_experiment(
    n: int,
    trials: int,
    master_seed: int,
    partition_seed: int = 0,
    partition: EdgePartition | None = None,
    t_threshold: int = ONE_OVER_E_U64,
) -> AdversaryExperimentReport:
    """Fix one sampled partition, aim the adversary weights at its biggest
    part, and measure per-element acceptance over schedules only."""
    if partition is None:
        partition = korula_pal_partition(n, TrialSeed(partition_seed, 0))
    weights, forest = deterministic_adversary_weights(partition)
    matroid = complete_graph_matroid(n)
    eu = np.array([e[0] for e in matroid.edges], dtype=np.int64)
    ev = np.array([e[1] for e in matroid.edges], dtype=np.int64)
    ws, _ = scaled_int_weights(weights)
    res = _kernels.partition_dynkin_batch(
        n, eu, ev, ws, trials, master_seed, t_threshold,
        part_of_edge=partition.as_array(),
    )
    per = []
    for e in forest:
        c = int(res["accept_counts"][e])
        lo, hi = wilson_interval(c, trials)
        per.append({"id": int(e), "p": c / trials, "count": c, "wilson99": [lo, hi]})
    worst = min(per, key=lambda d: d["p"])
    return AdversaryExperimentReport(
        n=n,
        trials=trials,
        forest_size=len(forest),
        min_probability=worst["p"],
        min_element=worst["id"],
        threshold=2.0 * math.sqrt(2.0) / math.sqrt(n),
        per_element=per,
    )


def calibration_coverage(
    bias: Fraction,
    trials_per_rep: int,
    reps: int,
    master_seed: int,
) -> float:
    """Meta-check of the interval machinery: a known-bias coin is pushed
    through the same per-element aggregation path; returns the fraction of
    repetitions whose 99% Wilson interval covers the true bias."""
    covered = 0
    for r in range(reps):
        seed = TrialSeed(master_seed, r).substream(WEIGHTS_TAG)
        draws = stream_array(seed, trials_per_rep)
        hits = int(np.sum(draws < np.uint64(int(bias * (1 << 64)))))
        lo, hi = wilson_interval(hits, trials_per_rep)
        if lo <= float(bias) <= hi:
            covered += 1
    return covered / reps
