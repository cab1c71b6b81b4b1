"""Report assembly: confidence machinery, JSON/CSV emission.

Reports carry their full configuration so a run can be reproduced from its
own output; payloads contain no timestamps and are serialized with sorted
keys, making identical configurations produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

Z99 = 2.5758293035489004  # two-sided 99% normal quantile


def hoeffding_halfwidth(trials: int, level: float = 0.99) -> float:
    """Distribution-free half-width for a [0,1]-bounded mean."""
    if trials <= 0:
        return float("inf")
    return math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * trials))


def wilson_interval(successes: int, trials: int, z: float = Z99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    spread = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - spread), min(1.0, center + spread))


def binomial_std_error(successes: int, trials: int) -> float:
    if trials <= 0:
        return float("inf")
    p = successes / trials
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def stable_json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=2)


@dataclass
class EstimateReport:
    """Headline estimate plus per-element detail and audit counters.

    ``mean`` is the metric's headline number: the expected utility ratio for
    the utility metric, the minimum per-element acceptance frequency for the
    probability metric. ``ci99`` is a Hoeffding half-width at the 99% level.
    """

    config: dict
    metric: str
    trials: int
    mean: float
    mean_exact: str
    ci99: float
    per_element: list[dict] | None = None
    audits: dict = field(default_factory=dict)
    opt: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "metric": self.metric,
            "trials": self.trials,
            "mean": self.mean,
            "mean_exact": self.mean_exact,
            "ci99": self.ci99,
            "per_element": self.per_element,
            "audits": self.audits,
            "opt": self.opt,
        }

    def to_json(self) -> str:
        return stable_json_dumps(self.to_dict())


def estimate_csv(rows: list[dict]) -> str:
    """CSV for per-trial estimate rows: trial_seed, utility, opt_utility,
    ratio, then one 0/1 column per optimum element."""
    if not rows:
        return ""
    fields = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"
