"""Numeric evaluators for the greedy-failure probability bounds.

Two functions of the unprotected-time measure y bound the failure
probability of any framework algorithm on the hat: f (decreasing in y, the
cost of staying protected) and g (increasing in y, the cost of going
unprotected). The algorithm's failure probability is at least
min over y of max(f, g), and that min-max tends to 1 as n grows. This
module evaluates the formulas, scans the min-max on a y grid, and runs the
Monte Carlo check of the claw-inversion probability bound that feeds f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .rng import MASK64, SCHEDULE_TAG, derived_seeds, mix64, stream_matrix

T_DEFAULT = math.exp(-1.0)


@dataclass(frozen=True)
class BoundParams:
    """Evaluation point: claw count n, left-window width x, interval length
    ell. Defaults are x = n**0.3 and ell = n**-0.1."""

    n: int
    x: float = None  # type: ignore[assignment]
    ell: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be positive")
        if self.x is None:
            object.__setattr__(self, "x", float(self.n) ** 0.3)
        if self.ell is None:
            object.__setattr__(self, "ell", float(self.n) ** -0.1)
        if self.x < 0 or self.x > self.n:
            raise ParameterError("x must lie in [0, n]")
        if not (0 < self.ell < 1):
            raise ParameterError("ell must lie in (0, 1)")

    @property
    def g_breakpoint(self) -> float:
        return float(self.n) ** -0.4 / 2.0


def protected_failure_bound(p: BoundParams, y: float) -> float:
    """f(y): failure bound when unprotected time is kept at measure y."""
    x, ell = p.x, p.ell
    lead = 1.0 - 2.0 * x * ell * math.exp(-2.0 * x / 3.0)
    inversion = 1.0 - 0.5 ** (ell * ell * x / 2.0)
    return lead * (1.0 - y) ** (4.0 * x) * inversion


def unprotected_failure_bound(p: BoundParams, y: float) -> float:
    """g(y): failure bound from the unprotected windows; zero below the
    n**-0.4 / 2 breakpoint."""
    n, ell = float(p.n), p.ell
    nm04 = n ** -0.4
    if y < nm04 / 2.0:
        return 0.0
    base = 1.0 - (2.0 * y - nm04) / (2.0 * ell)
    expo = n ** 0.6 * (4.0 * ell - nm04) / (32.0 * ell * ell)
    return 1.0 - base ** expo


def eval_failure_bounds(p: BoundParams, y: float) -> tuple[float, float]:
    if not (0.0 <= y <= 1.0):
        raise ParameterError("y must lie in [0, 1]")
    return protected_failure_bound(p, y), unprotected_failure_bound(p, y)


def y_grid(p: BoundParams, points: int = 512) -> np.ndarray:
    """512 log-spaced points in [0, ell] plus the g breakpoint."""
    grid = np.geomspace(p.ell * 1e-6, p.ell, points - 1)
    grid = np.concatenate([[0.0, p.g_breakpoint], grid])
    grid = grid[grid <= p.ell]
    return np.unique(grid)


@dataclass
class MinMaxScan:
    params: BoundParams
    grid: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    value: float
    y_at: float

    @property
    def f_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.f_values) <= 1e-12))

    @property
    def g_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.g_values) >= -1e-12))


def minmax_scan(p: BoundParams, points: int = 512) -> MinMaxScan:
    """min over the y grid of max(f, g)."""
    grid = y_grid(p, points)
    f = np.array([protected_failure_bound(p, y) for y in grid])
    g = np.array([unprotected_failure_bound(p, y) for y in grid])
    both = np.maximum(f, g)
    k = int(np.argmin(both))
    return MinMaxScan(p, grid, f, g, float(both[k]), float(grid[k]))


@dataclass
class ClawInversionReport:
    """Monte Carlo check of the claw-inversion probability bound.

    The event: among the leftmost x claws, some claw has both edges landing
    in (T, T + ell] with the lower edge first. The bound is
    1 - 2**(-ell^2 x / 2), evaluated at the integer claw count actually
    simulated (x rounded up).
    """

    n: int
    x_claws: int
    ell: float
    trials: int
    estimate: float
    bound: float
    std_error: float

    @property
    def passes(self) -> bool:
        return self.estimate >= self.bound - 3.0 * self.std_error


def claw_inversion_check(
    n: int,
    x: float = None,
    ell: float = None,
    trials: int = 20000,
    master_seed: int = 0,
    t_start: float = T_DEFAULT,
) -> ClawInversionReport:
    """Estimate P[some left-window claw inverts inside (T, T+ell]].

    Pure arrival-time simulation: only the 2x relevant arrival times are
    drawn per trial. Passes iff the estimate is at least the bound minus
    three binomial standard errors.
    """
    p = BoundParams(n, x, ell)
    x_claws = int(math.ceil(p.x))
    if t_start + p.ell > 1.0 + 1e-12:
        raise ParameterError("interval (T, T+ell] must fit inside [0, 1]")
    bound = 1.0 - 0.5 ** (p.ell * p.ell * x_claws / 2.0)
    if x_claws == 0 or trials == 0:
        return ClawInversionReport(n, x_claws, p.ell, trials, 0.0, bound, 0.0)

    seeds = derived_seeds(master_seed, 0, trials)
    with np.errstate(over="ignore"):
        seeds = (seeds ^ np.uint64(SCHEDULE_TAG)).copy()
        seeds ^= seeds >> np.uint64(30)
        seeds *= np.uint64(0xBF58476D1CE4E5B9)
        seeds ^= seeds >> np.uint64(27)
        seeds *= np.uint64(0x94D049BB133111EB)
        seeds ^= seeds >> np.uint64(31)
    times = stream_matrix(seeds, 2 * x_claws).astype(np.float64) / float(1 << 64)
    upper = times[:, :x_claws]
    lower = times[:, x_claws:]
    hi = t_start + p.ell
    hit = (t_start < lower) & (lower < upper) & (upper <= hi)
    estimate = float(np.mean(hit.any(axis=1)))
    se = math.sqrt(max(estimate * (1.0 - estimate), 0.0) / trials)
    return ClawInversionReport(n, x_claws, p.ell, trials, estimate, bound, se)
