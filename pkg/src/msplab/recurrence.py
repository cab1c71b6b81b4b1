"""Numerics for the low-degree-edge recurrence and its convex helper.

T(n), the maximum number of low-degree edges over valid colorings of K_n,
satisfies a two-branch recurrence whose induction closes under four side
conditions. The only one needing numeric verification is condition 4:

    2(n-1) / (a b n^(1+a))  <  (1+a) b C / (2 n^(1-a))   for all n < N

under the instantiation a = eps/3, C = n^(eps/3),
b = (4/a) (n/C)^(1/2 + eps/3). This module scans that inequality, reports
the induced bound b C N^(1+a), and evaluates the extremal value of the
convex budget-splitting program used in the induction's first branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class RecurrenceParams:
    """Instantiation of the induction constants for a given eps."""

    eps: Fraction

    def __post_init__(self):
        if not (0 < self.eps < Fraction(1, 2)):
            raise ParameterError("eps must lie in (0, 1/2)")

    @property
    def a(self) -> float:
        return float(self.eps) / 3.0

    def degree_cutoff(self, n) -> np.ndarray:
        return np.asarray(n, dtype=np.float64) ** (float(self.eps) / 3.0)

    def b(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.float64)
        return (4.0 / self.a) * (n / self.degree_cutoff(n)) ** (0.5 + float(self.eps) / 3.0)


@dataclass
class RecurrenceReport:
    eps: Fraction
    n_max: int
    condition4_holds: bool
    first_violation: int | None
    bound_value: float
    bound_le_target: bool
    target_value: float
    base_case: bool
    base_case_value: int | None

    def as_dict(self) -> dict:
        return {
            "eps": str(self.eps),
            "n_max": self.n_max,
            "condition4_holds": self.condition4_holds,
            "first_violation": self.first_violation,
            "bound_value": self.bound_value,
            "bound_le_target": self.bound_le_target,
            "target_value": self.target_value,
            "base_case": self.base_case,
            "base_case_value": self.base_case_value,
        }


def recurrence_check(n_max: int, eps, chunk: int = 1_000_000) -> RecurrenceReport:
    """Scan condition 4 for all 2 <= n <= n_max and report the bound.

    Violations are reported by naming the first offending n, not raised.
    """
    params = RecurrenceParams(Fraction(eps))
    if n_max < 2:
        raise ParameterError("n_max must be at least 2")
    a = params.a
    holds = True
    first_violation = None
    for lo in range(2, n_max + 1, chunk):
        hi = min(lo + chunk, n_max + 1)
        n = np.arange(lo, hi, dtype=np.float64)
        c = params.degree_cutoff(n)
        b = params.b(n)
        lhs = 2.0 * (n - 1.0) / (a * b * n ** (1.0 + a))
        rhs = (1.0 + a) * b * c / (2.0 * n ** (1.0 - a))
        bad = np.nonzero(~(lhs < rhs))[0]
        if bad.size:
            holds = False
            first_violation = int(n[bad[0]])
            break

    c_top = float(params.degree_cutoff(n_max))
    b_top = float(params.b(n_max))
    bound = b_top * c_top * float(n_max) ** (1.0 + a)
    target = float(n_max) ** (1.5 + float(params.eps))
    base_case = (n_max - 1) / 2.0 < c_top
    return RecurrenceReport(
        eps=params.eps,
        n_max=n_max,
        condition4_holds=holds,
        first_violation=first_violation,
        bound_value=bound,
        bound_le_target=bound <= target,
        target_value=target,
        base_case=base_case,
        base_case_value=(n_max * (n_max - 1) // 2) if base_case else None,
    )


def convex_extremum(n: int, gamma, a) -> float:
    """Extremal value of sum x_i^(1+a) over nonnegative integer vectors with
    sum n and entries capped at (1-gamma)n: the mass splits into one full
    cap and one remainder."""
    gamma = Fraction(gamma)
    a = Fraction(a)
    if not (0 < gamma < Fraction(1, 2)):
        raise ParameterError("gamma must lie in (0, 1/2)")
    if not (0 < a < 1):
        raise ParameterError("a must lie in (0, 1)")
    if (gamma * n).denominator != 1:
        raise ParameterError("gamma * n must be an integer")
    big = (1 - gamma) * n
    small = gamma * n
    return float(big) ** (1.0 + float(a)) + float(small) ** (1.0 + float(a))
