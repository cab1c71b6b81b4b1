"""Deterministic 64-bit randomness for trials.

Every random draw in the laboratory comes from splitmix64 streams so that a
trial is a pure function of ``(master_seed, trial_index)`` and the compiled
and pure-Python simulation paths can reproduce each other bit for bit.

Derivation chain (all arithmetic mod 2**64):

* trial seed:      ``mix64(master_seed XOR trial_index)``
* purpose seed:    ``mix64(trial_seed XOR purpose_tag)``
* stream value i:  ``mix64(purpose_seed + (i + 1) * GOLDEN)``

``mix64`` is the splitmix64 finalizer with its published constants; GOLDEN is
the 64-bit golden-ratio increment. Purpose tags keep the schedule, the
partition ordering, the broom planting, and the weight generation on
independent streams of the same trial seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

# Purpose tags (arbitrary distinct constants, spelled out in ASCII).
SCHEDULE_TAG = 0x5343484544554C45  # "SCHEDULE"
PARTITION_TAG = 0x504152544954494E  # "PARTITIN"
BROOM_TAG = 0x42524F4F4D544147  # "BROOMTAG"
WEIGHTS_TAG = 0x5745494748545347  # "WEIGHTSG"


def mix64(x: int) -> int:
    """splitmix64 finalizer: a 64->64 bit mixing bijection."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _MIX_A) & MASK64
    x ^= x >> 27
    x = (x * _MIX_B) & MASK64
    x ^= x >> 31
    return x


def stream_value(seed: int, index: int) -> int:
    """The index-th value of the splitmix64 stream started at ``seed``."""
    return mix64((seed + ((index + 1) * GOLDEN)) & MASK64)


def stream_array(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Vectorized ``stream_value`` for indices ``start .. start+count-1``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(seed & MASK64) + idx * np.uint64(GOLDEN)
        x ^= x >> np.uint64(30)
        x *= np.uint64(_MIX_A)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_MIX_B)
        x ^= x >> np.uint64(31)
    return x


@dataclass(frozen=True)
class TrialSeed:
    """Identifies one trial of one experiment.

    The derived seed is ``mix64(master_seed XOR trial_index)``; identical
    inputs reproduce identical schedules and algorithm randomness.
    """

    master_seed: int
    trial_index: int = 0

    @property
    def derived(self) -> int:
        return mix64((self.master_seed ^ self.trial_index) & MASK64)

    def substream(self, purpose_tag: int) -> int:
        return mix64(self.derived ^ purpose_tag)


def stream_matrix(seeds: np.ndarray, count: int) -> np.ndarray:
    """Row t holds stream values 0..count-1 of seeds[t]."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = seeds.astype(np.uint64)[:, None] + idx[None, :] * np.uint64(GOLDEN)
        x ^= x >> np.uint64(30)
        x *= np.uint64(_MIX_A)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_MIX_B)
        x ^= x >> np.uint64(31)
    return x


def derived_seeds(master_seed: int, start: int, count: int) -> np.ndarray:
    """Vectorized trial-seed derivation for trial indices start..start+count-1."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    x = np.uint64(master_seed & MASK64) ^ idx
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= np.uint64(_MIX_A)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_MIX_B)
        x ^= x >> np.uint64(31)
    return x
