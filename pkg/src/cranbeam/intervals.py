"""Power-changing slot detection and multi-BS interval merging.

For a single energy-harvesting transmitter, the optimal transmit power is
piecewise constant: it stays at the lowest feasible running average of the
remaining harvest and steps up exactly where that average is attained. The
boundaries of those stretches are found by repeatedly taking the argmin of
the running average after the previous boundary. Merging all per-BS
boundaries yields the grid on which the joint problem assigns one beamformer
per interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import EnergyProfile


def power_change_slots(e: np.ndarray) -> list[tuple[int, float]]:
    """Boundaries (1-based slot indices) and levels of the flattest causal spend of e.

    Each step minimizes the running average of e after the previous boundary;
    ties pick the largest slot (the longest constant-power stretch). Levels
    are non-decreasing and the last boundary is len(e).
    """
    e = np.asarray(e, dtype=float).reshape(-1)
    if e.size == 0:
        raise ValueError("energy vector must be non-empty")
    if np.any(e < 0):
        raise ValueError("energy vector must be nonnegative")
    out: list[tuple[int, float]] = []
    start = 0
    n = e.size
    while start < n:
        csum = np.cumsum(e[start:])
        avg = csum / np.arange(1, n - start + 1)
        lvl = float(np.min(avg))
        # largest index attaining the minimum, with a tiny relative guard
        tol = 1e-12 * max(1.0, abs(lvl))
        k = int(np.max(np.nonzero(avg <= lvl + tol)[0]))
        boundary = start + k + 1
        out.append((boundary, lvl))
        start = boundary
    return out


@dataclass(frozen=True)
class IntervalPartition:
    """Merged power-changing boundaries n_1 < ... < n_M = N (1-based, inclusive)."""

    boundaries: tuple
    num_slots: int
    per_bs_changing_slots: tuple

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        if list(b) != sorted(set(b)):
            raise ValueError("boundaries must be strictly increasing")
        if not b or b[-1] != self.num_slots:
            raise ValueError("last boundary must equal the number of slots")
        if b[0] < 1:
            raise ValueError("boundaries are 1-based")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(
            self, "per_bs_changing_slots", tuple(tuple(int(x) for x in s) for s in self.per_bs_changing_slots)
        )

    @property
    def num_intervals(self) -> int:
        return len(self.boundaries)

    @property
    def lengths(self) -> np.ndarray:
        b = np.asarray(self.boundaries)
        return np.diff(np.concatenate(([0], b)))

    def slots_of(self, m: int) -> range:
        """0-based slot range of interval m."""
        lo = 0 if m == 0 else self.boundaries[m - 1]
        return range(lo, self.boundaries[m])


def merge(per_bs: Sequence[Sequence[int]], num_slots: int) -> IntervalPartition:
    """Union of per-BS boundary lists, deduplicated and sorted."""
    merged: set[int] = set()
    for slots in per_bs:
        if not slots or int(slots[-1]) != num_slots:
            raise ValueError("each per-BS boundary list must end at the horizon")
        merged.update(int(s) for s in slots)
    return IntervalPartition(
        boundaries=tuple(sorted(merged)),
        num_slots=num_slots,
        per_bs_changing_slots=tuple(tuple(int(s) for s in slots) for slots in per_bs),
    )


def partition_profile(profile: EnergyProfile) -> IntervalPartition:
    """Per-BS changing slots of a harvest profile, merged."""
    per_bs = [[b for b, _ in power_change_slots(profile.E[l])] for l in range(profile.num_bs)]
    return merge(per_bs, profile.num_slots)


def per_bs_levels(profile: EnergyProfile, partition: IntervalPartition) -> np.ndarray:
    """Per-BS flattest-spend level within each merged interval, shape (M, L).

    A BS's level is constant between its own boundaries, so it is well defined
    on the finer merged grid.
    """
    M = partition.num_intervals
    L = profile.num_bs
    levels = np.zeros((M, L))
    for l in range(L):
        staircase = power_change_slots(profile.E[l])
        j = 0
        for m, b in enumerate(partition.boundaries):
            while staircase[j][0] < b:
                j += 1
            levels[m, l] = staircase[j][1]
    return levels
