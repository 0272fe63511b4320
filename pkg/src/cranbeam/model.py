"""Domain types and accessors shared by every solver.

Conventions used throughout the package:

* rates are natural-log (nats per slot); the harness converts to bits and
  bit/s only when reporting,
* energies are Joules; with the default 1 s slot length, per-slot energy and
  average power coincide numerically,
* RF floors handed to the slot solver are pre-conversion (the efficiency
  factor is applied when reporting delivered energy).

All types are immutable value objects after construction and safe to share
across concurrent workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class Infeasible(ValueError):
    """An RF energy request exceeds what the scenario can deliver."""

    def __init__(self, message: str, shortfall: float = 0.0):
        super().__init__(message)
        self.shortfall = float(shortfall)


class ConvergenceError(RuntimeError):
    """A dual solver could not certify its gap tolerance; carries the best iterate."""

    def __init__(self, message: str, best=None, gap: float = float("nan")):
        super().__init__(message)
        self.best = best
        self.gap = float(gap)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemParams:
    """Scalar system constants.

    bandwidth is carried for reporting only; the solvers never use it.
    """

    num_bs: int
    num_slots: int
    noise_variance: float
    conversion_efficiency: float
    slot_length: float = 1.0
    bandwidth: float = 1e6

    def __post_init__(self):
        if self.num_bs < 1:
            raise ValueError("num_bs must be >= 1")
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if not (self.noise_variance > 0):
            raise ValueError("noise_variance must be positive")
        if not (0.0 < self.conversion_efficiency < 1.0):
            raise ValueError("conversion_efficiency must lie in (0, 1)")
        if not (self.slot_length > 0):
            raise ValueError("slot_length must be positive")


@dataclass(frozen=True)
class ChannelState:
    """Complex channel vectors from the BSs to the data and energy receivers."""

    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=np.complex128).reshape(-1)
        g = np.array(self.g, dtype=np.complex128).reshape(-1)
        if h.shape != g.shape:
            raise ValueError("h and g must have the same length")
        if h.size == 0:
            raise ValueError("channel vectors must be non-empty")
        for name, v in (("h", h), ("g", g)):
            if not np.all(np.isfinite(v.view(np.float64))):
                raise ValueError(f"{name} must be finite")
            if not np.any(v != 0):
                raise ValueError(f"{name} must be nonzero")
        object.__setattr__(self, "h", _readonly(h))
        object.__setattr__(self, "g", _readonly(g))

    @property
    def num_bs(self) -> int:
        return self.h.size

    def energy_gram(self) -> np.ndarray:
        """Rank-one Hermitian PSD outer product of the energy channel."""
        return np.outer(self.g, self.g.conj())

    def correlation(self) -> float:
        """Normalized |<g, h>| in [0, 1]; higher means one beam serves both receivers."""
        num = abs(np.vdot(self.g, self.h))
        return float(num / (np.linalg.norm(self.g) * np.linalg.norm(self.h)))


@dataclass(frozen=True)
class EnergyProfile:
    """Per-BS, per-slot harvested energy, Joules. Shape (L, N)."""

    E: np.ndarray

    def __post_init__(self):
        E = np.array(self.E, dtype=np.float64)
        if E.ndim != 2:
            raise ValueError("E must be a 2-D (num_bs, num_slots) matrix")
        if not np.all(np.isfinite(E)):
            raise ValueError("harvested energies must be finite")
        if np.any(E < 0):
            raise ValueError("harvested energies must be nonnegative")
        object.__setattr__(self, "E", _readonly(E))

    @property
    def num_bs(self) -> int:
        return self.E.shape[0]

    @property
    def num_slots(self) -> int:
        return self.E.shape[1]

    def cumulative(self) -> np.ndarray:
        """Cumulative harvest per BS, shape (L, N)."""
        return np.cumsum(self.E, axis=1)

    def totals(self) -> np.ndarray:
        """Total harvest per BS, shape (L,)."""
        return self.E.sum(axis=1)


@dataclass(frozen=True)
class Scenario:
    """One problem instance: constants, channels and an energy profile."""

    params: SystemParams
    channels: ChannelState
    profile: EnergyProfile

    def __post_init__(self):
        if self.channels.num_bs != self.params.num_bs:
            raise ValueError("channel length does not match num_bs")
        if self.profile.E.shape != (self.params.num_bs, self.params.num_slots):
            raise ValueError("profile shape does not match (num_bs, num_slots)")

    def to_json(self) -> str:
        p, c, e = self.params, self.channels, self.profile
        return json.dumps(
            {
                "L": p.num_bs,
                "N": p.num_slots,
                "slot_length": p.slot_length,
                "noise_variance": p.noise_variance,
                "eta": p.conversion_efficiency,
                "h_re": c.h.real.tolist(),
                "h_im": c.h.imag.tolist(),
                "g_re": c.g.real.tolist(),
                "g_im": c.g.imag.tolist(),
                "E": e.E.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        d = json.loads(text)
        params = SystemParams(
            num_bs=int(d["L"]),
            num_slots=int(d["N"]),
            noise_variance=float(d["noise_variance"]),
            conversion_efficiency=float(d["eta"]),
            slot_length=float(d["slot_length"]),
        )
        h = np.asarray(d["h_re"], dtype=float) + 1j * np.asarray(d["h_im"], dtype=float)
        g = np.asarray(d["g_re"], dtype=float) + 1j * np.asarray(d["g_im"], dtype=float)
        return cls(params, ChannelState(h, g), EnergyProfile(np.asarray(d["E"], dtype=float)))


@dataclass(frozen=True)
class BeamformingSchedule:
    """Per-slot beamforming vectors with cached rates and delivered RF energy.

    w has shape (N, L). The cached arrays always equal a recomputation from w
    (see from_weights); accessors below recompute rather than trust the cache.
    """

    w: np.ndarray
    per_slot_rate: np.ndarray
    rf_energy: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.complex128)
        if w.ndim != 2:
            raise ValueError("w must be (num_slots, num_bs)")
        r = np.array(self.per_slot_rate, dtype=np.float64).reshape(-1)
        q = np.array(self.rf_energy, dtype=np.float64).reshape(-1)
        if r.size != w.shape[0] or q.size != w.shape[0]:
            raise ValueError("cached arrays must have one entry per slot")
        object.__setattr__(self, "w", _readonly(w))
        object.__setattr__(self, "per_slot_rate", _readonly(r))
        object.__setattr__(self, "rf_energy", _readonly(q))

    @classmethod
    def from_weights(cls, w: np.ndarray, params: SystemParams, channels: ChannelState) -> "BeamformingSchedule":
        w = np.asarray(w, dtype=np.complex128)
        if w.shape != (params.num_slots, params.num_bs):
            raise ValueError("w must have shape (num_slots, num_bs)")
        snr = np.abs(w @ channels.h.conj()) ** 2 / params.noise_variance
        rates = np.log1p(snr)
        rf = params.conversion_efficiency * np.abs(w @ channels.g.conj()) ** 2
        return cls(w, rates, rf)

    @property
    def num_slots(self) -> int:
        return self.w.shape[0]

    @property
    def num_bs(self) -> int:
        return self.w.shape[1]


def throughput(schedule: BeamformingSchedule, params: SystemParams, h: np.ndarray) -> float:
    """Total rate of the schedule on data channel h, nats.

    Recomputed from the beamforming weights; never read from the cache.
    """
    h = np.asarray(h, dtype=np.complex128).reshape(-1)
    if h.size != schedule.num_bs:
        raise ValueError("h length does not match schedule")
    snr = np.abs(schedule.w @ h.conj()) ** 2 / params.noise_variance
    return float(np.sum(np.log1p(snr)))


def rf_charged_energy(schedule: BeamformingSchedule, params: SystemParams, g: np.ndarray) -> float:
    """Total RF energy delivered on energy channel g, Joules (post-conversion)."""
    g = np.asarray(g, dtype=np.complex128).reshape(-1)
    if g.size != schedule.num_bs:
        raise ValueError("g length does not match schedule")
    return float(params.conversion_efficiency * np.sum(np.abs(schedule.w @ g.conj()) ** 2))


def check_causality(
    schedule: BeamformingSchedule, profile: EnergyProfile, tol: float = 1e-9
) -> tuple[bool, Optional[tuple[int, int]]]:
    """Whether cumulative per-BS spend never exceeds cumulative harvest.

    Returns (ok, first_violation) with first_violation = (bs, slot) 0-based,
    or None when feasible. Slack tol is absolute Joules.
    """
    if profile.E.shape != (schedule.num_bs, schedule.num_slots):
        raise ValueError("profile shape does not match schedule")
    spend = np.cumsum(np.abs(schedule.w.T) ** 2, axis=1)
    harvest = profile.cumulative()
    bad = spend > harvest + tol
    if not bad.any():
        return True, None
    ls, ns = np.nonzero(bad)
    k = np.argmin(ns * profile.num_bs + ls)  # earliest slot, then lowest BS
    return False, (int(ls[k]), int(ns[k]))


@dataclass(frozen=True)
class TradeoffCurve:
    """Sampled boundary of the achievable (RF energy, throughput) region."""

    points: tuple
    q_max: float
    monotone_tol: float = 1e-6

    def __post_init__(self):
        pts = tuple((float(q), float(t)) for q, t in self.points)
        object.__setattr__(self, "points", pts)
        qs = np.array([p[0] for p in pts])
        ts = np.array([p[1] for p in pts])
        if qs.size and np.any(np.diff(qs) <= 0):
            raise ValueError("q values must be strictly increasing")
        if qs.size and np.any(qs > self.q_max * (1 + 1e-12) + 1e-30):
            raise ValueError("q values must not exceed q_max")
        scale = max(1.0, float(np.max(np.abs(ts))) if ts.size else 1.0)
        if ts.size and np.any(np.diff(ts) > self.monotone_tol * scale):
            raise ValueError("throughput must be non-increasing in q")

    @property
    def q(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def T(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])
