"""Closed-form maximum RF charged energy and the energy-optimal beam direction.

Ignoring the data receiver, the best the BS cluster can do for the energy
receiver over the horizon is to transmit along a fixed unit direction whose
per-BS amplitude shares equal each BS's share of total harvest and whose
phases match the energy channel. Any causal total-power sequence that
exhausts the harvest achieves the same delivered energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EnergyProfile, Scenario, SystemParams


@dataclass(frozen=True)
class EnergyMaxSolution:
    """Energy-optimal fixed direction, its delivered energy, and one causal power schedule.

    direction: unit complex vector, |direction_l|^2 = (BS l's total harvest) / (all harvest);
    rf_energy: delivered energy, Joules, post-conversion;
    powers:    per-slot total transmit energy, greedy earliest-maximal.
    """

    direction: np.ndarray
    rf_energy: float
    powers: np.ndarray


def rf_capacity(power: np.ndarray, g: np.ndarray) -> float:
    """Maximum RF energy (pre-conversion) deliverable in one slot under per-BS caps.

    Attained by full per-BS power with phases aligned to g.
    """
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValueError("powers must be nonnegative")
    mag = np.abs(np.asarray(g, dtype=complex)).reshape(-1)
    if mag.size != power.size:
        raise ValueError("power and g must have the same length")
    return float(np.sum(mag * np.sqrt(power)) ** 2)


def greedy_power_schedule(cum_budget: np.ndarray) -> np.ndarray:
    """Earliest-maximal per-slot totals under a cumulative budget curve.

    powers[n] = cum_budget[n] - cum_budget[n-1] running maximum; spends as soon
    as the budget allows and exhausts it by the last slot.
    """
    cum_budget = np.asarray(cum_budget, dtype=float)
    # a cumulative budget must be non-decreasing; a running max guards rounding
    ceiling = np.maximum.accumulate(cum_budget)
    powers = np.diff(np.concatenate(([0.0], ceiling)))
    return np.maximum(powers, 0.0)


def max_rf_energy(profile: EnergyProfile, g: np.ndarray, params: SystemParams) -> EnergyMaxSolution:
    """Closed-form maximum RF charged energy over the horizon.

    BSs with zero total harvest get a zero weight and drop out of the share
    denominators. An all-zero profile yields zero energy and a zero schedule.
    """
    g = np.asarray(g, dtype=complex).reshape(-1)
    if g.size != profile.num_bs:
        raise ValueError("g length does not match profile")
    totals = profile.totals()
    grand = float(totals.sum())
    eta = params.conversion_efficiency
    if grand <= 0.0:
        return EnergyMaxSolution(
            direction=np.zeros(profile.num_bs, dtype=complex),
            rf_energy=0.0,
            powers=np.zeros(profile.num_slots),
        )
    amp = np.sqrt(totals / grand)
    phase = np.ones(profile.num_bs, dtype=complex)
    nz = np.abs(g) > 0
    phase[nz] = g[nz] / np.abs(g[nz])
    direction = amp * phase
    direction = direction * (totals > 0)
    rf = eta * float(np.sum(np.abs(g) * np.sqrt(totals)) ** 2)

    share = np.abs(direction) ** 2
    active = share > 0
    cum_harvest = profile.cumulative()
    cum_budget = np.min(cum_harvest[active] / share[active, None], axis=0)
    powers = greedy_power_schedule(cum_budget)
    return EnergyMaxSolution(direction=direction, rf_energy=rf, powers=powers)


def max_rf_energy_scenario(scenario: Scenario) -> EnergyMaxSolution:
    """Convenience wrapper taking a bundled scenario."""
    return max_rf_energy(scenario.profile, scenario.channels.g, scenario.params)
