"""Full-horizon throughput maximization with non-causal harvest knowledge.

The horizon splits into intervals at the merged per-BS power-changing slots;
one beamformer per interval is optimal, which shrinks the dual to one
multiplier per (interval, BS) cumulative-energy constraint plus one for the
horizon RF floor. The dual is minimized by a projected subgradient pass
followed by the nested L-BFGS/bisection refinement shared with the slot
solver; the primal is recovered from the final multipliers and made feasible
by a causality projection, a capacity blend toward the energy-max power
profile, and exact per-interval slot solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .energymax import EnergyMaxSolution, max_rf_energy, rf_capacity
from .intervals import IntervalPartition, partition_profile, per_bs_levels, power_change_slots
from .model import (
    BeamformingSchedule,
    ChannelState,
    ConvergenceError,
    EnergyProfile,
    Infeasible,
    Scenario,
    TradeoffCurve,
)
from .slot_solver import SlotOptions, SlotProblem, _pin_rf_mu, solve_slot

BOUNDARY_RTOL = 1e-9


@dataclass(frozen=True)
class DualState:
    """Multipliers of the interval-reduced dual: lam[m, l] >= 0 and mu >= 0."""

    lam: np.ndarray
    mu: float

    def downdate(self, channels: ChannelState, m: int) -> np.ndarray:
        """Hermitian matrix diag(suffix lam) - mu * g g^H for interval m."""
        suf = np.cumsum(self.lam[::-1], axis=0)[::-1]
        return np.diag(suf[m].astype(complex)) - self.mu * channels.energy_gram()

    def is_positive_definite(self, channels: ChannelState) -> bool:
        suf = np.cumsum(self.lam[::-1], axis=0)[::-1]
        if np.any(suf <= 0):
            return False
        s = float(np.sum(np.abs(channels.g) ** 2 / suf[-1]))
        return self.mu * s < 1.0


@dataclass(frozen=True)
class OfflineSolution:
    schedule: BeamformingSchedule
    per_interval_w: np.ndarray
    throughput: float
    rf_delivered: float
    gap: float
    iterations: int
    dual: DualState
    partition: IntervalPartition


@dataclass(frozen=True)
class OfflineOptions:
    subgradient_iters: int = 1500
    max_subgradient_iters: int = 10_000
    step_c: float = 0.4
    stall_iters: int = 250
    fit_iters: int = 300
    fit_gtol: float = 1e-12
    lbfgs_memory: int = 10
    mu_bisect_iters: int = 60
    gap_tol: float = 1e-3
    target_gap: float = 1e-6
    retries: int = 1
    slot_options: SlotOptions = SlotOptions(subgradient_iters=150, stall_iters=60)


DEFAULT_OPTIONS = OfflineOptions()


def flat_energy_powers(profile: EnergyProfile, direction: np.ndarray) -> np.ndarray:
    """Per-slot total powers of the most time-uniform energy-max schedule.

    Among all causal total-power sequences along the fixed energy-max
    direction (all of which deliver the maximum RF energy), the flattest one
    maximizes the data rate. Computed from the per-slot budget curve, so the
    result is causal at every slot.
    """
    share = np.abs(direction) ** 2
    active = share > 0
    if not np.any(active):
        return np.zeros(profile.num_slots)
    cum = profile.cumulative()
    budget = np.min(cum[active] / share[active, None], axis=0)
    per_slot = np.diff(np.concatenate(([0.0], np.maximum.accumulate(budget))))
    powers = np.zeros(profile.num_slots)
    start = 0
    for b, level in power_change_slots(per_slot):
        powers[start:b] = level
        start = b
    return powers


def _extract_powers(h, g, sigma2, suf, mu, lens, harvest, rf_floor):
    """Per-slot per-BS powers and per-slot RF of the dual inner maximizer."""
    val, p, rfv, xs, hts, binvh = K._dual_point(h, g, sigma2, suf, mu, lens, harvest, rf_floor)
    return val, p, rfv


def _causal_projection(p_hat: np.ndarray, lens: np.ndarray, cum_bound: np.ndarray) -> np.ndarray:
    """Forward pass trimming interval powers to the cumulative budgets."""
    M, L = p_hat.shape
    p = np.zeros((M, L))
    for l in range(L):
        spent = 0.0
        for m in range(M):
            alloc = min(max(p_hat[m, l], 0.0) * lens[m], cum_bound[m, l] - spent)
            alloc = max(alloc, 0.0)
            p[m, l] = alloc / lens[m]
            spent += alloc
    return p


def _distribute_floors(q_hat: np.ndarray, caps: np.ndarray, lens: np.ndarray, rf_floor: float) -> np.ndarray:
    """Per-interval RF floors: total exactly rf_floor, each below its capacity."""
    totals = np.clip(q_hat, 0.0, caps) * lens
    cap_tot = caps * lens
    total = totals.sum()
    if total > rf_floor:
        totals *= rf_floor / total
    else:
        deficit = rf_floor - total
        for _ in range(60):
            if deficit <= rf_floor * 1e-15:
                break
            head = cap_tot - totals
            head_sum = head.sum()
            if head_sum <= 0:
                break
            add = np.minimum(head, deficit * head / head_sum)
            totals += add
            deficit -= add.sum()
        # any residual (floating point) goes to the roomiest interval
        if deficit > 0:
            i = int(np.argmax(cap_tot - totals))
            totals[i] = min(totals[i] + deficit, cap_tot[i])
    return totals / lens


def _partition_with_extra(profile: EnergyProfile, extra: set) -> IntervalPartition:
    """Merged per-BS changing slots plus extra boundary slots (1-based)."""
    from .intervals import merge

    per_bs = [[b for b, _ in power_change_slots(profile.E[l])] for l in range(profile.num_bs)]
    if extra:
        per_bs.append(sorted(set(int(x) for x in extra) | {profile.num_slots}))
    return merge(per_bs, profile.num_slots)


def solve_offline(
    scenario: Scenario,
    rf_target: float,
    options: OfflineOptions = DEFAULT_OPTIONS,
    warm=None,
) -> OfflineSolution:
    """Optimal schedule delivering at least rf_target Joules (post-conversion).

    Solves the interval-reduced dual; whenever the recovered schedule breaks a
    cumulative energy constraint strictly inside an interval (possible when
    harvest is back-loaded within it), the offending slots are added as
    boundaries and the problem re-solved on the finer grid, so the returned
    schedule is causal at every slot and the dual value of any grid is a valid
    upper bound.

    Raises Infeasible when rf_target exceeds the horizon maximum, and
    ConvergenceError (carrying the best iterate) when the relative duality gap
    cannot be brought below options.gap_tol.
    """
    params = scenario.params
    channels = scenario.channels
    profile = scenario.profile
    eta = params.conversion_efficiency
    sigma2 = params.noise_variance
    if rf_target < 0:
        raise ValueError("rf_target must be nonnegative")

    emax = max_rf_energy(profile, channels.g, params)
    qmax = emax.rf_energy
    if rf_target > qmax * (1.0 + BOUNDARY_RTOL) + 1e-300:
        raise Infeasible(
            f"RF target {rf_target:.6g} J exceeds the horizon maximum {qmax:.6g} J",
            shortfall=rf_target - qmax,
        )
    N = params.num_slots
    L = params.num_bs

    if rf_target >= qmax * (1.0 - BOUNDARY_RTOL) and qmax > 0:
        # the target pins every slot to the energy-max direction; the flattest
        # causal power profile is rate-optimal within that family
        powers = flat_energy_powers(profile, emax.direction)
        w = np.sqrt(powers)[:, None] * emax.direction[None, :]
        schedule = BeamformingSchedule.from_weights(w, params, channels)
        steps = {b for b, _ in power_change_slots(powers)}
        partition = _partition_with_extra(profile, steps)
        bounds = np.asarray(partition.boundaries)
        lam = np.full((partition.num_intervals, L), K.LAM_FLOOR)
        return OfflineSolution(
            schedule=schedule,
            per_interval_w=w[bounds - 1].copy(),
            throughput=float(np.sum(schedule.per_slot_rate)),
            rf_delivered=float(np.sum(schedule.rf_energy)),
            gap=0.0,
            iterations=0,
            dual=DualState(lam, 0.0),
            partition=partition,
        )

    keep = profile.totals() > 0
    if not np.any(keep):
        partition = partition_profile(profile)
        w = np.zeros((N, L), dtype=complex)
        schedule = BeamformingSchedule.from_weights(w, params, channels)
        lam = np.full((partition.num_intervals, L), K.LAM_FLOOR)
        return OfflineSolution(
            schedule, w[np.asarray(partition.boundaries) - 1], 0.0, 0.0, 0.0, 0, DualState(lam, 0.0), partition
        )

    h = channels.h[keep]
    g = channels.g[keep]
    Lr = int(keep.sum())
    rf_floor = rf_target / eta
    flat_slots = flat_energy_powers(profile, emax.direction)
    share_r = np.abs(emax.direction[keep]) ** 2
    cum_full = profile.cumulative()[keep]
    harvest_full = profile.E[keep]

    opts = options
    slot_opts = opts.slot_options
    d_best = np.inf
    total_iters = 0
    extra: set = set()
    result = None

    for _refine in range(15):
        if _refine == 14:
            extra = set(range(1, N + 1))  # last resort: constrain every slot
        partition = _partition_with_extra(profile, extra)
        M = partition.num_intervals
        lens = partition.lengths.astype(float)
        bounds = np.asarray(partition.boundaries)
        cum_bound = cum_full[:, bounds - 1].T.copy()  # (M, Lr)
        harvest = np.ascontiguousarray(
            np.diff(np.concatenate((np.zeros((1, Lr)), cum_bound), axis=0), axis=0)
        )
        mask = (cum_bound <= 0.0).astype(np.uint8)

        # blend target: interval means of the flattest energy-max powers
        csum = np.concatenate(([0.0], np.cumsum(flat_slots)))
        p_flat = (np.diff(csum[np.concatenate(([0], bounds))]) / lens)[:, None] * share_r[None, :]

        # warm start from per-BS flattest-spend levels: lam ~ 1 / water level
        levels = per_bs_levels(profile, partition)[:, keep]
        habs2 = np.maximum(np.abs(h) ** 2, 1e-12 * np.max(np.abs(h) ** 2))
        suf0 = 1.0 / (np.maximum(levels, 1e-12 * np.max(levels + 1e-300)) + sigma2 / habs2[None, :])
        suf0 = np.maximum.accumulate(suf0[::-1], axis=0)[::-1]
        lam0 = np.empty((M, Lr))
        lam0[-1] = suf0[-1]
        lam0[:-1] = suf0[:-1] - suf0[1:]
        lam0 = np.maximum(lam0, K.LAM_FLOOR)
        lam0[mask == 1] = K.LAM_MASKED
        if warm is not None:
            lam_w, _mu_w = warm
            if getattr(lam_w, "shape", None) == (M, Lr):
                lam0 = np.maximum(lam_w, K.LAM_FLOOR)
                lam0[mask == 1] = K.LAM_MASKED

        lam_step = np.nanmedian(np.where(mask == 0, lam0, np.nan), axis=0)
        lam_step = np.where(np.isfinite(lam_step), np.maximum(lam_step, K.LAM_FLOOR), 1.0)
        grad_lam_ref = np.maximum(cum_bound[-1], 1e-30)
        suf_init = np.cumsum(lam0[::-1], axis=0)[::-1]
        cap0 = K._mu_cap(g, suf_init[-1])
        mu_step = cap0 / 4.0
        grad_mu_ref = max(rf_floor, qmax / eta * 0.1, 1e-30)

        best = None  # (T, w_intervals, rates, rf_per_slot, dual)
        iters = opts.subgradient_iters
        for _attempt in range(opts.retries + 1):
            lam_b, mu_b, d_sub, lam_avg, mu_avg, n_it = K._subgradient_loop(
                h,
                g,
                sigma2,
                lens,
                harvest,
                rf_floor,
                lam0,
                0.0,
                mask,
                min(iters, opts.max_subgradient_iters),
                opts.step_c,
                lam_step,
                grad_lam_ref,
                mu_step,
                grad_mu_ref,
                opts.stall_iters,
            )
            total_iters += int(n_it)
            d_best = min(d_best, d_sub)
            suf_b = np.cumsum(lam_b[::-1], axis=0)[::-1]
            suf_avg = np.cumsum(lam_avg[::-1], axis=0)[::-1]
            suf_p, mu_p, d_pol, _calls = K._polish(
                h,
                g,
                sigma2,
                lens,
                harvest,
                rf_floor,
                suf_b,
                mask,
                opts.fit_iters,
                opts.fit_gtol,
                opts.lbfgs_memory,
                opts.mu_bisect_iters,
            )
            d_best = min(d_best, d_pol)
            mu_cs = _pin_rf_mu(h, g, sigma2, lens, suf_p, rf_floor)
            cand_duals = [(suf_p, mu_p), (suf_p, mu_cs), (suf_b, mu_b), (suf_avg, mu_avg)]
            seen = []
            for suf_c, mu_c in cand_duals:
                if any(abs(mu_c - m0) <= 1e-12 * (1 + abs(m0)) and np.allclose(suf_c, s0, rtol=1e-10) for s0, m0 in seen):
                    continue
                seen.append((suf_c, mu_c))
                val, p_hat, rf_hat = _extract_powers(h, g, sigma2, suf_c, mu_c, lens, harvest, rf_floor)
                if val < K._BIG:
                    d_best = min(d_best, val)
                cand = _recover_primal(
                    h, g, sigma2, p_hat, rf_hat, lens, cum_bound, rf_floor, p_flat, suf_c, mu_c, slot_opts
                )
                if cand is not None and (best is None or cand[0] > best[0]):
                    best = cand + ((suf_c, mu_c),)
            if _rel_gap(d_best, best) <= opts.target_gap:
                break
            iters *= 3
            lam0 = lam_b

        T, w_int, rates, rf_slots, dual_used = best
        # per-slot causality audit; violations become new boundaries
        spend = np.repeat(np.abs(w_int) ** 2, partition.lengths, axis=0).T
        slack = np.cumsum(spend, axis=1) - cum_full
        tol = 1e-12 * max(1.0, float(cum_full.max()))
        bad = np.unique(np.nonzero(slack.max(axis=0) > tol)[0] + 1)
        result = (T, w_int, rates, rf_slots, dual_used, partition)
        if bad.size == 0:
            break
        extra |= {int(b) for b in bad}
        warm = None
    else:
        pass

    gap = max(0.0, (d_best - result[0]) / max(result[0], 1e-9))
    T, w_int, rates, rf_slots, dual_used, partition = result
    M = partition.num_intervals
    w_full = np.zeros((M, L), dtype=complex)
    w_full[:, keep] = w_int
    w_slots = np.repeat(w_full, partition.lengths, axis=0)
    schedule = BeamformingSchedule.from_weights(w_slots, params, channels)
    suf_u, mu_u = dual_used
    lam_u = np.empty_like(suf_u)
    lam_u[-1] = suf_u[-1]
    lam_u[:-1] = suf_u[:-1] - suf_u[1:]
    lam_full = np.full((M, L), K.LAM_FLOOR)
    lam_full[:, keep] = np.maximum(lam_u, 0.0)
    sol = OfflineSolution(
        schedule=schedule,
        per_interval_w=w_full,
        throughput=T,
        rf_delivered=float(np.sum(schedule.rf_energy)),
        gap=gap,
        iterations=total_iters,
        dual=DualState(lam_full, float(mu_u)),
        partition=partition,
    )
    if gap > opts.gap_tol:
        raise ConvergenceError(f"offline dual gap {gap:.3e} above {opts.gap_tol:.1e}", best=sol, gap=gap)
    return sol


def _rel_gap(d_best: float, best) -> float:
    if best is None:
        return np.inf
    return max(0.0, (d_best - best[0]) / max(best[0], 1e-9))


def _recover_primal(h, g, sigma2, p_hat, rf_hat, lens, cum_bound, rf_floor, p_flat, suf, mu, slot_opts):
    """Feasible schedule from dual powers: project, blend, split the floor, solve slots."""
    M, Lr = p_hat.shape
    p_tld = _causal_projection(p_hat, lens, cum_bound)
    caps = np.array([rf_capacity(p_tld[m], g) for m in range(M)])
    cap_total = float(np.sum(lens * caps))
    if cap_total < rf_floor * (1.0 + 1e-12):
        # blend toward the energy-max power profile until the floor fits
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            p_mid = (1.0 - mid) * p_tld + mid * p_flat
            caps_mid = np.array([rf_capacity(p_mid[m], g) for m in range(M)])
            if float(np.sum(lens * caps_mid)) >= rf_floor * (1.0 + 1e-12):
                hi = mid
            else:
                lo = mid
        p_tld = (1.0 - hi) * p_tld + hi * p_flat
        caps = np.array([rf_capacity(p_tld[m], g) for m in range(M)])
    floors = _distribute_floors(rf_hat, caps, lens, rf_floor) if rf_floor > 0 else np.zeros(M)
    floors = np.minimum(floors, caps)

    reduced = ChannelState(h, g)
    w_int = np.zeros((M, Lr), dtype=complex)
    rates = np.zeros(M)
    rf_slots = np.zeros(M)
    for m in range(M):
        prob = SlotProblem(p_tld[m], floors[m], reduced, sigma2)
        sol = solve_slot(prob, slot_opts, warm=(suf[m], mu))
        w_int[m] = sol.w
        rates[m] = sol.rate
        rf_slots[m] = abs(np.vdot(g, sol.w)) ** 2
    T = float(np.sum(lens * rates))
    return (T, w_int, rates, rf_slots)


def sweep_region(scenario: Scenario, num_points: int, options: OfflineOptions = DEFAULT_OPTIONS) -> TradeoffCurve:
    """Boundary of the achievable (RF energy, throughput) region.

    Solves the horizon problem on an evenly spaced RF grid up to the maximum,
    warm-starting each point from the previous one.
    """
    if num_points < 2:
        raise ValueError("num_points must be >= 2")
    emax = max_rf_energy(scenario.profile, scenario.channels.g, scenario.params)
    qmax = emax.rf_energy
    if qmax <= 0:
        sol = solve_offline(scenario, 0.0, options)
        return TradeoffCurve(points=((0.0, sol.throughput),), q_max=0.0)
    points = []
    warm = None
    keep = scenario.profile.totals() > 0
    for i in range(num_points):
        q = qmax * i / (num_points - 1)
        sol = solve_offline(scenario, q, options, warm=warm)
        points.append((q, sol.throughput))
        warm = (sol.dual.lam[:, keep], sol.dual.mu)
    return TradeoffCurve(points=tuple(points), q_max=qmax)
