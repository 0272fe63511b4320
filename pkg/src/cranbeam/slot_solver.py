"""Single-slot rate maximization under per-BS power caps and an RF floor.

The slot problem asks for the beamforming vector maximizing the data rate
log(1 + |h^H w|^2 / sigma^2) subject to per-BS power caps |w_l|^2 <= p_l and a
pre-conversion RF floor |g^H w|^2 >= q. It is solved through its Lagrange
dual: the inner maximizer has the closed water-filling form on the whitened
channel (see _kernels), the outer minimization runs a projected subgradient
pass followed by cyclic exact line searches, and the primal is recovered from
the final multipliers with a feasibility repair (scale down to the caps, use
zero-data-channel BSs to top up RF for free, and as a last resort rotate
toward the energy-max beam by the smallest convex step restoring the floor).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .energymax import rf_capacity
from .model import ChannelState, ConvergenceError, Infeasible

BOUNDARY_RTOL = 1e-9


@dataclass(frozen=True)
class SlotProblem:
    """One slot: per-BS power caps, pre-conversion RF floor, channels, noise power."""

    power_caps: np.ndarray
    rf_floor: float
    channels: ChannelState
    noise_variance: float

    def __post_init__(self):
        p = np.array(self.power_caps, dtype=float).reshape(-1)
        if p.size != self.channels.num_bs:
            raise ValueError("power_caps length does not match channels")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("power caps must be nonnegative and finite")
        if not (self.rf_floor >= 0):
            raise ValueError("rf_floor must be nonnegative")
        if not (self.noise_variance > 0):
            raise ValueError("noise_variance must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "power_caps", p)

    def capacity(self) -> float:
        return rf_capacity(self.power_caps, self.channels.g)


@dataclass(frozen=True)
class SlotSolution:
    """Beamformer, its rate (nats), dual multipliers and certified relative gap."""

    w: np.ndarray
    rate: float
    lam: np.ndarray
    mu: float
    gap: float


@dataclass(frozen=True)
class SlotOptions:
    subgradient_iters: int = 600
    max_subgradient_iters: int = 10_000
    step_c: float = 0.4
    stall_iters: int = 150
    fit_iters: int = 200
    fit_gtol: float = 1e-12
    lbfgs_memory: int = 8
    mu_bisect_iters: int = 60
    gap_tol: float = 1e-4
    target_gap: float = 1e-6
    retries: int = 1


DEFAULT_OPTIONS = SlotOptions()


def _mrt_beam(p: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full per-BS power, phases matched to h (zero where h vanishes)."""
    w = np.zeros(p.size, dtype=complex)
    nz = (np.abs(h) > 0) & (p > 0)
    w[nz] = np.sqrt(p[nz]) * h[nz] / np.abs(h[nz])
    return w


def _mrt_kkt_lam(p: np.ndarray, h: np.ndarray, sigma2: float) -> np.ndarray:
    """Stationary cap multipliers of the floor-free problem at the MRT point."""
    s = float(np.sum(np.abs(h) * np.sqrt(p)))
    lam = np.zeros(p.size)
    nz = p > 0
    lam[nz] = np.abs(h[nz]) * s / ((sigma2 + s * s) * np.sqrt(p[nz]))
    return lam


def _forced_energy_beam(p: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Full power, phases matched to g; BSs outside g's support serve h instead."""
    w = np.zeros(p.size, dtype=complex)
    on_g = (np.abs(g) > 0) & (p > 0)
    w[on_g] = np.sqrt(p[on_g]) * g[on_g] / np.abs(g[on_g])
    a = complex(np.vdot(h, w))
    spin = a / abs(a) if abs(a) > 0 else 1.0 + 0j
    free = (~on_g) & (p > 0) & (np.abs(h) > 0)
    w[free] = np.sqrt(p[free]) * (h[free] / np.abs(h[free])) * spin
    return w


def _repair(w: np.ndarray, p: np.ndarray, rf_floor: float, h: np.ndarray, g: np.ndarray, fe: float) -> np.ndarray:
    """Make w feasible: caps exactly, RF floor restored with minimal rate loss."""
    w = w.copy()
    w[p <= 0] = 0.0
    nz = p > 0
    if np.any(nz):
        over = np.max(np.abs(w[nz]) ** 2 / p[nz])
        if over > 1.0:
            w /= np.sqrt(over)
    need = np.sqrt(rf_floor)
    a = complex(np.vdot(g, w))
    if abs(a) >= need:
        return w
    # free top-up: BSs invisible to the data receiver can serve the floor at no rate cost
    free = (np.abs(h) == 0) & (np.abs(g) > 0) & (p > 0)
    if np.any(free):
        head = np.sqrt(p[free]) - np.abs(w[free])
        avail = float(np.sum(np.abs(g[free]) * head))
        if avail > 0:
            t = min(1.0, (need - abs(a)) / avail)
            spin = a / abs(a) if abs(a) > 0 else 1.0 + 0j
            w[free] = w[free] + t * head * (g[free] / np.abs(g[free])) * spin
            a = complex(np.vdot(g, w))
    if abs(a) >= need * (1.0 - 1e-12):
        return w
    # minimal convex rotation toward the aligned energy-max beam
    spin = a / abs(a) if abs(a) > 0 else 1.0 + 0j
    we = _forced_energy_beam(p, h, g) * spin
    keep = (np.abs(g) == 0) & (p > 0)
    we[keep] = w[keep]
    root = np.sqrt(fe)
    if root <= abs(a):
        return w
    t = (need - abs(a)) / (root - abs(a))
    t = min(max(t, 0.0), 1.0)
    return (1.0 - t) * w + t * we


def _rate_of(w: np.ndarray, h: np.ndarray, sigma2: float) -> float:
    return float(np.log1p(abs(np.vdot(h, w)) ** 2 / sigma2))


def _beam_from_dual(binvh_row: np.ndarray, x: float, ht: float) -> np.ndarray:
    if x <= 0.0 or ht <= 0.0:
        return np.zeros(binvh_row.size, dtype=complex)
    return np.sqrt(x / ht) * binvh_row


def _completions(base: np.ndarray, lam_row: np.ndarray, h, g, rf_floor) -> list:
    """Primal candidates from a dual point: the raw beam, plus a null-direction
    top-up along D^-1 g raising RF delivery to the floor (the direction that is
    free when the downdate is singular and cheap when it nearly is)."""
    out = [base]
    lam_row = np.maximum(lam_row.reshape(-1), K.LAM_FLOOR)
    u = g / lam_row
    bu = float(np.real(np.vdot(g, u)))
    if bu <= 0.0:
        return out
    a = complex(np.vdot(g, base))
    need = np.sqrt(rf_floor)
    if abs(a) < need:
        spin = a / abs(a) if abs(a) > 0 else 1.0 + 0j
        c = (need - abs(a)) / bu
        out.append(base + c * spin * u)
    return out


def _phase_candidate(r_amp: np.ndarray, h, g, rf_floor) -> np.ndarray | None:
    """Beam from fixed amplitudes and a zoomed relative-phase search (L <= 3)."""
    found, t2, t3, _gain = K._phase_refine(h, g, rf_floor, np.asarray(r_amp, dtype=float), 72, 3)
    if not found:
        return None
    w = r_amp.astype(complex).copy()
    if w.size >= 2:
        w[1] *= np.exp(1j * t2)
    if w.size == 3:
        w[2] *= np.exp(1j * t3)
    return w


def _pin_rf_mu(h, g, sigma2, lens, suf, rf_floor) -> float:
    """mu at which the inner maximizer (multipliers held fixed) delivers the floor.

    Delivery is non-decreasing in mu; the crossing pins complementary
    slackness of the RF constraint and yields a primal candidate that spends
    no extra rate on over-delivery.
    """
    if rf_floor <= 0.0 or K._total_rf(h, g, sigma2, lens, suf, 0.0) >= rf_floor:
        return 0.0
    hi = K._mu_cap(g, suf[-1]) * (1.0 - 1e-9)
    if K._total_rf(h, g, sigma2, lens, suf, hi) < rf_floor:
        return hi
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if K._total_rf(h, g, sigma2, lens, suf, mid) < rf_floor:
            lo = mid
        else:
            hi = mid
    return hi


def solve_slot(prob: SlotProblem, options: SlotOptions = DEFAULT_OPTIONS, warm=None) -> SlotSolution:
    """Solve one slot problem; gap is certified against the covariance relaxation.

    warm optionally carries (lam, mu) multipliers (reduced to BSs with positive
    caps) to start from. Raises Infeasible when the floor exceeds what the
    caps can deliver.

    The relaxation is provably rank-one tight for one or two BSs; for three or
    more BSs with a hard-binding floor it occasionally is not, in which case
    the returned beam is still the best rank-one found (exhaustive phase
    search) and gap honestly reports the distance to the relaxation bound.
    """
    h_full = prob.channels.h
    g_full = prob.channels.g
    p_full = prob.power_caps
    sigma2 = prob.noise_variance
    q = float(prob.rf_floor)
    L = p_full.size

    fe = rf_capacity(p_full, g_full)
    if q > fe * (1.0 + BOUNDARY_RTOL) + 1e-300:
        raise Infeasible(
            f"RF floor {q:.6g} exceeds the slot capacity {fe:.6g}", shortfall=q - fe
        )
    if not np.any(p_full > 0):
        return SlotSolution(np.zeros(L, dtype=complex), 0.0, np.zeros(L), 0.0, 0.0)
    if q <= 0.0:
        w = _mrt_beam(p_full, h_full)
        lam = _mrt_kkt_lam(p_full, h_full, sigma2)
        return SlotSolution(w, _rate_of(w, h_full, sigma2), lam, 0.0, 0.0)
    if q >= fe * (1.0 - BOUNDARY_RTOL):
        # the floor pins the beam to the energy-max direction (up to a global
        # phase and BSs outside g's support); exact by construction
        w = _forced_energy_beam(p_full, h_full, g_full)
        return SlotSolution(w, _rate_of(w, h_full, sigma2), np.zeros(L), 0.0, 0.0)

    keep = p_full > 0
    h = h_full[keep]
    g = g_full[keep]
    p = p_full[keep]
    fe_r = rf_capacity(p, g)

    lens = np.ones(1)
    harvest = p.reshape(1, -1).copy()
    mask = np.zeros((1, p.size), dtype=np.uint8)

    lam0 = _mrt_kkt_lam(p, h, sigma2)
    ref = max(float(np.max(lam0)), 1e-6 / (float(np.max(p)) + sigma2))
    lam0 = np.maximum(lam0, 1e-3 * ref).reshape(1, -1)
    lam_step = np.maximum(lam0[0], 1e-3 * ref)
    grad_lam_ref = np.maximum(p, 1e-30)
    cap0 = K._mu_cap(g, lam0[0])
    mu_step = cap0 / 4.0
    grad_mu_ref = max(fe_r, 1e-30)
    mu0 = 0.0
    if warm is not None:
        lam_w, mu_w = warm
        lam_w = np.maximum(np.asarray(lam_w, dtype=float).reshape(-1), K.LAM_FLOOR)
        if lam_w.size == p.size:
            lam0 = lam_w.reshape(1, -1).copy()
            mu0 = min(max(float(mu_w), 0.0), K._mu_cap(g, lam0[0]) * (1.0 - 1e-12))

    opts = options
    d_best = np.inf
    best_w = None
    best_rate = -1.0
    best_dual = (lam0[0].copy(), 0.0)
    iters = opts.subgradient_iters
    for attempt in range(opts.retries + 1):
        lam_b, mu_b, d_sub, lam_avg, mu_avg, _n = K._subgradient_loop(
            h,
            g,
            sigma2,
            lens,
            harvest,
            q,
            lam0,
            mu0,
            mask,
            min(iters, opts.max_subgradient_iters),
            opts.step_c,
            lam_step,
            grad_lam_ref,
            mu_step,
            grad_mu_ref,
            opts.stall_iters,
        )
        d_best = min(d_best, d_sub)
        suf_p, mu_p, d_pol, _evals = K._polish(
            h,
            g,
            sigma2,
            lens,
            harvest,
            q,
            lam_b.copy(),
            mask,
            opts.fit_iters,
            opts.fit_gtol,
            opts.lbfgs_memory,
            opts.mu_bisect_iters,
        )
        d_best = min(d_best, d_pol)
        mu_cs = _pin_rf_mu(h, g, sigma2, lens, suf_p, q)
        duals = [(suf_p[0], mu_p), (suf_p[0], mu_cs), (lam_b[0], mu_b), (lam_avg[0], mu_avg)]
        for lam_c, mu_c in duals:
            suf_c = np.asarray(lam_c, dtype=float).reshape(1, -1)
            val, pw, rfv, xs, hts, binvh = K._dual_point(h, g, sigma2, suf_c, mu_c, lens, harvest, q)
            if val < K._BIG:
                d_best = min(d_best, val)
            base = _beam_from_dual(binvh[0], xs[0], hts[0])
            for w_c in _completions(base, np.asarray(lam_c, dtype=float), h, g, q):
                w_c = _repair(w_c, p, q, h, g, fe_r)
                r_c = _rate_of(w_c, h, sigma2)
                if r_c > best_rate:
                    best_rate = r_c
                    best_w = w_c
                    best_dual = (np.asarray(lam_c, dtype=float).copy(), float(mu_c))
        # the repaired floor-free beam is a cheap extra candidate
        w_c = _repair(_mrt_beam(p, h), p, q, h, g, fe_r)
        r_c = _rate_of(w_c, h, sigma2)
        if r_c > best_rate:
            best_rate = r_c
            best_w = w_c
        gap = max(0.0, (d_best - best_rate) / max(best_rate, 1e-9))
        if gap <= opts.target_gap:
            break
        # boundary mode: the dual infimum may sit where the rank-one downdate
        # turns singular (multipliers orthogonalizing h and g); fit the
        # boundary restriction and certify a bound from nearby interior points
        for lam_start in (suf_p[0], lam_b[0]):
            lam_start = np.maximum(lam_start, K.LAM_FLOOR)
            y_bd = np.log(lam_start)
            chg_char = float(np.sum(np.abs(g) * np.abs(h) / lam_start))
            rho_base = (1.0 + abs(d_pol)) / max(chg_char * chg_char, 1e-300)
            for rho in (1e2, 1e5, 1e8, 1e10):
                K._slot_boundary_fit(h, g, sigma2, p, q, y_bd, rho * rho_base, opts.fit_iters, opts.fit_gtol)
            d_bd, lam_bd, mu_bd = K._slot_boundary_bound(h, g, sigma2, p, q, y_bd)
            if d_bd < d_best:
                d_best = d_bd
            val, pw, rfv, xs, hts, binvh = K._dual_point(
                h, g, sigma2, lam_bd.reshape(1, -1), mu_bd, lens, harvest, q
            )
            base = _beam_from_dual(binvh[0], xs[0], hts[0])
            for w_c in _completions(base, lam_bd, h, g, q):
                w_c = _repair(w_c, p, q, h, g, fe_r)
                r_c = _rate_of(w_c, h, sigma2)
                if r_c > best_rate:
                    best_rate = r_c
                    best_w = w_c
                    best_dual = (lam_bd.copy(), float(mu_bd))
        # amplitude patterns with exhaustive (zoomed) relative-phase search;
        # recovers the best rank-one beam when the relaxation is not tight
        if p.size <= 3:
            patterns = [np.sqrt(p)]
            if best_w is not None:
                patterns.append(np.minimum(np.abs(best_w), np.sqrt(p)))
            for r_amp in patterns:
                w_c = _phase_candidate(r_amp, h, g, q)
                if w_c is None:
                    continue
                w_c = _repair(w_c, p, q, h, g, fe_r)
                r_c = _rate_of(w_c, h, sigma2)
                if r_c > best_rate:
                    best_rate = r_c
                    best_w = w_c
        gap = max(0.0, (d_best - best_rate) / max(best_rate, 1e-9))
        if gap <= opts.target_gap:
            break
        iters *= 4
        lam0 = lam_b

    gap = max(0.0, (d_best - best_rate) / max(best_rate, 1e-9))
    w_out = np.zeros(L, dtype=complex)
    w_out[keep] = best_w
    lam_out = np.zeros(L)
    lam_out[keep] = best_dual[0]
    sol = SlotSolution(w_out, best_rate, lam_out, best_dual[1], gap)
    if gap > 0.5:
        raise ConvergenceError(f"slot dual gap {gap:.3e}", best=sol, gap=gap)
    return sol


def slot_rate(
    power_caps: np.ndarray,
    rf_floor: float,
    channels: ChannelState,
    noise_variance: float,
    options: SlotOptions = DEFAULT_OPTIONS,
) -> float:
    """Optimal rate of the slot problem, nats (convenience wrapper)."""
    return solve_slot(SlotProblem(power_caps, rf_floor, channels, noise_variance), options).rate
