"""Comparison algorithms: two cost-only pricing schemes, 3Step matching and a
greedy multi-sharing allocator (DenseCell reconstruction).

Scheme 1 / Scheme 2 utilities carry no rate reward, so a pair's power is the
smallest one meeting its own SINR target on a channel, and its payoff for the
admission decision is ``R^{d,min}_j - p * cost``.  CUEs transmit at full power.
"""
from __future__ import annotations

import math
import time
from dataclasses import replace

import numba
import numpy as np
from scipy.optimize import linear_sum_assignment

from .dsera import WHOLE, DseraConfig, finalize, repair
from .game import PriceVector
from .model import Allocation, qos_satisfied
from .netgen import NetworkInstance
from .pricing import RateSnapshot, whole_update

_SHRINK = 1e-9


# ---------------------------------------------------------------- scheme 1 / 2

@numba.njit(cache=True)
def _min_power_sweep(h_cd, h_dd, h_d, noise, p_c, pd_max, gamma_min, r_min,
                     q_bs, q_dd, p_d, ch):
    """One Gauss-Seidel pass of min-QoS-power best responses.

    ``q_bs[j, i]`` is pair j's per-watt cost towards the BS on channel i and
    ``q_dd[j, k]`` its per-watt cost towards pair k's receiver.  Returns the
    number of channel changes.
    """
    n = p_c.shape[0]
    m = h_d.shape[0]
    interf = np.empty(n)
    cost = np.empty(n)
    changes = 0
    for j in range(m):
        interf[:] = 0.0
        cost[:] = 0.0
        for k in range(m):
            c = ch[k]
            if c < n and k != j:
                interf[c] += p_d[k] * h_dd[k, j]
                cost[c] += q_dd[j, k]
        best_u = 0.0
        best_p = 0.0
        best_i = n
        for i in range(n):
            # aim a hair above the target so re-evaluation in another summation order holds
            p = gamma_min[j] * (1.0 + 1e-9) * (noise + p_c[i] * h_cd[i, j] + interf[i]) / h_d[j]
            if p > pd_max[j]:
                continue
            u = r_min[j] - p * (q_bs[j, i] + cost[i])
            if u > best_u or (u == best_u and best_i < n and p < best_p):
                best_u = u
                best_p = p
                best_i = i
        if best_i != ch[j]:
            changes += 1
        ch[j] = best_i
        p_d[j] = best_p
    return changes


def _cost_only_loop(inst: NetworkInstance, cfg: DseraConfig, algorithm: str, per_link: bool):
    t0 = time.perf_counter()
    n, m = inst.n, inst.m
    alloc = Allocation.empty(inst)
    alloc.p_c[:] = inst.p_c_max
    if not inst.cue_solo_feasible().all():
        return finalize(inst, alloc, algorithm, "infeasible", t0=t0)
    params = cfg.pricing
    prices = PriceVector.uniform(n, m, params.theta_init)
    ratio_bs = inst.h_db[:, None] / inst.h_c[None, :]  # (M, N)
    ratio_dd = inst.h_dd / inst.h_d[None, :]  # Tx j -> Rx k over k's direct gain
    np.fill_diagonal(ratio_dd, 0.0)
    theta_cl = np.full(n, params.theta_init)
    tol = cfg.epsilon_rel * float(inst.p_d_max.max()) if m else 0.0

    outer = inner_total = 0
    status = "cap"
    while True:
        if per_link:
            q_bs = prices.theta_d[:, None] * ratio_bs
            q_dd = prices.theta_dd * ratio_dd
        else:
            q_bs = theta_cl[None, :] * ratio_bs
            q_dd = np.zeros((m, m))
        for _ in range(cfg.max_inner_iters):
            before = alloc.p_d.copy()
            changes = _min_power_sweep(inst.h_cd, inst.h_dd, inst.h_d, inst.noise, alloc.p_c,
                                       inst.p_d_max, inst.gamma_d_min, inst.r_d_min,
                                       q_bs, q_dd, alloc.p_d, alloc.channel)
            inner_total += 1
            if changes == 0 and np.linalg.norm(alloc.p_d - before) <= tol:
                break
        snap = RateSnapshot.take(inst, alloc, params)
        if not (snap.cue_low.any() or snap.d2d_low.any()):
            status = "satisfied"
            break
        if outer >= cfg.max_outer_iters:
            break
        if per_link:
            whole_update(prices, snap, params)
        else:
            theta_cl *= np.where(snap.cue_low, 1.0 + params.lambda1,
                                 np.where(snap.cue_high, 1.0 - params.lambda2, 1.0))
        outer += 1

    removed = 0
    if cfg.repair_on_cap and (status == "cap" or not qos_satisfied(inst, alloc)):
        removed = repair(inst, alloc)
    if not per_link:
        prices = PriceVector(np.zeros((n, m)), theta_cl.copy(), np.zeros((m, m)))
    return finalize(inst, alloc, algorithm, status, prices=prices, t0=t0, outer_iters=outer,
                    total_inner_iters=inner_total, repaired=removed)


def run_scheme1(inst: NetworkInstance, config: DseraConfig | None = None):
    """One price per cellular link, raised or lowered on that CUE's QoS only."""
    cfg = replace(config or DseraConfig(), price_scheme=WHOLE)
    return _cost_only_loop(inst, cfg, "scheme1", per_link=False)


def run_scheme2(inst: NetworkInstance, config: DseraConfig | None = None):
    """Per-link prices with channel-gain-ratio costs, whole updating."""
    cfg = replace(config or DseraConfig(), price_scheme=WHOLE)
    return _cost_only_loop(inst, cfg, "scheme2", per_link=True)


# ---------------------------------------------------------------------- 3Step

def _rate(x):
    return np.log2(1.0 + x)


def pair_weights(inst: NetworkInstance, edge_points: int = 257):
    """Best joint rate of each (CUE i, pair j) sharing channel i under both QoS targets.

    Returns ``(weight, p_c, p_d)`` arrays of shape (N, M); infeasible cells have
    weight ``-inf``.  The optimum lies on the ``p_c = P^c_max`` or
    ``p_d = P^d_max`` edge, so both edges are scanned over their feasible
    interval on a uniform grid that includes the interval ends.
    """
    n, m = inst.n, inst.m
    sig = inst.noise
    hc = inst.h_c[:, None]
    hcd = inst.h_cd
    hd = inst.h_d[None, :]
    hdb = inst.h_db[None, :]
    gc = inst.gamma_c_min[:, None]
    gd = inst.gamma_d_min[None, :]
    pc_max = inst.p_c_max[:, None] * np.ones((1, m))
    pd_max = np.ones((n, 1)) * inst.p_d_max[None, :]
    t = np.linspace(0.0, 1.0, edge_points)

    def scan(lo, hi, fixed_pc):
        lo = lo * (1.0 + _SHRINK)
        hi = hi * (1.0 - _SHRINK)
        ok = lo <= hi
        var = lo[..., None] + (hi - lo)[..., None] * t
        if fixed_pc:
            pc, pd = np.broadcast_to(pc_max[..., None], var.shape), var
        else:
            pc, pd = var, np.broadcast_to(pd_max[..., None], var.shape)
        s_c = pc * hc[..., None] / (sig + pd * hdb[..., None])
        s_d = pd * hd[..., None] / (sig + pc * hcd[..., None])
        feas = ok[..., None] & (s_c >= gc[..., None]) & (s_d >= gd[..., None])
        with np.errstate(invalid="ignore"):  # empty intervals give negative powers
            val = np.where(feas, _rate(s_c) + _rate(s_d), -np.inf)
        k = np.argmax(val, axis=-1)
        take = lambda a: np.take_along_axis(a, k[..., None], axis=-1)[..., 0]
        return take(val), take(pc), take(pd)

    # edge p_c = P^c_max: own target gives p_d >= lo, CUE target gives p_d <= hi
    lo1 = gd * (sig + pc_max * hcd) / hd
    hi1 = np.minimum(pd_max, (pc_max * hc / gc - sig) / hdb)
    v1, c1, d1 = scan(lo1, hi1, True)
    # edge p_d = P^d_max: CUE target gives p_c >= lo, pair target gives p_c <= hi
    lo2 = gc * (sig + pd_max * hdb) / hc
    hi2 = np.minimum(pc_max, (pd_max * hd / gd - sig) / hcd)
    v2, c2, d2 = scan(lo2, hi2, False)
    use2 = v2 > v1
    return np.where(use2, v2, v1), np.where(use2, c2, c1), np.where(use2, d2, d1)


def max_weight_matching(gain: np.ndarray):
    """Maximum-weight matching with at most one column per row and vice versa.

    Entries that are non-finite or non-positive are never matched.  Returns the
    list of matched ``(row, col)`` and the total weight.
    """
    g = np.where(np.isfinite(gain) & (gain > 0), gain, 0.0)
    if g.size == 0:
        return [], 0.0
    rows, cols = linear_sum_assignment(g, maximize=True)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if g[r, c] > 0]
    return pairs, float(sum(g[r, c] for r, c in pairs))


def run_3step(inst: NetworkInstance, config=None, edge_points: int = 257):
    """Assignment-based sharing: at most one pair per cellular link."""
    t0 = time.perf_counter()
    alloc = Allocation.empty(inst)
    alloc.p_c[:] = inst.p_c_max
    solo = _rate(inst.p_c_max * inst.h_c / inst.noise)
    if inst.m:
        w, pc, pd = pair_weights(inst, edge_points)
        pairs, _ = max_weight_matching(w - solo[:, None])
        for i, j in pairs:
            alloc.channel[j], alloc.p_c[i], alloc.p_d[j] = i, pc[i, j], pd[i, j]
    removed = repair(inst, alloc)  # guards rounding on the shrunken interval ends
    status = "infeasible" if not inst.cue_solo_feasible().all() else "satisfied"
    return finalize(inst, alloc, "3step", status, t0=t0, repaired=removed)


# ------------------------------------------------------------------ DenseCell

@numba.njit(cache=True)
def _channel_gain_of(j, i, h_c, h_cd, h_dd, h_d, h_db, noise, p_c, gamma_c, gamma_d,
                     pd_max, p_d, ch, n_pts):
    """Best sum-rate change of channel ``i`` if pair ``j`` joins it, and the power used."""
    m = h_d.shape[0]
    interf_c = 0.0
    interf_j = p_c[i] * h_cd[i, j]
    for k in range(m):
        if ch[k] == i:
            interf_c += p_d[k] * h_db[k]
            interf_j += p_d[k] * h_dd[k, j]
    lo = gamma_d[j] * (noise + interf_j) / h_d[j]
    hi = min(pd_max[j], (p_c[i] * h_c[i] / gamma_c[i] - noise - interf_c) / h_db[j])
    for k in range(m):
        if ch[k] != i:
            continue
        ik = noise + p_c[i] * h_cd[i, k]
        for l in range(m):
            if l != k and ch[l] == i:
                ik += p_d[l] * h_dd[l, k]
        hi = min(hi, (p_d[k] * h_d[k] / gamma_d[k] - ik) / h_dd[j, k])
    lo *= 1.0 + 1e-9
    hi *= 1.0 - 1e-9
    if not lo <= hi:
        return -np.inf, 0.0
    base_c = math.log2(1.0 + p_c[i] * h_c[i] / (noise + interf_c))
    best_g, best_p = -np.inf, 0.0
    for t in range(n_pts):
        p = lo + (hi - lo) * t / (n_pts - 1) if n_pts > 1 else hi
        g = (math.log2(1.0 + p_c[i] * h_c[i] / (noise + interf_c + p * h_db[j])) - base_c
             + math.log2(1.0 + p * h_d[j] / (noise + interf_j)))
        for k in range(m):
            if ch[k] != i:
                continue
            ik = noise + p_c[i] * h_cd[i, k]
            for l in range(m):
                if l != k and ch[l] == i:
                    ik += p_d[l] * h_dd[l, k]
            s = p_d[k] * h_d[k]
            g += math.log2(1.0 + s / (ik + p * h_dd[j, k])) - math.log2(1.0 + s / ik)
        if g > best_g:
            best_g, best_p = g, p
    return best_g, best_p


@numba.njit(cache=True)
def _channel_rate(i, h_c, h_cd, h_dd, h_d, h_db, noise, p_c, gamma_c, gamma_d, p_d, ch):
    """Sum rate of channel ``i``, or -inf if any link on it misses its target."""
    m = h_d.shape[0]
    interf_c = 0.0
    for k in range(m):
        if ch[k] == i:
            interf_c += p_d[k] * h_db[k]
    s = p_c[i] * h_c[i] / (noise + interf_c)
    if s < gamma_c[i]:
        return -np.inf
    total = math.log2(1.0 + s)
    for k in range(m):
        if ch[k] != i:
            continue
        ik = noise + p_c[i] * h_cd[i, k]
        for l in range(m):
            if l != k and ch[l] == i:
                ik += p_d[l] * h_dd[l, k]
        s = p_d[k] * h_d[k] / ik
        if s < gamma_d[k]:
            return -np.inf
        total += math.log2(1.0 + s)
    return total


@numba.njit(cache=True)
def _reoptimize_channel(i, h_c, h_cd, h_dd, h_d, h_db, noise, p_c, gamma_c, gamma_d, pd_max,
                        p_d, ch, n_pts, passes):
    """Coordinate passes: each pair on ``i`` moves to the grid power in
    ``[0, P^d_max]`` that maximises the channel's rate while all targets hold."""
    m = h_d.shape[0]
    for _ in range(passes):
        moved = False
        for k in range(m):
            if ch[k] != i:
                continue
            cur = p_d[k]
            best = _channel_rate(i, h_c, h_cd, h_dd, h_d, h_db, noise, p_c, gamma_c, gamma_d,
                                 p_d, ch)
            best_p = cur
            for t in range(1, n_pts + 1):
                p_d[k] = pd_max[k] * t / n_pts
                r = _channel_rate(i, h_c, h_cd, h_dd, h_d, h_db, noise, p_c, gamma_c, gamma_d,
                                  p_d, ch)
                if r > best:
                    best, best_p = r, p_d[k]
            p_d[k] = best_p
            if best_p != cur:
                moved = True
        if not moved:
            break


@numba.njit(cache=True)
def _densecell_kernel(h_c, h_cd, h_dd, h_d, h_db, noise, p_c, gamma_c, gamma_d, pd_max,
                      p_d, ch, n_pts, passes):
    n = h_c.shape[0]
    m = h_d.shape[0]
    gain = np.full((m, n), -np.inf)
    power = np.zeros((m, n))
    for j in range(m):
        for i in range(n):
            gain[j, i], power[j, i] = _channel_gain_of(j, i, h_c, h_cd, h_dd, h_d, h_db, noise,
                                                       p_c, gamma_c, gamma_d, pd_max, p_d,
                                                       ch, n_pts)
    admitted = 0
    while True:
        best_g, bj, bi = 0.0, -1, -1
        for j in range(m):
            if ch[j] < n:
                continue
            for i in range(n):
                if gain[j, i] > best_g:
                    best_g, bj, bi = gain[j, i], j, i
        if bj < 0:
            break
        ch[bj] = bi
        p_d[bj] = power[bj, bi]
        admitted += 1
        if passes > 0:
            _reoptimize_channel(bi, h_c, h_cd, h_dd, h_d, h_db, noise, p_c, gamma_c, gamma_d,
                                pd_max, p_d, ch, n_pts, passes)
        for j in range(m):
            if ch[j] == n:
                gain[j, bi], power[j, bi] = _channel_gain_of(j, bi, h_c, h_cd, h_dd, h_d, h_db,
                                                             noise, p_c, gamma_c, gamma_d,
                                                             pd_max, p_d, ch, n_pts)
    return admitted


def run_densecell(inst: NetworkInstance, config=None, power_points: int = 17,
                  reopt_passes: int = 2):
    """Greedy multi-sharing: repeatedly admit the (pair, channel) with the largest
    feasible sum-rate gain, keeping every already-served link at its target.

    After each admission the powers on the affected channel get up to
    ``reopt_passes`` coordinate passes over a ``power_points`` grid.
    """
    t0 = time.perf_counter()
    alloc = Allocation.empty(inst)
    alloc.p_c[:] = inst.p_c_max
    if not inst.cue_solo_feasible().all():
        return finalize(inst, alloc, "densecell", "infeasible", t0=t0)
    if inst.m:
        _densecell_kernel(inst.h_c, inst.h_cd, inst.h_dd, inst.h_d, inst.h_db, inst.noise,
                          alloc.p_c, inst.gamma_c_min, inst.gamma_d_min, inst.p_d_max,
                          alloc.p_d, alloc.channel, power_points, reopt_passes)
    removed = repair(inst, alloc)
    return finalize(inst, alloc, "densecell", "satisfied", t0=t0, repaired=removed)


ALGORITHMS = ("dsera", "scheme1", "scheme2", "scheme3", "3step", "densecell")


def get_algorithm(name: str):
    from .dsera import run_dsera, run_scheme3
    table = {"dsera": run_dsera, "scheme3": run_scheme3, "scheme1": run_scheme1,
             "scheme2": run_scheme2, "3step": run_3step, "densecell": run_densecell}
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}") from None
