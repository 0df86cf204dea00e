"""Brute-force verifiers, deliberately independent of the closed forms they check."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .game import (DEFAULT_ALPHA, PriceVector, cue_constants, d2d_change_constants,
                   d2d_keep_constants, utility)
from .model import Allocation, qos_satisfied, rebuild_sharing_sets, sum_rate
from .netgen import NetworkInstance

MAX_GRID_POINTS = 10_000_001


def power_grid(p_max: float, step: float) -> np.ndarray:
    """``{0, step, 2*step, ...}`` up to ``p_max``, with ``p_max`` itself appended."""
    if not step > 0:
        raise ValueError("step must be > 0")
    k = int(np.floor(p_max / step + 1e-9))
    if k + 2 > MAX_GRID_POINTS:
        raise ValueError("grid too fine")
    g = np.arange(k + 1) * step
    if g[-1] < p_max:
        g = np.append(g, p_max)
    return g


def grid_best_power(gamma: float, q: float, p_max: float, step: float,
                    method: str = "scan") -> float:
    """Grid argmax of ``log2(1 + p*gamma) - p*q`` over ``[0, p_max]``.

    ``scan`` evaluates every grid point.  ``bisect`` uses only that the sampled
    utility is a concave sequence and bisects on the sign of its forward
    difference; it needs O(log K) evaluations and still never touches the
    stationary-point formula.
    """
    if method == "scan":
        g = power_grid(p_max, step)
        return float(g[np.argmax(utility(g, gamma, q))])
    if method != "bisect":
        raise ValueError("method must be 'scan' or 'bisect'")
    if not step > 0:
        raise ValueError("step must be > 0")
    k_last = int(np.floor(p_max / step + 1e-9))
    size = k_last + 1 + (k_last * step < p_max)
    point = lambda k: p_max if k > k_last else k * step
    lo, hi = 0, size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if utility(point(mid + 1), gamma, q) > utility(point(mid), gamma, q):
            lo = mid + 1
        else:
            hi = mid
    return float(point(lo))


@dataclass
class Deviation:
    player: str  # "c3" or "d7"
    improvement: float
    current_payoff: float
    best_payoff: float
    best_channel: int | None = None
    best_power: float = 0.0


@dataclass
class EquilibriumReport:
    max_improvement: float
    worst: Deviation | None
    n_players: int

    def is_equilibrium(self, tol: float = 1e-6) -> bool:
        return self.max_improvement < tol


def _grid_max(gamma, q, p_max, rel_step):
    g = power_grid(p_max, rel_step * p_max)
    u = utility(g, gamma, q)
    k = int(np.argmax(u))
    return float(u[k]), float(g[k])


def verify_equilibrium(inst: NetworkInstance, alloc: Allocation, prices: PriceVector,
                       grid_step: float = 1e-3, alpha: float = DEFAULT_ALPHA) -> EquilibriumReport:
    """Largest unilateral payoff gain available to any player.

    ``grid_step`` is relative to each player's power cap.  D2D deviations span
    every channel (keep or move) and staying out (payoff 0).  An equilibrium
    reports ``max_improvement <= 0`` up to rounding.
    """
    sets = rebuild_sharing_sets(alloc, inst.n)
    worst, best_gain = None, -np.inf
    for i in range(inst.n):
        c = cue_constants(inst, alloc, sets, prices, i, alpha)
        cur = float(utility(alloc.p_c[i], c.gamma_eff, c.q))
        top, p = _grid_max(c.gamma_eff, c.q, float(inst.p_c_max[i]), grid_step)
        if top - cur > best_gain:
            best_gain = top - cur
            worst = Deviation(f"c{i}", top - cur, cur, top, i, p)
    for j in range(inst.m):
        ch = int(alloc.channel[j])
        if ch < inst.n:
            c = d2d_keep_constants(inst, alloc, sets, prices, j, alpha)
            cur = float(utility(alloc.p_d[j], c.gamma_eff, c.q))
        else:
            cur = 0.0
        top, top_ch, top_p = 0.0, inst.n, 0.0  # staying out
        for i in range(inst.n):
            if i == ch:
                c = d2d_keep_constants(inst, alloc, sets, prices, j, alpha)
            else:
                c = d2d_change_constants(inst, alloc, sets, prices, j, i, alpha)
            u, p = _grid_max(c.gamma_eff, c.q, float(inst.p_d_max[j]), grid_step)
            if u > top:
                top, top_ch, top_p = u, i, p
        if top - cur > best_gain:
            best_gain = top - cur
            worst = Deviation(f"d{j}", top - cur, cur, top, top_ch, top_p)
    if worst is None:
        return EquilibriumReport(0.0, None, 0)
    return EquilibriumReport(float(best_gain), worst, inst.n + inst.m)


# ------------------------------------------------------------ exhaustive search

@dataclass
class ExhaustiveResult:
    feasible: bool
    value: float
    alloc: Allocation | None
    evaluated: int


def _best_on_channel(inst, i, pairs, levels_c, levels_d, chunk=1 << 20):
    """Best gridded (p_c, p_pairs) on channel ``i`` meeting every target there."""
    k = len(pairs)
    sig = inst.noise
    grids = [levels_c[i]] + [levels_d[j] for j in pairs]
    sizes = [len(g) for g in grids]
    total = int(np.prod(sizes))
    best_v, best_p = -np.inf, None
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(total, start + chunk)), sizes)
        pc = grids[0][idx[0]]
        pd = [grids[t + 1][idx[t + 1]] for t in range(k)]
        interf_c = sum((pd[t] * inst.h_db[j] for t, j in enumerate(pairs)), np.zeros_like(pc))
        s_c = pc * inst.h_c[i] / (sig + interf_c)
        ok = s_c >= inst.gamma_c_min[i]
        val = np.log2(1.0 + s_c)
        for t, j in enumerate(pairs):
            interf = sig + pc * inst.h_cd[i, j]
            for u, l in enumerate(pairs):
                if l != j:
                    interf = interf + pd[u] * inst.h_dd[l, j]
            s = pd[t] * inst.h_d[j] / interf
            ok &= s >= inst.gamma_d_min[j]
            val = val + np.log2(1.0 + s)
        val = np.where(ok, val, -np.inf)
        a = int(np.argmax(val))
        if val[a] > best_v:
            best_v = float(val[a])
            best_p = (float(pc[a]), [float(x[a]) for x in pd])
    return best_v, best_p, total


def exhaustive_small(inst: NetworkInstance, power_grid_size: int = 16) -> ExhaustiveResult:
    """Exact optimum of the joint admission/channel/power problem on a power grid.

    Power levels are ``p_max * k / G`` for ``k = 1..G``.  The sum rate splits
    per channel, so each (channel, pair subset) sub-problem is solved once and
    assignments are combined from the cache.
    """
    n, m, g = inst.n, inst.m, int(power_grid_size)
    if n > 2 or m > 4 or not 1 <= g <= 32:
        raise ValueError("exhaustive_small is limited to N <= 2, M <= 4, grid <= 32")
    frac = np.arange(1, g + 1) / g
    levels_c = [inst.p_c_max[i] * frac for i in range(n)]
    levels_d = [inst.p_d_max[j] * frac for j in range(m)]
    cache, evaluated = {}, 0

    def sub(i, pairs):
        nonlocal evaluated
        key = (i, pairs)
        if key not in cache:
            v, p, cnt = _best_on_channel(inst, i, list(pairs), levels_c, levels_d)
            cache[key] = (v, p)
            evaluated += cnt
        return cache[key]

    best_v, best_assign = -np.inf, None
    for assign in itertools.product(range(n + 1), repeat=m):
        total = 0.0
        for i in range(n):
            v, _ = sub(i, tuple(j for j in range(m) if assign[j] == i))
            total += v
            if total == -np.inf:
                break
        if total > best_v:
            best_v, best_assign = total, assign
    if best_assign is None or best_v == -np.inf:
        return ExhaustiveResult(False, -np.inf, None, evaluated)

    alloc = Allocation.empty(inst)
    for i in range(n):
        pairs = tuple(j for j in range(m) if best_assign[j] == i)
        _, (pc, pds) = sub(i, pairs)
        alloc.p_c[i] = pc
        for j, p in zip(pairs, pds):
            alloc.channel[j], alloc.p_d[j] = i, p
    if not qos_satisfied(inst, alloc):  # pragma: no cover
        raise RuntimeError("exhaustive optimum failed re-evaluation")
    return ExhaustiveResult(True, sum_rate(inst, alloc), alloc, evaluated)
