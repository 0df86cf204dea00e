"""First phase: the pricing game among CUEs and D2D pairs.

Every player maximises ``f(p) = log2(1 + p * gamma) - p * q`` where ``gamma``
is its effective channel-to-interference ratio and ``q`` its aggregate
price-weighted distance cost.  D2D pairs additionally pick a channel, or stay
out with payoff exactly zero.

Two sweep paths exist: ``_sweep_kernel`` (numba, used by the algorithms) and
``reference_sweep`` (composed from the per-player functions below, used for
tracing and cross-checks).  They must agree bit for bit on decisions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import Allocation, NotAdmittedError, SharingIndexSets, rebuild_sharing_sets
from .netgen import NetworkInstance

LN2 = math.log(2.0)
DEFAULT_ALPHA = 3.76


@dataclass
class PriceVector:
    theta_cd: np.ndarray  # (N, M): CUE i -> Rx of pair j
    theta_d: np.ndarray  # (M,):   Tx of pair j -> BS
    theta_dd: np.ndarray  # (M, M): Tx of pair k (row) -> Rx of pair j (col)

    @classmethod
    def uniform(cls, n: int, m: int, level: float) -> "PriceVector":
        if not level > 0:
            raise ValueError("initial price must be positive")
        return cls(np.full((n, m), float(level)), np.full(m, float(level)),
                   np.full((m, m), float(level)))

    def copy(self) -> "PriceVector":
        return PriceVector(self.theta_cd.copy(), self.theta_d.copy(), self.theta_dd.copy())

    def stacked(self) -> np.ndarray:
        """Column-wise vec of the matrices, stacked as (cd, d, dd)."""
        return np.concatenate([self.theta_cd.ravel(order="F"), self.theta_d,
                               self.theta_dd.ravel(order="F")])

    def validate(self) -> None:
        for a in (self.theta_cd, self.theta_d, self.theta_dd):
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ValueError("prices must be finite and non-negative")

    def to_dict(self) -> dict:
        return {"theta_cd": self.theta_cd.tolist(), "theta_d": self.theta_d.tolist(),
                "theta_dd": self.theta_dd.tolist()}


@dataclass(frozen=True)
class UtilityConstants:
    gamma_eff: float
    q: float
    alpha_cost: float = DEFAULT_ALPHA


@dataclass(frozen=True)
class CostWeights:
    """Distance-ratio factors ``(s_interferer_to_victim / s_victim_link) ** -alpha``."""

    w_cd: np.ndarray  # (N, M) CUE i onto Rx j: (s_cd[i,j] / s_d[j]) ** -a
    w_db: np.ndarray  # (M, N) Tx j onto the BS while on channel i: (s_db[j] / s_c[i]) ** -a
    w_dd: np.ndarray  # (M, M) Tx j onto Rx k: (s_dd[j,k] / s_d[k]) ** -a
    alpha: float

    @classmethod
    def build(cls, inst: NetworkInstance, alpha: float = DEFAULT_ALPHA) -> "CostWeights":
        return cls(
            w_cd=(inst.s_cd / inst.s_d[None, :]) ** -alpha,
            w_db=(inst.s_db[:, None] / inst.s_c[None, :]) ** -alpha,
            w_dd=(inst.s_dd / inst.s_d[None, :]) ** -alpha,
            alpha=float(alpha),
        )


@dataclass
class GameState:
    inst: NetworkInstance
    alloc: Allocation
    prices: PriceVector
    alpha: float = DEFAULT_ALPHA
    sweeps: int = 0
    weights: CostWeights = field(default=None, repr=False)

    def __post_init__(self):
        if self.weights is None:
            self.weights = CostWeights.build(self.inst, self.alpha)

    @property
    def sets(self) -> SharingIndexSets:
        return rebuild_sharing_sets(self.alloc, self.inst.n)


def utility(p, gamma, q):
    """Simplified player utility ``log2(1 + p*gamma) - p*q``."""
    return np.log1p(np.multiply(p, gamma)) / LN2 - np.multiply(p, q)


def closed_form_power(q: float, gamma: float, p_max: float) -> float:
    """Maximiser of ``log2(1 + p*gamma) - p*q`` over ``[0, p_max]``.

    The stationary point ``1/(ln2 q) - 1/gamma`` clamped to the box; with
    ``q == 0`` the utility is increasing and the cap is returned.
    """
    if not gamma > 0 or not p_max > 0:
        raise ValueError("gamma and p_max must be positive")
    if q < 0:
        raise ValueError("q must be non-negative")
    return _clamped_power(float(q), float(gamma), float(p_max))


@numba.njit(cache=True)
def _clamped_power(q, gamma, p_max):
    if q <= 0.0:
        return p_max
    p = 1.0 / (LN2 * q) - 1.0 / gamma
    if p <= 0.0:
        return 0.0
    if p >= p_max:
        return p_max
    return p


def cue_constants(inst: NetworkInstance, alloc: Allocation, sets: SharingIndexSets,
                  prices: PriceVector, i: int, alpha: float = DEFAULT_ALPHA) -> UtilityConstants:
    b = np.asarray(sets.beta[i], dtype=np.int64)
    interf = float(np.sum(alloc.p_d[b] * inst.h_db[b]))
    w = (inst.s_cd[i, b] / inst.s_d[b]) ** -alpha
    q = float(np.sum(prices.theta_cd[i, b] * w))
    return UtilityConstants(float(inst.h_c[i] / (inst.noise + interf)), q, alpha)


def cue_best_response(inst, alloc, sets, prices, i, alpha=DEFAULT_ALPHA) -> float:
    c = cue_constants(inst, alloc, sets, prices, i, alpha)
    return closed_form_power(c.q, c.gamma_eff, float(inst.p_c_max[i]))


def _d2d_constants(inst, alloc, prices, j, i, others, alpha):
    others = np.asarray(others, dtype=np.int64)
    interf = (alloc.p_c[i] * inst.h_cd[i, j]
              + float(np.sum(alloc.p_d[others] * inst.h_dd[others, j])))
    q = (prices.theta_d[j] * (inst.s_db[j] / inst.s_c[i]) ** -alpha
         + float(np.sum(prices.theta_dd[j, others]
                        * (inst.s_dd[j, others] / inst.s_d[others]) ** -alpha)))
    return UtilityConstants(float(inst.h_d[j] / (inst.noise + interf)), float(q), alpha)


def d2d_keep_constants(inst, alloc, sets, prices, j, alpha=DEFAULT_ALPHA) -> UtilityConstants:
    """Constants of pair ``j`` on its current channel (co-sharers exclude ``j``)."""
    i = int(alloc.channel[j])
    if i >= inst.n:
        raise NotAdmittedError(f"D2D pair {j} is not admitted")
    others = [k for k in sets.beta[i] if k != j]
    return _d2d_constants(inst, alloc, prices, j, i, others, alpha)


def d2d_change_constants(inst, alloc, sets, prices, j, i, alpha=DEFAULT_ALPHA) -> UtilityConstants:
    """Constants of pair ``j`` if it moved to channel ``i`` joining all of beta_i."""
    if int(alloc.channel[j]) == i:
        raise ValueError("target channel equals the current channel; use d2d_keep_constants")
    if not 0 <= i < inst.n:
        raise ValueError(f"channel {i} out of range")
    return _d2d_constants(inst, alloc, prices, j, i, sets.beta[i], alpha)


def d2d_candidates(inst, alloc, sets, prices, j, alpha=DEFAULT_ALPHA):
    """Best power and payoff of pair ``j`` on each of the N channels."""
    n = inst.n
    powers, payoffs = np.zeros(n), np.zeros(n)
    for i in range(n):
        if alloc.channel[j] == i:
            c = d2d_keep_constants(inst, alloc, sets, prices, j, alpha)
        else:
            c = d2d_change_constants(inst, alloc, sets, prices, j, i, alpha)
        powers[i] = closed_form_power(c.q, c.gamma_eff, float(inst.p_d_max[j]))
        payoffs[i] = utility(powers[i], c.gamma_eff, c.q)
    return powers, payoffs


def d2d_select_strategy(inst, alloc, sets, prices, j, alpha=DEFAULT_ALPHA):
    """Return ``(channel, power, payoff)`` for pair ``j``.

    The best channel wins if its payoff is strictly positive (lowest index on
    ties); otherwise the pair stays out: ``(n, 0.0, 0.0)``.
    """
    powers, payoffs = d2d_candidates(inst, alloc, sets, prices, j, alpha)
    best = int(np.argmax(payoffs))
    if payoffs[best] > 0.0:
        return best, float(powers[best]), float(payoffs[best])
    return inst.n, 0.0, 0.0


def reference_sweep(state: GameState, cue_order=None, d2d_order=None, trace=None) -> Allocation:
    """One Gauss-Seidel pass built from the per-player functions (slow)."""
    inst, alloc, prices, a = state.inst, state.alloc, state.prices, state.alpha
    cue_order = range(inst.n) if cue_order is None else cue_order
    d2d_order = range(inst.m) if d2d_order is None else d2d_order
    sets = rebuild_sharing_sets(alloc, inst.n)
    for i in cue_order:
        alloc.p_c[i] = cue_best_response(inst, alloc, sets, prices, i, a)
        if trace is not None:
            trace.append({"player": f"c{i}", "channel": int(i), "power": float(alloc.p_c[i])})
    for j in d2d_order:
        ch, p, u = d2d_select_strategy(inst, alloc, sets, prices, j, a)
        alloc.channel[j], alloc.p_d[j] = ch, p
        sets = rebuild_sharing_sets(alloc, inst.n)
        if trace is not None:
            trace.append({"player": f"d{j}", "channel": int(ch), "power": p, "payoff": u})
    state.sweeps += 1
    return alloc


@numba.njit(cache=True)
def _sweep_kernel(h_c, h_d, h_cd, h_dd, h_db, noise, pc_max, pd_max,
                  w_cd, w_db, w_dd, th_cd, th_d, th_dd,
                  p_c, p_d, ch, cue_order, d2d_order):
    n = h_c.shape[0]
    m = h_d.shape[0]
    changes = 0
    for t in range(cue_order.shape[0]):
        i = cue_order[t]
        interf = 0.0
        q = 0.0
        for j in range(m):
            if ch[j] == i:
                interf += p_d[j] * h_db[j]
                q += th_cd[i, j] * w_cd[i, j]
        p_c[i] = _clamped_power(q, h_c[i] / (noise + interf), pc_max[i])
    interf_ch = np.empty(n)
    cost_ch = np.empty(n)
    for t in range(d2d_order.shape[0]):
        j = d2d_order[t]
        interf_ch[:] = 0.0
        cost_ch[:] = 0.0
        for k in range(m):
            c = ch[k]
            if c < n and k != j:
                interf_ch[c] += p_d[k] * h_dd[k, j]
                cost_ch[c] += th_dd[j, k] * w_dd[j, k]
        best_u = 0.0
        best_i = n
        best_p = 0.0
        for i in range(n):
            gamma = h_d[j] / (noise + p_c[i] * h_cd[i, j] + interf_ch[i])
            q = th_d[j] * w_db[j, i] + cost_ch[i]
            p = _clamped_power(q, gamma, pd_max[j])
            u = math.log1p(p * gamma) / LN2 - p * q
            if u > best_u:
                best_u = u
                best_i = i
                best_p = p
        if best_i != ch[j]:
            changes += 1
        ch[j] = best_i
        p_d[j] = best_p
    return changes


def game_sweep(state: GameState, rng=None) -> int:
    """One Gauss-Seidel pass (all CUEs, then all pairs) updating ``state`` in place.

    Returns the number of channel changes.  With ``rng`` the player order is
    shuffled within each group.
    """
    inst, w, pr, al = state.inst, state.weights, state.prices, state.alloc
    cue_order = np.arange(inst.n, dtype=np.int64)
    d2d_order = np.arange(inst.m, dtype=np.int64)
    if rng is not None:
        rng.shuffle(cue_order)
        rng.shuffle(d2d_order)
    changes = _sweep_kernel(inst.h_c, inst.h_d, inst.h_cd, inst.h_dd, inst.h_db, inst.noise,
                            inst.p_c_max, inst.p_d_max, w.w_cd, w.w_db, w.w_dd,
                            pr.theta_cd, pr.theta_d, pr.theta_dd,
                            al.p_c, al.p_d, al.channel, cue_order, d2d_order)
    state.sweeps += 1
    return int(changes)


@numba.njit(cache=True)
def power_delta(pc_before, pd_before, p_c, p_d):
    """2-norm of the change in the stacked power vector."""
    acc = 0.0
    for i in range(p_c.shape[0]):
        acc += (p_c[i] - pc_before[i]) ** 2
    for j in range(p_d.shape[0]):
        acc += (p_d[j] - pd_before[j]) ** 2
    return math.sqrt(acc)


def run_to_fixed_point(state: GameState, tol: float, max_iters: int, rng=None):
    """Repeat sweeps until the stacked power moves by at most ``tol`` (2-norm)
    and no pair switches channel.  Returns ``(converged, sweeps, deltas)``."""
    deltas = []
    for it in range(1, max_iters + 1):
        al = state.alloc
        pc0, pd0 = al.p_c.copy(), al.p_d.copy()
        changes = game_sweep(state, rng)
        delta = float(power_delta(pc0, pd0, al.p_c, al.p_d))
        deltas.append(delta)
        if delta <= tol and changes == 0:
            return True, it, deltas
    return False, max_iters, deltas
