"""Second phase: multiplicative, QoS-driven interference price updates.

A receiver below its target raises the prices of the links interfering with
it by ``(1 + lambda1)``; a receiver above ``target * (1 + zeta)`` lowers them
by ``(1 - lambda2)``.  Unadmitted pairs never trigger an update.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .game import PriceVector
from .model import Allocation, all_sinrs
from .netgen import NetworkInstance


@dataclass(frozen=True)
class PricingParams:
    lambda1: float = 0.1
    lambda2: float = 0.05
    zeta: float = 0.2
    theta_init: float = 100.0
    # test pair over-satisfaction against the channel owner's CUE rate, as the
    # pseudocode literally reads; the default uses the pair's own rate
    literal_d2d_oversat: bool = False

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be > 0")
        if not 0 < self.lambda2 < 1:
            raise ValueError("lambda2 must lie in (0, 1)")
        if self.zeta < 0:
            raise ValueError("zeta must be >= 0")
        if not self.theta_init > 0:
            raise ValueError("theta_init must be > 0")


@dataclass
class RateSnapshot:
    """Rates and QoS status of one allocation, shared by all updaters."""

    channel: np.ndarray
    r_c: np.ndarray
    r_d: np.ndarray
    cue_low: np.ndarray
    cue_high: np.ndarray
    d2d_low: np.ndarray
    d2d_high: np.ndarray

    @classmethod
    def take(cls, inst: NetworkInstance, alloc: Allocation, params: PricingParams):
        g_c, g_d = all_sinrs(inst, alloc)
        r_c, r_d, cue_low, cue_high, d2d_low, d2d_high = qos_flags(
            g_c, g_d, alloc.channel, inst.gamma_c_min, inst.gamma_d_min,
            inst.r_c_min, inst.r_d_min, params.zeta, params.literal_d2d_oversat)
        return cls(channel=alloc.channel.copy(), r_c=r_c, r_d=r_d, cue_low=cue_low,
                   cue_high=cue_high, d2d_low=d2d_low, d2d_high=d2d_high)


@numba.njit(cache=True)
def qos_flags(g_c, g_d, ch, gamma_c_min, gamma_d_min, r_c_min, r_d_min, zeta, literal):
    """Rates plus below-target / above-slack masks for CUEs and admitted pairs.

    Violation is judged on SINR so it matches the final QoS check exactly;
    over-satisfaction is judged on rate.
    """
    n = g_c.shape[0]
    m = g_d.shape[0]
    r_c = np.log2(1.0 + g_c)
    r_d = np.log2(1.0 + g_d)
    cue_low = g_c < gamma_c_min
    cue_high = r_c > r_c_min * (1.0 + zeta)
    d2d_low = np.zeros(m, dtype=np.bool_)
    d2d_high = np.zeros(m, dtype=np.bool_)
    for j in range(m):
        i = ch[j]
        if i >= n:
            continue
        d2d_low[j] = g_d[j] < gamma_d_min[j]
        if d2d_low[j]:
            continue
        if literal:
            d2d_high[j] = cue_high[i]
        else:
            d2d_high[j] = r_d[j] > r_d_min[j] * (1.0 + zeta)
    return r_c, r_d, cue_low, cue_high, d2d_low, d2d_high


def _factor(low, high, params):
    return np.where(low, 1.0 + params.lambda1, np.where(high, 1.0 - params.lambda2, 1.0))


def update_prices_for_cue(prices: PriceVector, snap: RateSnapshot, i: int,
                          params: PricingParams) -> PriceVector:
    """Scale theta_d of every pair sharing channel ``i`` per CUE i's QoS (in place)."""
    f = _factor(snap.cue_low[i], snap.cue_high[i], params)
    if f != 1.0:
        on = snap.channel == i
        prices.theta_d[on] *= f
    return prices


def update_prices_for_d2d(prices: PriceVector, snap: RateSnapshot, j: int,
                          params: PricingParams) -> PriceVector:
    """Scale theta_cd[i, j] and theta_dd[k, j] (k co-sharing i) per pair j's QoS."""
    n = prices.theta_cd.shape[0]
    i = int(snap.channel[j])
    if i >= n:
        return prices
    f = _factor(snap.d2d_low[j], snap.d2d_high[j], params)
    if f != 1.0:
        prices.theta_cd[i, j] *= f
        others = np.flatnonzero(snap.channel == i)
        others = others[others != j]
        prices.theta_dd[others, j] *= f
    return prices


def _apply_d2d(prices, snap, params, mask):
    n = prices.theta_cd.shape[0]
    ch = snap.channel
    f = _factor(snap.d2d_low, snap.d2d_high, params)
    f = np.where(mask & (ch < n), f, 1.0)
    touched = np.flatnonzero(f != 1.0)
    if touched.size == 0:
        return
    prices.theta_cd[ch[touched], touched] *= f[touched]
    same = ch[:, None] == ch[None, touched]
    same[touched, np.arange(touched.size)] = False
    rows, cols = np.nonzero(same)
    prices.theta_dd[rows, touched[cols]] *= f[touched[cols]]


def whole_update(prices: PriceVector, snap: RateSnapshot, params: PricingParams) -> PriceVector:
    """Update the prices of every CUE and every admitted pair in one pass (in place)."""
    n = prices.theta_cd.shape[0]
    f_c = _factor(snap.cue_low, snap.cue_high, params)
    adm = snap.channel < n
    prices.theta_d[adm] *= f_c[snap.channel[adm]]
    _apply_d2d(prices, snap, params, np.ones(len(snap.channel), dtype=bool))
    return prices


def step_update(prices: PriceVector, snap: RateSnapshot, i: int,
                params: PricingParams) -> PriceVector:
    """Update only CUE ``i``'s prices and those of the pairs on channel ``i`` (in place)."""
    update_prices_for_cue(prices, snap, i, params)
    _apply_d2d(prices, snap, params, snap.channel == i)
    return prices
