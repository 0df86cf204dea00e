"""Two-phase distributed allocation loop (game to fixed point, then pricing).

``run_dsera`` cycles the step-by-step price update over CUE indices;
``run_scheme3`` is the same loop with whole price updating.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numba
import numpy as np

from .game import (DEFAULT_ALPHA, GameState, PriceVector, _sweep_kernel, power_delta,
                   run_to_fixed_point)
from .model import (Allocation, _sinr_kernel, all_sinrs, qos_satisfied, qos_violations, rates,
                    sum_rate)
from .netgen import NetworkInstance
from .pricing import PricingParams, RateSnapshot, qos_flags, step_update, whole_update

STEP_BY_STEP = "step_by_step"
WHOLE = "whole"


@dataclass(frozen=True)
class DseraConfig:
    epsilon_rel: float = 1e-6
    max_inner_iters: int = 30
    max_outer_iters: int = 500
    pricing: PricingParams = field(default_factory=PricingParams)
    price_scheme: str = STEP_BY_STEP
    alpha_cost: float = DEFAULT_ALPHA
    skip_rule: bool = True
    # unadmit violators when the outer cap is hit so a QoS-valid allocation is returned
    repair_on_cap: bool = True
    shuffle_players: bool = False
    shuffle_seed: int = 0
    trace: bool = False
    # run the whole loop in one compiled call (ignored when tracing or shuffling)
    compiled: bool = True

    def __post_init__(self):
        if not self.epsilon_rel > 0:
            raise ValueError("epsilon_rel must be > 0")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.price_scheme not in (STEP_BY_STEP, WHOLE):
            raise ValueError(f"unknown price_scheme {self.price_scheme!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "DseraConfig":
        d = dict(d)
        if "pricing" in d and isinstance(d["pricing"], dict):
            d["pricing"] = PricingParams(**d["pricing"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunOutcome:
    algorithm: str
    alloc: Allocation
    prices: PriceVector | None
    status: str  # "satisfied" | "cap" | "infeasible"
    converged: bool
    qos_satisfied: bool
    outer_iters: int = 0
    total_inner_iters: int = 0
    skips: int = 0
    repaired: int = 0
    rates_c: np.ndarray = None
    rates_d: np.ndarray = None
    sum_rate: float = 0.0
    wall_time: float = 0.0
    trace: list = field(default_factory=list)

    @property
    def n_admitted(self) -> int:
        return int(np.count_nonzero(self.alloc.channel < len(self.alloc.p_c)))

    @property
    def n_unadmitted(self) -> int:
        return len(self.alloc.channel) - self.n_admitted

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm, "status": self.status,
            "converged": self.converged, "qos_satisfied": self.qos_satisfied,
            "sum_rate": self.sum_rate, "n_admitted": self.n_admitted,
            "n_unadmitted": self.n_unadmitted, "outer_iters": self.outer_iters,
            "total_inner_iters": self.total_inner_iters, "skips": self.skips,
            "repaired": self.repaired, "wall_time": self.wall_time,
        }

    def to_dict(self) -> dict:
        d = self.summary()
        d["alloc"] = self.alloc.to_dict()
        d["rates_c"] = self.rates_c.tolist()
        d["rates_d"] = self.rates_d.tolist()
        return d

    def write_trace_csv(self, path) -> None:
        if not self.trace:
            return
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.trace[0]))
            w.writeheader()
            w.writerows(self.trace)


def finalize(inst: NetworkInstance, alloc: Allocation, algorithm: str, status: str,
             prices=None, t0=None, **kw) -> RunOutcome:
    """Evaluate rates and the exact QoS flag of a final allocation."""
    vc, vd = qos_violations(inst, alloc, strict=True)
    r_c, r_d = rates(inst, alloc)
    return RunOutcome(
        algorithm=algorithm, alloc=alloc, prices=prices, status=status,
        converged=status == "satisfied", qos_satisfied=not (vc.any() or vd.any()),
        rates_c=r_c, rates_d=r_d, sum_rate=sum_rate(inst, alloc),
        wall_time=0.0 if t0 is None else time.perf_counter() - t0, **kw,
    )


def repair(inst: NetworkInstance, alloc: Allocation) -> int:
    """Drop pairs until every CUE and admitted pair meets its threshold.

    Each round removes the violating pair with the lowest SINR margin, or, if only
    CUEs violate, the sharer injecting the most interference at the BS.  Returns
    the number of pairs removed.  CUE powers are left untouched except that a CUE
    left alone on its channel is raised to its cap.
    """
    n, removed = inst.n, 0
    while True:
        vc, vd = qos_violations(inst, alloc, strict=True)
        if not (vc.any() or vd.any()):
            break
        if vd.any():
            margin = np.where(vd, all_sinrs(inst, alloc)[1] / inst.gamma_d_min, np.inf)
            j = int(np.argmin(margin))
        else:
            i = int(np.flatnonzero(vc)[0])
            on = np.flatnonzero(alloc.channel == i)
            if on.size == 0:
                alloc.p_c[i] = inst.p_c_max[i]
                if alloc.p_c[i] * inst.h_c[i] / inst.noise < inst.gamma_c_min[i]:
                    break
                continue
            j = int(on[np.argmax(alloc.p_d[on] * inst.h_db[on])])
        alloc.channel[j], alloc.p_d[j] = n, 0.0
        removed += 1
    return removed


def _price_update(cfg, prices, snap, i):
    if cfg.price_scheme == WHOLE:
        whole_update(prices, snap, cfg.pricing)
    else:
        step_update(prices, snap, i, cfg.pricing)


def run_dsera(inst: NetworkInstance, config: DseraConfig | None = None,
              algorithm: str = "dsera") -> RunOutcome:
    cfg = config or DseraConfig()
    t0 = time.perf_counter()
    n = inst.n
    if not inst.cue_solo_feasible().all():
        alloc = Allocation.empty(inst)
        alloc.p_c[:] = inst.p_c_max
        return finalize(inst, alloc, algorithm, "infeasible", t0=t0)

    prices = PriceVector.uniform(n, inst.m, cfg.pricing.theta_init)
    state = GameState(inst, Allocation.empty(inst), prices, cfg.alpha_cost)
    tol = cfg.epsilon_rel * float(max(inst.p_c_max.max(), inst.p_d_max.max() if inst.m else 0.0))
    if cfg.compiled and not (cfg.trace or cfg.shuffle_players):
        status, outer, inner_total, skips = _compiled_loop(state, cfg, tol)
        return _wrap_up(inst, state, cfg, algorithm, status, prices, t0, outer, inner_total,
                        skips, [])
    rng = np.random.default_rng(cfg.shuffle_seed) if cfg.shuffle_players else None

    i, outer, inner_total, skips, consecutive_skips, loops = 0, 0, 0, 0, 0, 0
    trace = []
    status = "cap"
    snap = RateSnapshot.take(inst, state.alloc, cfg.pricing)
    while True:
        if not (snap.cue_low.any() or snap.d2d_low.any()):
            status = "satisfied"
            break
        if loops >= cfg.max_outer_iters:
            break
        loops += 1
        on_i = snap.channel == i
        if (cfg.skip_rule and outer > 0 and snap.cue_low[i] and on_i.any()
                and snap.d2d_low[on_i].all() and consecutive_skips < n - 1):
            # every node on channel i is below target: leave its prices alone this round
            skips += 1
            consecutive_skips += 1
            i = (i + 1) % n
            continue
        consecutive_skips = 0
        ok, sweeps, deltas = run_to_fixed_point(state, tol, cfg.max_inner_iters, rng)
        inner_total += sweeps
        snap = RateSnapshot.take(inst, state.alloc, cfg.pricing)
        if cfg.trace:
            trace.append({
                "outer": outer, "cue": i, "inner_iters": sweeps, "inner_converged": ok,
                "last_delta": deltas[-1], "sum_rate": float(snap.r_c.sum() + snap.r_d.sum()),
                "cue_violations": int(snap.cue_low.sum()),
                "d2d_violations": int(snap.d2d_low.sum()),
                "admitted": int(np.count_nonzero(snap.channel < n)),
            })
        if not (snap.cue_low.any() or snap.d2d_low.any()):
            status = "satisfied"
            outer += 1
            break
        _price_update(cfg, prices, snap, i)
        outer += 1
        i = (i + 1) % n

    return _wrap_up(inst, state, cfg, algorithm, status, prices, t0, outer, inner_total,
                    skips, trace)


def _wrap_up(inst, state, cfg, algorithm, status, prices, t0, outer, inner_total, skips, trace):
    removed = 0
    if cfg.repair_on_cap and (status == "cap" or not qos_satisfied(inst, state.alloc)):
        removed = repair(inst, state.alloc)
    return finalize(inst, state.alloc, algorithm, status, prices=prices, t0=t0,
                    outer_iters=outer, total_inner_iters=inner_total, skips=skips,
                    repaired=removed, trace=trace)


_STATUS = {0: "satisfied", 1: "cap"}


def _compiled_loop(state: GameState, cfg: DseraConfig, tol: float):
    inst, w, pr, al, pp = state.inst, state.weights, state.prices, state.alloc, cfg.pricing
    code, outer, inner, skips = _dsera_kernel(
        inst.h_c, inst.h_d, inst.h_cd, inst.h_dd, inst.h_db, inst.noise,
        inst.p_c_max, inst.p_d_max, w.w_cd, w.w_db, w.w_dd,
        pr.theta_cd, pr.theta_d, pr.theta_dd, al.p_c, al.p_d, al.channel,
        inst.gamma_c_min, inst.gamma_d_min, inst.r_c_min, inst.r_d_min,
        pp.lambda1, pp.lambda2, pp.zeta, pp.literal_d2d_oversat,
        cfg.price_scheme == WHOLE, cfg.skip_rule, tol, cfg.max_inner_iters, cfg.max_outer_iters)
    state.sweeps += inner
    return _STATUS[code], int(outer), int(inner), int(skips)


@numba.njit(cache=True)
def _any_violation(cue_low, d2d_low):
    return cue_low.any() or d2d_low.any()


@numba.njit(cache=True)
def _scale_prices(th_cd, th_d, th_dd, ch, cue_low, cue_high, d2d_low, d2d_high,
                  up, down, whole, i_step):
    """In-place price update; mirrors ``whole_update`` / ``step_update``."""
    n = th_cd.shape[0]
    m = ch.shape[0]
    for j in range(m):
        c = ch[j]
        if c >= n or (not whole and c != i_step):
            continue
        f = up if cue_low[c] else (down if cue_high[c] else 1.0)
        th_d[j] *= f
    for j in range(m):
        c = ch[j]
        if c >= n or (not whole and c != i_step):
            continue
        f = up if d2d_low[j] else (down if d2d_high[j] else 1.0)
        if f == 1.0:
            continue
        th_cd[c, j] *= f
        for k in range(m):
            if k != j and ch[k] == c:
                th_dd[k, j] *= f


@numba.njit(cache=True)
def _dsera_kernel(h_c, h_d, h_cd, h_dd, h_db, noise, pc_max, pd_max, w_cd, w_db, w_dd,
                  th_cd, th_d, th_dd, p_c, p_d, ch, gc_min, gd_min, rc_min, rd_min,
                  lambda1, lambda2, zeta, literal, whole, skip_rule, tol, max_inner, max_outer):
    n = h_c.shape[0]
    m = h_d.shape[0]
    cue_order = np.arange(n)
    d2d_order = np.arange(m)
    up = 1.0 + lambda1
    down = 1.0 - lambda2
    i = 0
    outer = 0
    inner_total = 0
    skips = 0
    consecutive = 0
    loops = 0
    g_c, g_d = _sinr_kernel(h_c, h_d, h_cd, h_dd, h_db, noise, p_c, p_d, ch)
    r_c, r_d, cue_low, cue_high, d2d_low, d2d_high = qos_flags(
        g_c, g_d, ch, gc_min, gd_min, rc_min, rd_min, zeta, literal)
    while True:
        if not _any_violation(cue_low, d2d_low):
            return 0, outer, inner_total, skips
        if loops >= max_outer:
            return 1, outer, inner_total, skips
        loops += 1
        if skip_rule and outer > 0 and cue_low[i] and consecutive < n - 1:
            any_on = False
            all_low = True
            for j in range(m):
                if ch[j] == i:
                    any_on = True
                    if not d2d_low[j]:
                        all_low = False
            if any_on and all_low:
                skips += 1
                consecutive += 1
                i = (i + 1) % n
                continue
        consecutive = 0
        for it in range(max_inner):
            pc0 = p_c.copy()
            pd0 = p_d.copy()
            changes = _sweep_kernel(h_c, h_d, h_cd, h_dd, h_db, noise, pc_max, pd_max,
                                    w_cd, w_db, w_dd, th_cd, th_d, th_dd, p_c, p_d, ch,
                                    cue_order, d2d_order)
            inner_total += 1
            if power_delta(pc0, pd0, p_c, p_d) <= tol and changes == 0:
                break
        g_c, g_d = _sinr_kernel(h_c, h_d, h_cd, h_dd, h_db, noise, p_c, p_d, ch)
        r_c, r_d, cue_low, cue_high, d2d_low, d2d_high = qos_flags(
            g_c, g_d, ch, gc_min, gd_min, rc_min, rd_min, zeta, literal)
        if not _any_violation(cue_low, d2d_low):
            return 0, outer + 1, inner_total, skips
        _scale_prices(th_cd, th_d, th_dd, ch, cue_low, cue_high, d2d_low, d2d_high,
                      up, down, whole, i)
        outer += 1
        i = (i + 1) % n


def run_scheme3(inst: NetworkInstance, config: DseraConfig | None = None) -> RunOutcome:
    cfg = replace(config or DseraConfig(), price_scheme=WHOLE)
    return run_dsera(inst, cfg, algorithm="scheme3")


def save_outcome(outcome: RunOutcome, path) -> None:
    Path(path).write_text(json.dumps(outcome.to_dict(), sort_keys=True))
