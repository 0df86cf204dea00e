"""SINR / rate evaluation and the CUE-D2D sharing state.

Channels are 0-based.  ``channel[j] == n`` (one past the last CUE) marks an
unadmitted pair, so the sharing matrix never has to be materialised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .netgen import NetworkInstance


class NotAdmittedError(ValueError):
    """Raised when a per-pair quantity is requested for an unadmitted D2D pair."""


@dataclass
class Allocation:
    p_c: np.ndarray
    p_d: np.ndarray
    channel: np.ndarray

    @classmethod
    def empty(cls, inst: NetworkInstance) -> "Allocation":
        return cls(np.zeros(inst.n), np.zeros(inst.m), np.full(inst.m, inst.n, dtype=np.int64))

    @classmethod
    def from_dict(cls, d: dict) -> "Allocation":
        return cls(np.asarray(d["p_c"], dtype=float), np.asarray(d["p_d"], dtype=float),
                   np.asarray(d["channel"], dtype=np.int64))

    def to_dict(self) -> dict:
        return {"p_c": self.p_c.tolist(), "p_d": self.p_d.tolist(),
                "channel": self.channel.tolist()}

    def copy(self) -> "Allocation":
        return Allocation(self.p_c.copy(), self.p_d.copy(), self.channel.copy())

    def admitted(self, n: int) -> np.ndarray:
        return self.channel < n

    def sharing_matrix(self, n: int) -> np.ndarray:
        """Binary N x M matrix with at most one 1 per column."""
        psi = np.zeros((n, len(self.channel)), dtype=np.int8)
        adm = np.flatnonzero(self.channel < n)
        psi[self.channel[adm], adm] = 1
        return psi

    def stacked_power(self) -> np.ndarray:
        return np.concatenate([self.p_c, self.p_d])

    def validate(self, inst: NetworkInstance, atol: float = 0.0) -> None:
        n = inst.n
        if self.p_c.shape != (n,) or self.p_d.shape != (inst.m,) or self.channel.shape != (inst.m,):
            raise ValueError("allocation shape does not match instance")
        if np.any(self.channel < 0) or np.any(self.channel > n):
            raise ValueError("channel index out of range")
        if np.any(self.p_c < -atol) or np.any(self.p_c > inst.p_c_max + atol):
            raise ValueError("CUE power outside [0, P^c_max]")
        if np.any(self.p_d < -atol) or np.any(self.p_d > inst.p_d_max + atol):
            raise ValueError("D2D power outside [0, P^d_max]")
        if np.any(self.p_d[self.channel == n] != 0.0):
            raise ValueError("unadmitted pair with non-zero power")


@dataclass
class SharingIndexSets:
    beta: list  # beta[i] sorted pair indices on channel i; beta[n] = unadmitted

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(b) for b in self.beta])


def rebuild_sharing_sets(alloc: Allocation, n: int) -> SharingIndexSets:
    order = np.argsort(alloc.channel, kind="stable")
    bounds = np.searchsorted(alloc.channel[order], np.arange(n + 2))
    return SharingIndexSets([order[bounds[i]:bounds[i + 1]] for i in range(n + 1)])


def rate(sinr):
    """Spectral efficiency log2(1 + SINR) in bits/s/Hz."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be non-negative")
    out = np.log2(1.0 + sinr)
    return float(out) if out.ndim == 0 else out


def cue_interference(inst: NetworkInstance, alloc: Allocation) -> np.ndarray:
    w = alloc.p_d * inst.h_db
    return np.bincount(alloc.channel, weights=w, minlength=inst.n + 1)[: inst.n]


def sinr_cues(inst: NetworkInstance, alloc: Allocation) -> np.ndarray:
    return alloc.p_c * inst.h_c / (inst.noise + cue_interference(inst, alloc))


def sinr_d2ds(inst: NetworkInstance, alloc: Allocation) -> np.ndarray:
    """SINR of every pair; unadmitted pairs report 0."""
    n, ch = inst.n, alloc.channel
    adm = ch < n
    out = np.zeros(inst.m)
    if not adm.any():
        return out
    idx = np.flatnonzero(adm)
    same = (ch[idx][:, None] == ch[idx][None, :])
    np.fill_diagonal(same, False)
    # rows: interfering Tx k, cols: victim Rx j
    dd = (alloc.p_d[idx][:, None] * inst.h_dd[np.ix_(idx, idx)] * same).sum(axis=0)
    cd = alloc.p_c[ch[idx]] * inst.h_cd[ch[idx], idx]
    out[idx] = alloc.p_d[idx] * inst.h_d[idx] / (inst.noise + cd + dd)
    return out


@numba.njit(cache=True)
def _sinr_kernel(h_c, h_d, h_cd, h_dd, h_db, noise, p_c, p_d, ch):
    n = h_c.shape[0]
    m = h_d.shape[0]
    g_c = np.empty(n)
    g_d = np.zeros(m)
    interf_c = np.zeros(n)
    for j in range(m):
        if ch[j] < n:
            interf_c[ch[j]] += p_d[j] * h_db[j]
    for i in range(n):
        g_c[i] = p_c[i] * h_c[i] / (noise + interf_c[i])
    for j in range(m):
        i = ch[j]
        if i >= n:
            continue
        interf = p_c[i] * h_cd[i, j]
        for k in range(m):
            if k != j and ch[k] == i:
                interf += p_d[k] * h_dd[k, j]
        g_d[j] = p_d[j] * h_d[j] / (noise + interf)
    return g_c, g_d


def all_sinrs(inst: NetworkInstance, alloc: Allocation):
    """CUE and pair SINRs in one compiled pass (unadmitted pairs at 0)."""
    return _sinr_kernel(inst.h_c, inst.h_d, inst.h_cd, inst.h_dd, inst.h_db, inst.noise,
                        alloc.p_c, alloc.p_d, alloc.channel)


def sinr_cue(inst: NetworkInstance, alloc: Allocation, i: int) -> float:
    on = alloc.channel == i
    interf = float(np.sum(alloc.p_d[on] * inst.h_db[on]))
    return float(alloc.p_c[i] * inst.h_c[i] / (inst.noise + interf))


def sinr_d2d(inst: NetworkInstance, alloc: Allocation, j: int) -> float:
    i = int(alloc.channel[j])
    if i >= inst.n:
        raise NotAdmittedError(f"D2D pair {j} is not admitted")
    others = np.flatnonzero(alloc.channel == i)
    others = others[others != j]
    interf = alloc.p_c[i] * inst.h_cd[i, j] + np.sum(alloc.p_d[others] * inst.h_dd[others, j])
    return float(alloc.p_d[j] * inst.h_d[j] / (inst.noise + interf))


def rates(inst: NetworkInstance, alloc: Allocation):
    """Per-CUE and per-pair spectral efficiencies (unadmitted pairs at 0)."""
    g_c, g_d = all_sinrs(inst, alloc)
    return np.log2(1.0 + g_c), np.log2(1.0 + g_d)


def sum_rate(inst: NetworkInstance, alloc: Allocation) -> float:
    rc, rd = rates(inst, alloc)
    return float(rc.sum() + rd[alloc.channel < inst.n].sum())


def qos_violations(inst: NetworkInstance, alloc: Allocation, strict: bool = False):
    """Boolean masks of CUEs and admitted pairs below their SINR thresholds.

    ``strict`` also evaluates the numpy path and flags a link if either
    summation order puts it below target, so results sitting exactly on a
    threshold cannot pass one check and fail the other.
    """
    g_c, g_d = all_sinrs(inst, alloc)
    adm = alloc.channel < inst.n
    vc = g_c < inst.gamma_c_min
    vd = adm & (g_d < inst.gamma_d_min)
    if strict:
        vc |= sinr_cues(inst, alloc) < inst.gamma_c_min
        vd |= adm & (sinr_d2ds(inst, alloc) < inst.gamma_d_min)
    return vc, vd


def qos_satisfied(inst: NetworkInstance, alloc: Allocation, strict: bool = True) -> bool:
    vc, vd = qos_violations(inst, alloc, strict)
    return not (vc.any() or vd.any())
