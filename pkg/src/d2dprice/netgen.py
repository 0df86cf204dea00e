"""Random single-cell network instances for D2D-underlay uplink studies.

All quantities are stored in linear units (watts, linear power gains, linear
SINR).  dB only appears in :class:`GenParams`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

MIN_DISTANCE_M = 1.0
INSTANCE_SCHEMA = "d2dprice.instance/1"


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def gamma_min_from_rate(r_min):
    """Linear SINR threshold matching a spectral-efficiency target, ``2**r - 1``."""
    r_min = np.asarray(r_min, dtype=float)
    if np.any(r_min < 0):
        raise ValueError("minimum rate must be non-negative")
    out = np.exp2(r_min) - 1.0
    return float(out) if out.ndim == 0 else out


def rate_from_gamma(gamma):
    gamma = np.asarray(gamma, dtype=float)
    out = np.log2(1.0 + gamma)
    return float(out) if out.ndim == 0 else out


def pathloss_db(d, pl_const_db=15.3, pl_exp_coeff=37.6):
    d = np.maximum(np.asarray(d, dtype=float), MIN_DISTANCE_M)
    return pl_const_db + pl_exp_coeff * np.log10(d)


def link_gain(d, shadow_db=0.0, pl_const_db=15.3, pl_exp_coeff=37.6):
    """Linear power gain ``10**(-(PL(d) + X) / 10)``."""
    return 10.0 ** (-(pathloss_db(d, pl_const_db, pl_exp_coeff) + shadow_db) / 10.0)


@dataclass(frozen=True)
class GenParams:
    n_cues: int = 10
    m_d2d: int = 200
    cell_radius_m: float = 400.0
    noise_dbm: float = -114.0
    pl_const_db: float = 15.3
    pl_exp_coeff: float = 37.6
    shadow_std_db: float = 8.0
    p_c_max_dbm: float = 24.0
    p_d_max_dbm: float = 21.0
    qos_db_range: tuple = (0.0, 10.0)
    d2d_cluster_radius_range_m: tuple = (10.0, 40.0)
    rng_seed: int = 0
    # redraw a CUE whose solo link cannot meet its own threshold at full power
    ensure_cue_feasible: bool = True
    reciprocal_dd_shadowing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "qos_db_range", tuple(float(v) for v in self.qos_db_range))
        object.__setattr__(
            self, "d2d_cluster_radius_range_m",
            tuple(float(v) for v in self.d2d_cluster_radius_range_m),
        )
        if self.n_cues < 1:
            raise ValueError("n_cues must be >= 1")
        if self.m_d2d < 0:
            raise ValueError("m_d2d must be >= 0")
        if self.cell_radius_m <= 0 or self.shadow_std_db < 0:
            raise ValueError("cell radius must be positive and shadowing std non-negative")
        lo, hi = self.qos_db_range
        if not (0.0 <= lo < hi):
            raise ValueError(f"bad qos_db_range {self.qos_db_range}")
        lo, hi = self.d2d_cluster_radius_range_m
        if not (0.0 <= lo < hi <= self.cell_radius_m):
            raise ValueError(f"bad d2d_cluster_radius_range_m {self.d2d_cluster_radius_range_m}")

    def replace(self, **changes) -> "GenParams":
        d = asdict(self)
        d.update(changes)
        return GenParams(**d)

    @classmethod
    def from_dict(cls, d: dict) -> "GenParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown GenParams keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Geometry, gains and QoS targets of one drop.

    Indexing conventions (0-based): ``h_cd[i, j]`` is CUE i to the Rx of pair j,
    ``h_dd[k, j]`` is the Tx of pair k to the Rx of pair j (the diagonal holds the
    desired D2D gains), ``h_db[j]`` is the Tx of pair j to the BS.  Distances
    follow the same layout.
    """

    bs_xy: np.ndarray
    cue_xy: np.ndarray
    d2d_tx_xy: np.ndarray
    d2d_rx_xy: np.ndarray
    h_c: np.ndarray
    h_d: np.ndarray
    h_cd: np.ndarray
    h_dd: np.ndarray
    h_db: np.ndarray
    s_c: np.ndarray
    s_d: np.ndarray
    s_cd: np.ndarray
    s_dd: np.ndarray
    s_db: np.ndarray
    r_c_min: np.ndarray
    r_d_min: np.ndarray
    gamma_c_min: np.ndarray
    gamma_d_min: np.ndarray
    noise: float
    p_c_max: np.ndarray
    p_d_max: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.h_c)

    @property
    def m(self) -> int:
        return len(self.h_d)

    def cue_solo_feasible(self) -> np.ndarray:
        return self.p_c_max * self.h_c / self.noise >= self.gamma_c_min

    def to_dict(self) -> dict:
        d = {"schema": INSTANCE_SCHEMA}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkInstance":
        if d.get("schema") != INSTANCE_SCHEMA:
            raise ValueError(f"unsupported instance schema {d.get('schema')!r}")
        kw = {}
        for f in fields(cls):
            v = d[f.name] if f.name != "meta" else d.get("meta", {})
            if f.name in ("noise", "meta"):
                kw[f.name] = float(v) if f.name == "noise" else dict(v)
            else:
                kw[f.name] = np.asarray(v, dtype=float)
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "NetworkInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def from_positions(cls, cue_xy, tx_xy, rx_xy, *, gamma_c_min, gamma_d_min,
                       noise=dbm_to_watt(-114.0), p_c_max=dbm_to_watt(24.0),
                       p_d_max=dbm_to_watt(21.0), shadow=None, pl_const_db=15.3,
                       pl_exp_coeff=37.6) -> "NetworkInstance":
        """Deterministic instance from explicit coordinates (shadowing optional).

        ``shadow`` may be a dict with keys ``c, d, cd, dd, db`` in dB.
        """
        cue_xy = np.atleast_2d(np.asarray(cue_xy, dtype=float))
        tx_xy = np.asarray(tx_xy, dtype=float).reshape(-1, 2)
        rx_xy = np.asarray(rx_xy, dtype=float).reshape(-1, 2)
        n, m = len(cue_xy), len(tx_xy)
        geo = _geometry(np.zeros(2), cue_xy, tx_xy, rx_xy)
        shadow = shadow or {}
        z = {"c": np.zeros(n), "d": np.zeros(m), "cd": np.zeros((n, m)),
             "dd": np.zeros((m, m)), "db": np.zeros(m)}
        z.update({k: np.asarray(v, dtype=float) for k, v in shadow.items()})
        gains = _gains(geo, z, pl_const_db, pl_exp_coeff)
        gc = np.broadcast_to(np.asarray(gamma_c_min, dtype=float), (n,)).copy()
        gd = np.broadcast_to(np.asarray(gamma_d_min, dtype=float), (m,)).copy()
        return cls(
            bs_xy=np.zeros(2), cue_xy=cue_xy, d2d_tx_xy=tx_xy, d2d_rx_xy=rx_xy,
            **gains, **geo,
            r_c_min=np.log2(1.0 + gc), r_d_min=np.log2(1.0 + gd),
            gamma_c_min=gc, gamma_d_min=gd, noise=float(noise),
            p_c_max=np.broadcast_to(np.asarray(p_c_max, dtype=float), (n,)).copy(),
            p_d_max=np.broadcast_to(np.asarray(p_d_max, dtype=float), (m,)).copy(),
        )


def _dist(a, b):
    return np.maximum(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1), MIN_DISTANCE_M)


def _geometry(bs, cue_xy, tx_xy, rx_xy):
    return {
        "s_c": _dist(cue_xy, bs[None, :])[:, 0],
        "s_d": np.maximum(np.linalg.norm(tx_xy - rx_xy, axis=-1), MIN_DISTANCE_M),
        "s_cd": _dist(cue_xy, rx_xy),
        "s_dd": _dist(tx_xy, rx_xy),
        "s_db": _dist(tx_xy, bs[None, :])[:, 0],
    }


def _gains(geo, shadow, pl_const_db, pl_exp_coeff):
    g = {
        "h_c": link_gain(geo["s_c"], shadow["c"], pl_const_db, pl_exp_coeff),
        "h_d": link_gain(geo["s_d"], shadow["d"], pl_const_db, pl_exp_coeff),
        "h_cd": link_gain(geo["s_cd"], shadow["cd"], pl_const_db, pl_exp_coeff),
        "h_dd": link_gain(geo["s_dd"], shadow["dd"], pl_const_db, pl_exp_coeff),
        "h_db": link_gain(geo["s_db"], shadow["db"], pl_const_db, pl_exp_coeff),
    }
    np.fill_diagonal(g["h_dd"], g["h_d"])
    return g


def uniform_in_disk(rng, n, radius, center=(0.0, 0.0)):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)])


def generate(params: GenParams) -> NetworkInstance:
    """Draw one drop; bit-identical for identical ``params`` (seed included)."""
    rng = np.random.default_rng(params.rng_seed)
    n, m, R = params.n_cues, params.m_d2d, params.cell_radius_m
    noise = float(dbm_to_watt(params.noise_dbm))
    pcmax = float(dbm_to_watt(params.p_c_max_dbm))
    sd = params.shadow_std_db

    cue_xy = uniform_in_disk(rng, n, R)
    tx_xy = uniform_in_disk(rng, m, R)
    cluster_r = rng.uniform(*params.d2d_cluster_radius_range_m, size=m)
    rx_xy = np.empty_like(tx_xy)
    for j in range(m):
        while True:
            p = uniform_in_disk(rng, 1, cluster_r[j], center=tx_xy[j])[0]
            if np.hypot(*p) <= R:
                rx_xy[j] = p
                break
    qc_db = rng.uniform(*params.qos_db_range, size=n)
    qd_db = rng.uniform(*params.qos_db_range, size=m)
    shadow = {
        "c": rng.normal(0.0, sd, n),
        "d": rng.normal(0.0, sd, m),
        "cd": rng.normal(0.0, sd, (n, m)),
        "dd": rng.normal(0.0, sd, (m, m)),
        "db": rng.normal(0.0, sd, m),
    }
    if params.reciprocal_dd_shadowing:
        # Tx_k->Rx_j and Tx_j->Rx_k span nearly the same path; share the draw
        up = np.triu(shadow["dd"], 1)
        shadow["dd"] = up + up.T
    gamma_c = db_to_linear(qc_db)
    if params.ensure_cue_feasible:
        for i in range(n):
            for _ in range(10_000):
                h = link_gain(np.hypot(*cue_xy[i]), shadow["c"][i],
                              params.pl_const_db, params.pl_exp_coeff)
                if pcmax * h / noise >= gamma_c[i]:
                    break
                cue_xy[i] = uniform_in_disk(rng, 1, R)[0]
                shadow["c"][i] = rng.normal(0.0, sd)
            else:
                raise RuntimeError("could not draw a feasible CUE position")

    geo = _geometry(np.zeros(2), cue_xy, tx_xy, rx_xy)
    gains = _gains(geo, shadow, params.pl_const_db, params.pl_exp_coeff)
    gamma_d = db_to_linear(qd_db)
    return NetworkInstance(
        bs_xy=np.zeros(2), cue_xy=cue_xy, d2d_tx_xy=tx_xy, d2d_rx_xy=rx_xy,
        **gains, **geo,
        r_c_min=np.log2(1.0 + gamma_c), r_d_min=np.log2(1.0 + gamma_d),
        gamma_c_min=gamma_c, gamma_d_min=gamma_d,
        noise=noise,
        p_c_max=np.full(n, pcmax),
        p_d_max=np.full(m, float(dbm_to_watt(params.p_d_max_dbm))),
        meta={"rng_seed": int(params.rng_seed), "n_cues": n, "m_d2d": m},
    )


def load_gen_params(path) -> GenParams:
    """Read GenParams from a YAML or JSON file (top-level mapping or a ``network`` key)."""
    import yaml

    data = yaml.safe_load(Path(path).read_text()) or {}
    if "network" in data:
        data = data["network"]
    return GenParams.from_dict(data)
