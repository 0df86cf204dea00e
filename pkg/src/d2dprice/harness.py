"""Monte-Carlo sweep driver, metrics and plot-data emission.

Every algorithm at a sweep point sees the same instances (paired drops), and
the instance seed is a pure function of ``(base_seed, point index, drop)`` so
re-running a spec reproduces every CSV bit for bit.

CSV schemas
-----------
``records.csv``   one row per (axis value, drop, algorithm): see ``RECORD_FIELDS``.
``summary.csv``   one row per (axis value, algorithm): see ``SUMMARY_FIELDS``.
``figN_*.csv``    plot data with columns ``axis, algorithm, mean, std, n``.
``timing.csv``    per-record wall time; the only file that differs between reruns.
"""
from __future__ import annotations

import csv
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import ALGORITHMS, get_algorithm
from .dsera import DseraConfig, RunOutcome
from .netgen import GenParams, generate

log = logging.getLogger(__name__)

AXES = ("n_cues", "density")
DEFAULT_VALUES = {"n_cues": (6, 8, 10, 12, 14, 16), "density": (4, 8, 12, 16, 20)}

RECORD_FIELDS = ("axis", "drop", "seed", "algorithm", "n_cues", "m_d2d", "sum_rate",
                 "average_rate", "n_admitted", "admission_ratio", "outer_iters",
                 "inner_iters", "status", "qos_satisfied", "error")
SUMMARY_FIELDS = ("axis", "algorithm", "n", "sum_rate_mean", "sum_rate_std",
                  "average_rate_mean", "admission_ratio_mean", "outer_iters_mean",
                  "inner_iters_mean", "failures")
TIMING_FIELDS = ("axis", "drop", "algorithm", "wall_time")
PLOT_FIELDS = ("axis", "algorithm", "mean", "std", "n")

# (axis, metric, comparison-with-3step/densecell) -> figure analogue
FIGURES = {
    ("n_cues", "sum_rate", False): "fig2", ("density", "sum_rate", False): "fig3",
    ("n_cues", "average_rate", False): "fig4", ("density", "average_rate", False): "fig5",
    ("n_cues", "sum_rate", True): "fig6", ("density", "sum_rate", True): "fig7",
    ("n_cues", "average_rate", True): "fig8", ("density", "average_rate", True): "fig9",
}


def average_rate(outcome: RunOutcome, denominator: str = "served") -> float:
    """Sum rate per link: over served links (N + admitted) or over all N + M."""
    n = len(outcome.alloc.p_c)
    if denominator == "served":
        links = n + outcome.n_admitted
    elif denominator == "all":
        links = n + len(outcome.alloc.channel)
    else:
        raise ValueError("denominator must be 'served' or 'all'")
    return outcome.sum_rate / links


def drop_seed(base_seed: int, point: int, drop: int) -> int:
    """Instance seed for one drop, shared by every algorithm at that point."""
    return int(np.random.SeedSequence([base_seed, point, drop]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentSpec:
    algorithms: tuple = ("dsera", "scheme3", "scheme2", "scheme1")
    axis: str = "density"
    values: tuple = None
    drops: int = 100
    network: GenParams = field(default_factory=GenParams)
    dsera: DseraConfig = field(default_factory=DseraConfig)
    n_cues: int = 10  # held fixed when sweeping density
    density: int = 20  # M/N held fixed when sweeping n_cues
    out_dir: str = "results"
    base_seed: int = 0
    average_denominator: str = "served"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.values is None:
            object.__setattr__(self, "values", DEFAULT_VALUES.get(self.axis, ()))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        if self.drops < 1:
            raise ValueError("drops must be >= 1")
        if not self.values:
            raise ValueError("at least one axis value is required")

    def shape(self, value: int):
        """(N, M) at one axis value."""
        if self.axis == "n_cues":
            return value, value * self.density
        return self.n_cues, value * self.n_cues

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        if isinstance(d.get("network"), dict):
            d["network"] = GenParams.from_dict(d["network"])
        if isinstance(d.get("dsera"), dict):
            d["dsera"] = DseraConfig.from_dict(d["dsera"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        import yaml

        data = yaml.safe_load(Path(path).read_text()) or {}
        exp = dict(data.get("experiment", {}))
        for key in ("network", "dsera"):
            if key in data:
                exp[key] = data[key]
        return cls.from_dict(exp)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithms"] = list(self.algorithms)
        d["values"] = list(self.values)
        return d


@dataclass
class RunReport:
    spec: ExperimentSpec
    records: list

    def summary(self) -> list:
        """Aggregate per (axis, algorithm); a pure function of ``records``."""
        groups = {}
        for r in self.records:
            groups.setdefault((r["axis"], r["algorithm"]), []).append(r)
        order = {a: k for k, a in enumerate(self.spec.algorithms)}
        rows = []
        for (ax, alg) in sorted(groups, key=lambda k: (k[0], order.get(k[1], 99))):
            ok = [r for r in groups[(ax, alg)] if not r["error"]]
            col = lambda name: np.array([r[name] for r in ok], dtype=float)
            mean = lambda name: float(col(name).mean()) if ok else float("nan")
            rows.append({
                "axis": ax, "algorithm": alg, "n": len(ok),
                "sum_rate_mean": mean("sum_rate"),
                "sum_rate_std": float(col("sum_rate").std(ddof=1)) if len(ok) > 1 else 0.0,
                "average_rate_mean": mean("average_rate"),
                "admission_ratio_mean": mean("admission_ratio"),
                "outer_iters_mean": mean("outer_iters"),
                "inner_iters_mean": mean("inner_iters"),
                "wall_time_mean": mean("wall_time"),
                "failures": len(groups[(ax, alg)]) - len(ok),
            })
        return rows

    def values(self, algorithm: str, metric: str = "sum_rate", axis=None) -> np.ndarray:
        """Per-drop metric for one algorithm, ordered by (axis, drop)."""
        rows = [r for r in self.records if r["algorithm"] == algorithm and not r["error"]
                and (axis is None or r["axis"] == axis)]
        rows.sort(key=lambda r: (r["axis"], r["drop"]))
        return np.array([r[metric] for r in rows], dtype=float)

    def mean(self, algorithm: str, metric: str = "sum_rate", axis=None) -> float:
        return float(self.values(algorithm, metric, axis).mean())


def _record(spec, value, drop, seed, alg, n, m, outcome=None, error=""):
    base = {"axis": value, "drop": drop, "seed": seed, "algorithm": alg, "n_cues": n,
            "m_d2d": m, "error": error}
    if outcome is None:
        nan = float("nan")
        base.update(sum_rate=nan, average_rate=nan, n_admitted=0, admission_ratio=nan,
                    outer_iters=0, inner_iters=0, wall_time=nan, status="error",
                    qos_satisfied=False)
        return base
    base.update(
        sum_rate=outcome.sum_rate,
        average_rate=average_rate(outcome, spec.average_denominator),
        n_admitted=outcome.n_admitted,
        admission_ratio=outcome.n_admitted / m if m else 0.0,
        outer_iters=outcome.outer_iters, inner_iters=outcome.total_inner_iters,
        wall_time=outcome.wall_time, status=outcome.status,
        qos_satisfied=bool(outcome.qos_satisfied),
    )
    return base


def run_drop(spec: ExperimentSpec, point: int, drop: int) -> list:
    """All selected algorithms on one instance; failures become error rows."""
    value = spec.values[point]
    n, m = spec.shape(value)
    seed = drop_seed(spec.base_seed, point, drop)
    try:
        inst = generate(spec.network.replace(n_cues=n, m_d2d=m, rng_seed=seed))
    except Exception:
        err = traceback.format_exc(limit=1).strip().splitlines()[-1]
        return [_record(spec, value, drop, seed, a, n, m, error=err) for a in spec.algorithms]
    rows = []
    for alg in spec.algorithms:
        try:
            out = get_algorithm(alg)(inst, spec.dsera)
            rows.append(_record(spec, value, drop, seed, alg, n, m, out))
        except Exception as exc:  # recorded, never aborts the sweep
            log.warning("drop %s/%s %s failed: %s", value, drop, alg, exc)
            rows.append(_record(spec, value, drop, seed, alg, n, m, error=repr(exc)))
    return rows


def _run_task(args):
    return run_drop(*args)


def run_experiment(spec: ExperimentSpec, write: bool = True, progress=None) -> RunReport:
    """Run every (point, drop) and aggregate; writes CSVs to ``spec.out_dir``."""
    tasks = [(spec, p, d) for p in range(len(spec.values)) for d in range(spec.drops)]
    records = []
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            for rows in pool.map(_run_task, tasks):
                records.extend(rows)
    else:
        for k, t in enumerate(tasks):
            records.extend(_run_task(t))
            if progress:
                progress(k + 1, len(tasks))
    order = {a: k for k, a in enumerate(spec.algorithms)}
    records.sort(key=lambda r: (r["axis"], r["drop"], order[r["algorithm"]]))
    report = RunReport(spec, records)
    if write:
        write_report(report, spec.out_dir)
    return report


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(header), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})


def write_report(report: RunReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "records.csv", RECORD_FIELDS, report.records)
    _write_csv(out / "summary.csv", SUMMARY_FIELDS, report.summary())
    _write_csv(out / "timing.csv", TIMING_FIELDS, report.records)
    return ([out / "records.csv", out / "summary.csv", out / "timing.csv"]
            + emit_plot_data(report, out))


def emit_plot_data(report: RunReport, out_dir) -> list:
    """One CSV per figure analogue with columns ``axis, algorithm, mean, std, n``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = report.spec
    comparison = bool({"3step", "densecell"} & set(spec.algorithms))
    summary = report.summary()
    paths = []
    for metric in ("sum_rate", "average_rate"):
        name = FIGURES[(spec.axis, metric, comparison)]
        rows = []
        for s in summary:
            vals = [r[metric] for r in report.records
                    if r["axis"] == s["axis"] and r["algorithm"] == s["algorithm"] and not r["error"]]
            v = np.asarray(vals, dtype=float)
            rows.append({"axis": s["axis"], "algorithm": s["algorithm"],
                         "mean": float(v.mean()) if v.size else float("nan"),
                         "std": float(v.std(ddof=1)) if v.size > 1 else 0.0, "n": int(v.size)})
        path = out / f"{name}_{metric}_vs_{spec.axis}.csv"
        _write_csv(path, PLOT_FIELDS, rows)
        paths.append(path)
    return paths
