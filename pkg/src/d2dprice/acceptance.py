"""The ten acceptance checks, shared by the test suite and ``d2dprice verify``.

Each ``check_*`` returns a :class:`CheckResult`; scale arguments default to the
full acceptance sizes and can be shrunk for a quick smoke run.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dsera import run_dsera
from .game import GameState, PriceVector, closed_form_power, run_to_fixed_point, utility
from .harness import ExperimentSpec, run_experiment
from .model import Allocation, sinr_cues, sinr_d2ds
from .netgen import GenParams, NetworkInstance, generate
from .oracle import exhaustive_small, grid_best_power, verify_equilibrium
from .pricing import PricingParams, RateSnapshot, step_update


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{tag}] {self.number:2d} {self.name}: {info} ({self.seconds:.1f}s)"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


@_timed
def check_closed_form(draws=10_000, seed=0, scan_subset=200, time_limit=10.0) -> CheckResult:
    """Closed form vs grid oracle (step p_max/1e5)."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    gam = _log_uniform(rng, 1e-6, 1e6, draws)
    q = _log_uniform(rng, 1e-3, 1e3, draws)
    q[rng.random(draws) < 0.05] = 0.0
    pmax = _log_uniform(rng, 1e-3, 1.0, draws)
    worst_steps, worst_util = 0.0, 0.0
    for k in range(draws):
        step = pmax[k] / 1e5
        pc = closed_form_power(q[k], gam[k], pmax[k])
        method = "scan" if k < scan_subset else "bisect"
        pg = grid_best_power(gam[k], q[k], pmax[k], step, method=method)
        worst_steps = max(worst_steps, abs(pc - pg) / step)
        # concave sequence: its maximum sits at the grid argmax
        worst_util = max(worst_util, float(utility(pg, gam[k], q[k]) - utility(pc, gam[k], q[k])))
    elapsed = time.perf_counter() - t0
    ok = worst_steps <= 1.0 and worst_util <= 1e-9 and elapsed < time_limit
    return CheckResult(1, "closed-form vs grid oracle", ok,
                       {"draws": draws, "max_dist_steps": worst_steps,
                        "max_grid_gain": worst_util, "runtime_s": elapsed})


@_timed
def check_concavity(cases=10_000, seed=1, slack=1e-12) -> CheckResult:
    """Second differences of the utility on random 3-point stencils."""
    rng = np.random.default_rng(seed)
    gam = _log_uniform(rng, 1e-6, 1e6, cases)
    q = rng.uniform(0, 1e3, cases)
    pmax = _log_uniform(rng, 1e-3, 1.0, cases)
    h = pmax * rng.uniform(1e-4, 0.5, cases)
    p = rng.uniform(h, pmax - h)
    d2 = utility(p - h, gam, q) - 2 * utility(p, gam, q) + utility(p + h, gam, q)
    bad = int(np.count_nonzero(d2 > slack))
    return CheckResult(2, "utility concavity", bad == 0,
                       {"cases": cases, "violations": bad, "max_second_diff": float(d2.max())})


@_timed
def check_equilibrium(instances=50, n=6, m=24, seed=0, grid_step=1e-3,
                      theta=100.0, tol=1e-6) -> CheckResult:
    """Fixed-price game fixed points admit no profitable unilateral deviation."""
    worst, unconverged = -np.inf, 0
    for s in range(instances):
        inst = generate(GenParams(n_cues=n, m_d2d=m, rng_seed=seed + s))
        st = GameState(inst, Allocation.empty(inst), PriceVector.uniform(n, m, theta))
        ok, _, _ = run_to_fixed_point(st, 1e-9, 1000)
        unconverged += not ok
        worst = max(worst, verify_equilibrium(inst, st.alloc, st.prices, grid_step).max_improvement)
    return CheckResult(3, "equilibrium (no profitable deviation)", worst < tol and unconverged == 0,
                       {"instances": instances, "max_improvement": float(worst),
                        "unconverged": unconverged})


def independent_qos_ok(inst: NetworkInstance, alloc: Allocation) -> bool:
    """Re-evaluate every SINR with the plain numpy path; exact comparisons."""
    g_c = sinr_cues(inst, alloc)
    g_d = sinr_d2ds(inst, alloc)
    adm = alloc.channel < inst.n
    return bool(np.all(g_c >= inst.gamma_c_min) and np.all(g_d[adm] >= inst.gamma_d_min[adm]))


@_timed
def check_qos_guarantee(drops=500, seed=0, others_drops=50) -> CheckResult:
    """Every run claiming QoS passes an independent re-evaluation."""
    from .baselines import ALGORITHMS, get_algorithm

    claimed = failed = 0
    for d in range(drops):
        inst = generate(GenParams(rng_seed=seed + d))
        algs = ALGORITHMS if d < others_drops else ("dsera",)
        for a in algs:
            out = get_algorithm(a)(inst)
            if out.qos_satisfied:
                claimed += 1
                failed += not independent_qos_ok(inst, out.alloc)
    return CheckResult(4, "QoS guarantee re-evaluation", failed == 0 and claimed > 0,
                       {"drops": drops, "runs_claiming_qos": claimed, "failures": failed})


@_timed
def check_tiny_gap(fixtures=20, seed=0, grid=16, floor=0.7) -> CheckResult:
    """DSERA against the exhaustive optimum on N=2, M=3 fixtures."""
    ratios, infeasible = [], 0
    for s in range(fixtures):
        inst = generate(GenParams(n_cues=2, m_d2d=3, rng_seed=seed + s))
        ex = exhaustive_small(inst, grid)
        out = run_dsera(inst)
        infeasible += not independent_qos_ok(inst, out.alloc)
        ratios.append(out.sum_rate / ex.value)
    r = np.array(ratios)
    return CheckResult(5, "tiny-instance optimality gap", bool(r.min() >= floor and infeasible == 0),
                       {"fixtures": fixtures, "min_ratio": float(r.min()),
                        "median_ratio": float(np.median(r)), "max_ratio": float(r.max()),
                        "infeasible": infeasible})


def paired_greater(a, b) -> float:
    """One-sided paired t-test p-value for mean(a) > mean(b)."""
    return float(stats.ttest_rel(a, b, alternative="greater").pvalue)


@_timed
def check_ordering(drops=100, seed=0, alpha=0.05, time_limit=600.0) -> CheckResult:
    """DSERA > Scheme3 > Scheme2 > Scheme1 on paired drops at N=10, M/N=20."""
    algs = ("dsera", "scheme3", "scheme2", "scheme1")
    t0 = time.perf_counter()
    rep = run_experiment(ExperimentSpec(algorithms=algs, axis="density", values=(20,),
                                        drops=drops, base_seed=seed), write=False)
    elapsed = time.perf_counter() - t0
    v = {a: rep.values(a) for a in algs}
    pvals = [paired_greater(v[a], v[b]) for a, b in zip(algs, algs[1:])]
    means = [float(v[a].mean()) for a in algs]
    ok = all(p < alpha for p in pvals) and elapsed < time_limit
    return CheckResult(6, "ordering dsera>scheme3>scheme2>scheme1", ok,
                       {"means": means, "p_values": pvals, "runtime_s": elapsed})


@_timed
def check_baselines(drops=100, seed=0) -> CheckResult:
    """3Step and DenseCell relative to DSERA at N=10, M/N=20."""
    rep = run_experiment(ExperimentSpec(algorithms=("dsera", "3step", "densecell"),
                                        axis="density", values=(20,), drops=drops,
                                        base_seed=seed), write=False)
    sr = {a: rep.mean(a) for a in ("dsera", "3step", "densecell")}
    av = {a: rep.mean(a, "average_rate") for a in ("dsera", "3step")}
    frac = sr["densecell"] / sr["dsera"]
    ok = sr["3step"] < sr["dsera"] and av["3step"] > av["dsera"] and 0.85 <= frac <= 1.0
    return CheckResult(7, "3step / densecell vs dsera", ok,
                       {"sum_rate": [sr["dsera"], sr["3step"], sr["densecell"]],
                        "avg_rate_3step": av["3step"], "avg_rate_dsera": av["dsera"],
                        "densecell_fraction": frac})


@_timed
def check_trends(drops=100, seed=0, rho_min=0.9) -> CheckResult:
    """Sum rate rises with N; average rate does not rise with density."""
    ns = (6, 8, 10, 12, 14, 16)
    rep_n = run_experiment(ExperimentSpec(algorithms=("dsera",), axis="n_cues", values=ns,
                                          drops=drops, base_seed=seed), write=False)
    sr = [rep_n.mean("dsera", axis=v) for v in ns]
    rho = float(stats.spearmanr(ns, sr)[0])
    dens = (4, 8, 12, 16, 20)
    rep_d = run_experiment(ExperimentSpec(algorithms=("dsera",), axis="density", values=dens,
                                          drops=drops, base_seed=seed), write=False)
    av = [rep_d.mean("dsera", "average_rate", axis=v) for v in dens]
    nonincreasing = bool(np.all(np.diff(av) <= 0))
    return CheckResult(8, "trends vs N and density", rho > rho_min and nonincreasing,
                       {"sum_rate_vs_N": sr, "spearman_rho": rho,
                        "avg_rate_vs_density": av, "nonincreasing": nonincreasing})


@_timed
def check_scaling(ms=(40, 80, 120, 160, 200), drops=5, seed=0, n=10,
                  b_range=(1.5, 2.5), single_limit=5.0) -> CheckResult:
    """Wall time per drop fits a*M^b with b in range; M=200 drop under the limit."""
    run_dsera(generate(GenParams(n_cues=n, m_d2d=ms[0], rng_seed=seed)))  # compile
    med, worst_last = [], 0.0
    for m in ms:
        ts = [run_dsera(generate(GenParams(n_cues=n, m_d2d=m, rng_seed=seed + d))).wall_time
              for d in range(drops)]
        med.append(float(np.median(ts)))
        worst_last = max(ts)
    b, _ = np.polyfit(np.log(ms), np.log(med), 1)
    ok = b_range[0] <= b <= b_range[1] and worst_last < single_limit
    return CheckResult(9, "complexity scaling", bool(ok),
                       {"exponent_b": float(b), "median_times": med,
                        f"max_time_M{ms[-1]}": worst_last})


def _random_state(rng):
    n = int(rng.integers(1, 9))
    m = int(rng.integers(0, 31))
    ch = rng.integers(0, n + 1, m)
    alloc = Allocation(rng.uniform(0, 0.25, n), np.where(ch < n, rng.uniform(0, 0.13, m), 0.0), ch)
    prices = PriceVector(_log_uniform(rng, 1e-3, 1e3, (n, m)), _log_uniform(rng, 1e-3, 1e3, m),
                         _log_uniform(rng, 1e-3, 1e3, (m, m)))
    return n, m, alloc, prices


@_timed
def check_locality(states=1000, seed=0) -> CheckResult:
    """step_update on CUE i touches only entries tied to channel i (bitwise)."""
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(states):
        n, m, alloc, prices = _random_state(rng)
        params = PricingParams(lambda1=float(rng.uniform(0.01, 1)),
                               lambda2=float(rng.uniform(0.01, 0.9)), zeta=float(rng.uniform(0, 1)))
        inst = generate(GenParams(n_cues=n, m_d2d=m, rng_seed=int(rng.integers(1 << 31))))
        snap = RateSnapshot.take(inst, alloc, params)
        i = int(rng.integers(n))
        new = prices.copy()
        step_update(new, snap, i, params)
        on = alloc.channel == i
        allowed_cd = np.zeros((n, m), bool)
        allowed_cd[i, on] = True
        allowed_dd = on[:, None] & on[None, :]
        for old, upd, allowed in ((prices.theta_cd, new.theta_cd, allowed_cd),
                                  (prices.theta_d, new.theta_d, on),
                                  (prices.theta_dd, new.theta_dd, allowed_dd)):
            changed = old.view(np.uint64) != upd.view(np.uint64)
            violations += int(np.count_nonzero(changed & ~allowed))
    return CheckResult(10, "pricing locality", violations == 0,
                       {"states": states, "violations": violations})


CHECKS = (check_closed_form, check_concavity, check_equilibrium, check_qos_guarantee,
          check_tiny_gap, check_ordering, check_baselines, check_trends, check_scaling,
          check_locality)

# reduced sizes for a smoke run of the whole suite
QUICK = {
    1: dict(draws=1000), 2: dict(cases=2000), 3: dict(instances=10), 4: dict(drops=40, others_drops=5),
    5: dict(fixtures=5), 6: dict(drops=15), 7: dict(drops=15), 8: dict(drops=8),
    9: dict(drops=2), 10: dict(states=200),
}


def run_all(quick: bool = False, only=None, report=print) -> list:
    results = []
    for k, fn in enumerate(CHECKS, start=1):
        if only and k not in only:
            continue
        res = fn(**(QUICK[k] if quick else {}))
        results.append(res)
        if report:
            report(res.line())
    return results
