import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dprice.baselines import (ALGORITHMS, get_algorithm, max_weight_matching, pair_weights,
                                run_3step, run_densecell, run_scheme1, run_scheme2)
from d2dprice.dsera import DseraConfig
from d2dprice.model import qos_satisfied, sinr_cues, sinr_d2ds, sum_rate
from d2dprice.netgen import GenParams, NetworkInstance, generate
from d2dprice.pricing import PricingParams


def brute_matching(g):
    n, m = g.shape
    best = 0.0
    for cols in itertools.product(range(-1, m), repeat=n):
        used = [c for c in cols if c >= 0]
        if len(used) != len(set(used)):
            continue
        v = sum(g[r, c] for r, c in enumerate(cols) if c >= 0 and np.isfinite(g[r, c]) and g[r, c] > 0)
        best = max(best, v)
    return best


@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_matching_matches_brute_force(n, m, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, m))
    g[rng.random((n, m)) < 0.2] = -np.inf
    pairs, total = max_weight_matching(g)
    assert len({r for r, _ in pairs}) == len(pairs) == len({c for _, c in pairs})
    assert total == pytest.approx(brute_matching(g), abs=1e-12)


def test_matching_empty_cases():
    assert max_weight_matching(np.full((3, 4), -np.inf)) == ([], 0.0)
    assert max_weight_matching(np.zeros((0, 0))) == ([], 0.0)


def test_pair_weight_matches_grid_oracle():
    inst = NetworkInstance.from_positions(cue_xy=[[150.0, 60.0]], tx_xy=[[-120.0, 80.0]],
                                          rx_xy=[[-110.0, 95.0]], gamma_c_min=1.0, gamma_d_min=1.0)
    w, pc, pd = pair_weights(inst)
    g_c = np.linspace(0, inst.p_c_max[0], 1501)[:, None]
    g_d = np.linspace(0, inst.p_d_max[0], 1501)[None, :]
    s_c = g_c * inst.h_c[0] / (inst.noise + g_d * inst.h_db[0])
    s_d = g_d * inst.h_d[0] / (inst.noise + g_c * inst.h_cd[0, 0])
    ok = (s_c >= inst.gamma_c_min[0]) & (s_d >= inst.gamma_d_min[0])
    grid = np.where(ok, np.log2(1 + s_c) + np.log2(1 + s_d), -np.inf).max()
    assert np.isfinite(w[0, 0]) and w[0, 0] >= grid - 1e-6
    assert w[0, 0] <= grid + 1e-2


def test_infeasible_pairs_get_no_weight():
    inst = NetworkInstance.from_positions(cue_xy=[[20.0, 0.0]], tx_xy=[[0.0, 300.0]],
                                          rx_xy=[[0.0, 340.0]], gamma_c_min=1.0, gamma_d_min=1e12)
    w, _, _ = pair_weights(inst)
    assert np.all(w == -np.inf)
    out = run_3step(inst)
    assert out.n_admitted == 0 and out.qos_satisfied


@pytest.mark.parametrize("seed", range(5))
def test_3step_one_pair_per_channel(seed):
    inst = generate(GenParams(n_cues=5, m_d2d=30, rng_seed=seed))
    out = run_3step(inst)
    ch = out.alloc.channel[out.alloc.channel < inst.n]
    assert len(ch) == len(set(ch.tolist()))
    assert out.qos_satisfied
    assert out.sum_rate == pytest.approx(sum_rate(inst, out.alloc), rel=1e-12)


def test_densecell_without_pairs_is_noop():
    inst = generate(GenParams(n_cues=3, m_d2d=0, rng_seed=4))
    out = run_densecell(inst)
    np.testing.assert_array_equal(out.alloc.p_c, inst.p_c_max)
    assert out.n_admitted == 0 and out.qos_satisfied


def test_densecell_admits_single_feasible_pair():
    inst = NetworkInstance.from_positions(cue_xy=[[150.0, 60.0]], tx_xy=[[-120.0, 80.0]],
                                          rx_xy=[[-110.0, 95.0]], gamma_c_min=1.0, gamma_d_min=1.0)
    out = run_densecell(inst)
    assert out.n_admitted == 1 and out.qos_satisfied


def test_scheme1_high_prices_drop_pairs():
    inst = generate(GenParams(n_cues=4, m_d2d=20, rng_seed=2))
    cfg = DseraConfig(pricing=PricingParams(theta_init=1e16))
    out = run_scheme1(inst, cfg)
    assert out.n_admitted == 0 and out.qos_satisfied


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("alg", ALGORITHMS)
def test_every_algorithm_is_qos_valid(seed, alg):
    inst = generate(GenParams(n_cues=6, m_d2d=48, rng_seed=100 + seed))
    out = get_algorithm(alg)(inst, DseraConfig())
    assert out.algorithm == alg and out.qos_satisfied
    adm = out.alloc.channel < inst.n
    assert np.all(sinr_cues(inst, out.alloc) >= inst.gamma_c_min)
    assert np.all(sinr_d2ds(inst, out.alloc)[adm] >= inst.gamma_d_min[adm])
    assert np.all(out.alloc.p_d <= inst.p_d_max) and np.all(out.alloc.p_c <= inst.p_c_max)


def test_scheme2_runs_and_unknown_name_raises():
    inst = generate(GenParams(n_cues=3, m_d2d=9, rng_seed=1))
    assert run_scheme2(inst).qos_satisfied
    with pytest.raises(ValueError):
        get_algorithm("nope")
