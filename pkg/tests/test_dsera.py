import json

import numpy as np
import pytest

from conftest import random_allocation
from d2dprice.dsera import DseraConfig, repair, run_dsera, run_scheme3, save_outcome
from d2dprice.model import qos_satisfied, sinr_cues, sinr_d2ds
from d2dprice.netgen import GenParams, NetworkInstance, generate
from d2dprice.pricing import PricingParams


def test_no_pairs_converges_in_one_round():
    inst = generate(GenParams(n_cues=3, m_d2d=0, rng_seed=1))
    out = run_dsera(inst)
    assert out.status == "satisfied" and out.outer_iters == 1 and out.qos_satisfied
    np.testing.assert_array_equal(out.alloc.p_c, inst.p_c_max)


def test_infeasible_cue_reported():
    inst = NetworkInstance.from_positions(cue_xy=[[390.0, 0.0]], tx_xy=[[0.0, 10.0]],
                                          rx_xy=[[0.0, 30.0]], gamma_c_min=1e6, gamma_d_min=1.0)
    out = run_dsera(inst)
    assert out.status == "infeasible" and not out.qos_satisfied


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("scheme", ["step_by_step", "whole"])
@pytest.mark.parametrize("skip", [True, False])
def test_compiled_loop_matches_python_loop(seed, scheme, skip):
    inst = generate(GenParams(n_cues=5, m_d2d=40, rng_seed=seed))
    kw = dict(price_scheme=scheme, skip_rule=skip, max_outer_iters=150)
    a = run_dsera(inst, DseraConfig(compiled=True, **kw))
    b = run_dsera(inst, DseraConfig(compiled=False, **kw))
    np.testing.assert_array_equal(a.alloc.channel, b.alloc.channel)
    np.testing.assert_array_equal(a.alloc.p_d, b.alloc.p_d)
    np.testing.assert_array_equal(a.prices.theta_dd, b.prices.theta_dd)
    assert (a.outer_iters, a.total_inner_iters, a.skips) == (b.outer_iters, b.total_inner_iters, b.skips)


@pytest.mark.parametrize("seed", range(6))
def test_outcome_is_qos_valid(seed):
    inst = generate(GenParams(n_cues=6, m_d2d=60, rng_seed=seed))
    for fn in (run_dsera, run_scheme3):
        out = fn(inst)
        assert out.qos_satisfied
        adm = out.alloc.channel < inst.n
        assert np.all(sinr_cues(inst, out.alloc) >= inst.gamma_c_min)
        assert np.all(sinr_d2ds(inst, out.alloc)[adm] >= inst.gamma_d_min[adm])
        out.alloc.validate(inst)
        assert out.sum_rate == pytest.approx(out.rates_c.sum() + out.rates_d[adm].sum())


def test_natural_termination_with_strong_pricing():
    inst = generate(GenParams(n_cues=6, m_d2d=24, rng_seed=3))
    cfg = DseraConfig(max_outer_iters=5000,
                      pricing=PricingParams(theta_init=1e4, lambda1=1.0, lambda2=0.1))
    out = run_dsera(inst, cfg)
    assert out.status == "satisfied" and out.repaired == 0 and out.converged


def test_cap_without_repair_may_violate():
    inst = generate(GenParams(rng_seed=2))
    out = run_dsera(inst, DseraConfig(max_outer_iters=3, repair_on_cap=False))
    assert out.status == "cap" and out.repaired == 0
    assert out.qos_satisfied == qos_satisfied(inst, out.alloc)


def test_repair_restores_feasibility(table1_inst):
    rng = np.random.default_rng(0)
    alloc = random_allocation(rng, table1_inst, admit_prob=0.9)
    alloc.p_c[:] = table1_inst.p_c_max
    assert not qos_satisfied(table1_inst, alloc)
    removed = repair(table1_inst, alloc)
    assert removed > 0 and qos_satisfied(table1_inst, alloc)


def test_trace_and_serialization(tmp_path):
    inst = generate(GenParams(n_cues=3, m_d2d=12, rng_seed=7))
    out = run_dsera(inst, DseraConfig(trace=True, max_outer_iters=20))
    assert out.trace and {"outer", "cue", "inner_iters", "sum_rate"} <= set(out.trace[0])
    out.write_trace_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().startswith("outer,cue")
    save_outcome(out, tmp_path / "o.json")
    d = json.loads((tmp_path / "o.json").read_text())
    assert d["algorithm"] == "dsera" and len(d["alloc"]["channel"]) == 12


def test_scheme3_uses_whole_updating():
    inst = generate(GenParams(n_cues=3, m_d2d=12, rng_seed=7))
    out = run_scheme3(inst, DseraConfig(price_scheme="step_by_step"))
    assert out.algorithm == "scheme3"


def test_config_roundtrip_and_validation():
    cfg = DseraConfig(max_outer_iters=7, pricing=PricingParams(lambda1=0.3))
    assert DseraConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        DseraConfig(epsilon_rel=0)
    with pytest.raises(ValueError):
        DseraConfig(max_inner_iters=0)
    with pytest.raises(ValueError):
        DseraConfig(price_scheme="sometimes")


def test_overwhelming_interference_leaves_pair_out():
    inst = NetworkInstance.from_positions(cue_xy=[[250.0, 0.0]], tx_xy=[[8.0, 6.0]],
                                          rx_xy=[[240.0, 10.0]], gamma_c_min=1e3, gamma_d_min=1e3)
    # 2-D grid over (p_c, p_d): no admitted point meets both targets
    pc = np.linspace(0, inst.p_c_max[0], 801)[:, None]
    pd = np.linspace(0, inst.p_d_max[0], 801)[None, :]
    ok_c = pc * inst.h_c[0] / (inst.noise + pd * inst.h_db[0]) >= inst.gamma_c_min[0]
    ok_d = pd * inst.h_d[0] / (inst.noise + pc * inst.h_cd[0, 0]) >= inst.gamma_d_min[0]
    assert not (ok_c & ok_d).any()
    out = run_dsera(inst)
    assert out.n_admitted == 0 and out.qos_satisfied


def test_scheme3_equals_dsera_without_pairs():
    inst = generate(GenParams(n_cues=4, m_d2d=0, rng_seed=9))
    a, b = run_dsera(inst), run_scheme3(inst)
    np.testing.assert_array_equal(a.alloc.p_c, b.alloc.p_c)
    assert a.sum_rate == b.sum_rate and a.outer_iters == b.outer_iters


def test_deterministic():
    inst = generate(GenParams(n_cues=4, m_d2d=20, rng_seed=12))
    a, b = run_dsera(inst), run_dsera(inst)
    assert a.sum_rate == b.sum_rate
    np.testing.assert_array_equal(a.alloc.channel, b.alloc.channel)
