import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dprice.dsera import DseraConfig, run_dsera
from d2dprice.game import closed_form_power
from d2dprice.model import qos_satisfied
from d2dprice.netgen import GenParams, NetworkInstance, generate
from d2dprice.oracle import exhaustive_small, grid_best_power, power_grid, verify_equilibrium
from d2dprice.pricing import PricingParams

# frozen from exhaustive_small(generate(GenParams(n_cues=2, m_d2d=3, rng_seed=s)), 16)
EXHAUSTIVE_N2_M3 = {0: (67.65548154362136, [1, 1, 1]), 1: (60.64715740824361, [1, 0, 1]),
                    2: (59.226020512472836, [0, 0, 0]), 3: (49.18673389819458, [2, 1, 1])}


def test_power_grid_shape():
    np.testing.assert_allclose(power_grid(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
    g = power_grid(1.0, 0.3)
    assert g[-1] == 1.0 and len(g) == 5
    with pytest.raises(ValueError):
        power_grid(1.0, 0.0)


def test_grid_best_power_examples():
    # unpriced utility is increasing: the cap wins
    assert grid_best_power(10.0, 0.0, 0.2, 1e-3) == 0.2
    # price above gamma/ln2 makes zero optimal
    assert grid_best_power(1.0, 10.0, 1.0, 1e-3) == 0.0


@given(st.floats(0.1, 1e4), st.floats(1e-3, 50.0), st.floats(0.01, 1.0))
def test_bisect_agrees_with_scan(gamma, q, p_max):
    step = p_max / 997
    a = grid_best_power(gamma, q, p_max, step, "scan")
    b = grid_best_power(gamma, q, p_max, step, "bisect")
    assert abs(a - b) <= step + 1e-15
    assert abs(a - closed_form_power(q, gamma, p_max)) <= step


def test_perturbed_power_is_detected():
    inst = generate(GenParams(n_cues=3, m_d2d=9, rng_seed=8))
    cfg = DseraConfig(max_outer_iters=1, repair_on_cap=False,
                      pricing=PricingParams(theta_init=100.0))
    out = run_dsera(inst, cfg)
    rep = verify_equilibrium(inst, out.alloc, out.prices)
    assert rep.n_players == 12
    bad = out.alloc.copy()
    bad.p_c[0] *= 0.3
    rep2 = verify_equilibrium(inst, bad, out.prices)
    assert rep2.max_improvement > 1e-3 and not rep2.is_equilibrium()
    assert rep2.worst.player.startswith(("c", "d"))


def test_exhaustive_without_pairs_uses_caps():
    inst = generate(GenParams(n_cues=2, m_d2d=0, rng_seed=0))
    r = exhaustive_small(inst, 16)
    assert r.feasible
    np.testing.assert_array_equal(r.alloc.p_c, inst.p_c_max)


def test_exhaustive_infeasible_instance():
    inst = NetworkInstance.from_positions(cue_xy=[[390.0, 0.0]], tx_xy=[[0.0, 10.0]],
                                          rx_xy=[[0.0, 30.0]], gamma_c_min=1e6, gamma_d_min=1.0)
    r = exhaustive_small(inst, 8)
    assert not r.feasible and r.alloc is None


@pytest.mark.parametrize("seed", sorted(EXHAUSTIVE_N2_M3))
def test_exhaustive_frozen_values(seed):
    inst = generate(GenParams(n_cues=2, m_d2d=3, rng_seed=seed))
    r = exhaustive_small(inst, 16)
    value, channel = EXHAUSTIVE_N2_M3[seed]
    assert r.value == pytest.approx(value, rel=1e-12)
    assert r.alloc.channel.tolist() == channel and qos_satisfied(inst, r.alloc)


def test_exhaustive_permutation_invariant():
    inst = generate(GenParams(n_cues=2, m_d2d=3, rng_seed=1))
    perm = [2, 0, 1]
    d = inst.to_dict()
    for key in ("h_d", "h_db", "gamma_d_min", "p_d_max"):
        d[key] = np.asarray(d[key])[perm].tolist()
    d["h_cd"] = np.asarray(d["h_cd"])[:, perm].tolist()
    d["h_dd"] = np.asarray(d["h_dd"])[np.ix_(perm, perm)].tolist()
    for key in ("tx_xy", "rx_xy"):
        if key in d and d[key] is not None:
            d[key] = np.asarray(d[key])[perm].tolist()
    other = NetworkInstance.from_dict(d)
    assert exhaustive_small(other, 8).value == pytest.approx(exhaustive_small(inst, 8).value,
                                                             rel=1e-12)


def test_exhaustive_guard():
    with pytest.raises(ValueError):
        exhaustive_small(generate(GenParams(n_cues=3, m_d2d=2, rng_seed=0)))
    with pytest.raises(ValueError):
        exhaustive_small(generate(GenParams(n_cues=2, m_d2d=5, rng_seed=0)))
