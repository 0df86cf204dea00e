import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dprice.netgen import (GenParams, NetworkInstance, db_to_linear, dbm_to_watt,
                             gamma_min_from_rate, generate, link_gain, load_gen_params,
                             pathloss_db, rate_from_gamma)


def test_unit_conversions():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(24.0) == pytest.approx(0.251188643)
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert gamma_min_from_rate(1.0) == pytest.approx(1.0)
    assert rate_from_gamma(3.0) == pytest.approx(2.0)


@given(st.floats(0.0, 20.0))
def test_rate_gamma_roundtrip(r):
    assert rate_from_gamma(gamma_min_from_rate(r)) == pytest.approx(r, abs=1e-9)


def test_pathloss_model():
    # 15.3 + 37.6 log10(100) = 90.5 dB
    assert pathloss_db(100.0) == pytest.approx(90.5)
    assert link_gain(100.0) == pytest.approx(10 ** -9.05)
    assert link_gain(100.0, shadow_db=3.0) == pytest.approx(10 ** -9.35)
    # distances below one metre are clipped
    assert pathloss_db(0.01) == pathloss_db(1.0)


def test_generate_shapes_and_ranges():
    p = GenParams(n_cues=5, m_d2d=30, rng_seed=2)
    inst = generate(p)
    n, m = 5, 30
    assert (inst.n, inst.m) == (n, m)
    assert inst.h_cd.shape == (n, m) and inst.h_dd.shape == (m, m)
    assert np.all(np.hypot(*inst.cue_xy.T) <= p.cell_radius_m)
    assert np.all(np.hypot(*inst.d2d_rx_xy.T) <= p.cell_radius_m)
    lo, hi = p.d2d_cluster_radius_range_m
    assert np.all(inst.s_d <= hi)
    assert np.all((10 * np.log10(inst.gamma_d_min) >= 0) & (10 * np.log10(inst.gamma_d_min) <= 10))
    np.testing.assert_array_equal(np.diag(inst.h_dd), inst.h_d)
    assert inst.cue_solo_feasible().all()
    np.testing.assert_allclose(inst.r_c_min, np.log2(1 + inst.gamma_c_min))


def test_generate_is_deterministic_and_seed_sensitive():
    a = generate(GenParams(n_cues=3, m_d2d=7, rng_seed=9))
    b = generate(GenParams(n_cues=3, m_d2d=7, rng_seed=9))
    c = generate(GenParams(n_cues=3, m_d2d=7, rng_seed=10))
    assert a.to_json() == b.to_json()
    assert a.to_json() != c.to_json()


def test_reciprocal_cross_shadowing():
    inst = generate(GenParams(n_cues=2, m_d2d=20, rng_seed=4))
    pl = 10 ** (-pathloss_db(inst.s_dd) / 10)
    shadow = -10 * np.log10(inst.h_dd / pl)
    off = ~np.eye(20, dtype=bool)
    np.testing.assert_allclose(shadow[off], shadow.T[off], atol=1e-9)
    indep = generate(GenParams(n_cues=2, m_d2d=20, rng_seed=4, reciprocal_dd_shadowing=False))
    s2 = -10 * np.log10(indep.h_dd / pl)
    assert not np.allclose(s2[off], s2.T[off])


def test_zero_pairs():
    inst = generate(GenParams(n_cues=3, m_d2d=0))
    assert inst.m == 0 and inst.h_cd.shape == (3, 0)


def test_arrays_are_read_only(small_inst):
    with pytest.raises(ValueError):
        small_inst.h_c[0] = 1.0


def test_serialization_roundtrip(tmp_path, small_inst):
    path = tmp_path / "inst.json"
    small_inst.save(path)
    back = NetworkInstance.load(path)
    assert back.to_json() == small_inst.to_json()
    with pytest.raises(ValueError):
        NetworkInstance.from_dict({"schema": "other"})


def test_from_positions_hand_values(line_inst):
    assert line_inst.s_c[0] == pytest.approx(100.0)
    assert line_inst.s_d == pytest.approx([20.0, 30.0])
    assert line_inst.s_dd[0, 1] == pytest.approx(430.0)  # Tx0 (0,200) -> Rx1 (0,-230)
    assert line_inst.h_c[0] == pytest.approx(10 ** -9.05)
    assert line_inst.s_cd[0, 0] == pytest.approx(np.hypot(100, 220))


@pytest.mark.parametrize("bad", [dict(n_cues=0), dict(m_d2d=-1), dict(qos_db_range=(5, 1)),
                                 dict(d2d_cluster_radius_range_m=(10, 500)),
                                 dict(shadow_std_db=-1)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        GenParams(**bad)


def test_load_gen_params(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("network:\n  n_cues: 7\n  m_d2d: 21\n")
    p = load_gen_params(f)
    assert (p.n_cues, p.m_d2d) == (7, 21)
    f.write_text("bogus: 1\n")
    with pytest.raises(ValueError):
        load_gen_params(f)
