import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfswipt.network import (
    NetworkRealization,
    draw_shadowing,
    generate_network,
    generate_topology,
    mmse_variance,
    path_loss_db,
    torus_distance,
)
from cfswipt.params import NOISE_POWER_W, SystemParams, dbm_to_watt


def test_noise_power_is_minus_92_dbm():
    assert NOISE_POWER_W == pytest.approx(10 ** (-9.2) * 1e-3, rel=1e-12)
    assert dbm_to_watt(30.0) == pytest.approx(1.0)


def test_path_loss_reference_points():
    assert path_loss_db(1.0) == pytest.approx(-30.5)
    assert path_loss_db(10.0) == pytest.approx(-67.2)
    assert path_loss_db(100.0) == pytest.approx(-103.9)
    # below the reference distance the loss is clamped
    assert path_loss_db(0.01) == pytest.approx(-30.5)


def test_torus_wraps_around():
    side = 500.0
    d = torus_distance([[1.0, 1.0]], [[499.0, 499.0]], side)
    assert d[0, 0] == pytest.approx(np.sqrt(8.0))
    d = torus_distance([[0.0, 0.0]], [[250.0, 0.0]], side)
    assert d[0, 0] == pytest.approx(250.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 499.999), min_size=4, max_size=4))
def test_torus_distance_is_symmetric_and_bounded(xy):
    p, q = np.array([xy[:2]]), np.array([xy[2:]])
    d = torus_distance(p, q, 500.0)[0, 0]
    assert d == pytest.approx(torus_distance(q, p, 500.0)[0, 0])
    assert 0.0 <= d <= 250.0 * np.sqrt(2.0) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-16, 1e-3), st.integers(1, 20))
def test_mmse_variance_between_zero_and_beta(beta, tau):
    rho_t = 0.2 / NOISE_POWER_W
    g = mmse_variance(beta, tau, rho_t)
    assert 0.0 < g <= beta
    assert g == pytest.approx(tau * rho_t * beta**2 / (tau * rho_t * beta + 1.0), rel=1e-12)


def test_drop_shapes_and_ranges():
    p = SystemParams(M=7, K_d=3, L=4)
    net = generate_network(p, 3)
    assert net.beta_iu.shape == (7, 3) and net.beta_eu.shape == (7, 4)
    assert np.all(net.gamma_iu <= net.beta_iu) and np.all(net.gamma_iu > 0)
    for pts in (net.ap_positions, net.iu_positions, net.eu_positions):
        assert np.all((pts >= 0) & (pts < p.area_side))


def test_drop_is_deterministic_in_seed():
    p = SystemParams(M=5, K_d=2, L=2)
    a, b, c = generate_network(p, 9), generate_network(p, 9), generate_network(p, 10)
    assert np.array_equal(a.beta_eu, b.beta_eu)
    assert not np.array_equal(a.beta_eu, c.beta_eu)


def test_beta_matches_path_loss_without_shadowing():
    p = SystemParams(M=4, K_d=2, L=2, shadow_sigma_db=0.0)
    net = generate_network(p, 1)
    d = torus_distance(net.ap_positions, net.ue_positions, p.area_side)
    expected = 10 ** (path_loss_db(d) / 10)
    assert np.allclose(np.hstack([net.beta_iu, net.beta_eu]), expected, rtol=1e-12)


def test_independent_shadowing_statistics():
    p = SystemParams(M=200, K_d=3, L=5)
    f = draw_shadowing(generate_topology(p, 0), p, 0)
    assert abs(f.std() - 4.0) < 0.15
    assert abs(f.mean()) < 0.15


def test_correlated_shadowing_has_unit_structure():
    p = SystemParams(M=30, K_d=3, L=5, shadow_mode="correlated")
    f = draw_shadowing(generate_topology(p, 0), p, 0)
    assert f.shape == (30, 8)
    # the AP component is shared across a row, so rows differ by a constant plus the UE field
    row_diff = f[0] - f[1]
    assert np.allclose(row_diff, row_diff[0])


def test_perfect_csi_copy():
    net = generate_network(SystemParams(M=4, K_d=2, L=2), 0)
    pc = net.with_perfect_csi()
    assert np.array_equal(pc.gamma_iu, net.beta_iu)
    assert not np.array_equal(net.gamma_iu, net.beta_iu)


def test_json_round_trip(tmp_path):
    net = generate_network(SystemParams(M=4, K_d=2, L=2), 5)
    net.save(tmp_path / "net.json")
    back = NetworkRealization.load(tmp_path / "net.json")
    assert np.array_equal(back.gamma_eu, net.gamma_eu)
    assert back.seed == 5


@pytest.mark.parametrize("bad", [dict(N=3, K_d=3), dict(tau=2), dict(tau_c=8), dict(p_ap=-1.0),
                                 dict(he_targets=(1e-6,)), dict(shadow_mode="nope")])
def test_invalid_params_rejected(bad):
    with pytest.raises(ValueError):
        SystemParams(**bad)


def test_replace_tracks_pilot_length_and_targets():
    p = SystemParams(K_d=3, L=5, he_targets=1e-9).replace(L=2)
    assert p.tau == 5 and p.he_targets == (1e-9, 1e-9)
