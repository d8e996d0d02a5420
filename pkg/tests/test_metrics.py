import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfswipt.metrics import (
    Allocation,
    EhModel,
    evaluate,
    evaluate_benchmark3,
    harvested_energy_phi,
    inverse_logistic_f,
    logistic_psi,
    q_closed_form,
    received_energy_terms,
    se_per_iu,
    sinr_closed_form,
)
from cfswipt.network import NetworkRealization, generate_network
from cfswipt.params import SystemParams


def _toy():
    """Two APs, one IU, one EU; unit noise so every term can be done by hand."""
    p = SystemParams(M=2, N=4, K_d=1, L=1, tau_c=50, noise_power=1.0, p_pilot=1.0, he_targets=0.0)
    z = np.zeros((2, 2))
    net = NetworkRealization(z, z[:1], z[:1], seed=0, area_side=1.0,
                             beta_iu=np.array([[2.0], [2.0]]), gamma_iu=np.array([[1.0], [1.0]]),
                             beta_eu=np.array([[3.0], [3.0]]), gamma_eu=np.array([[2.0], [2.0]]))
    alloc = Allocation([1.0, 0.0], [[1.0], [0.0]], [[0.0], [1.0]])
    return p, net, alloc


def test_hand_sinr_and_se():
    p, net, alloc = _toy()
    # numerator (N-K) * 1 = 3; denominator 1 + 1 (info leakage) + 1 (energy leakage)
    assert sinr_closed_form(alloc, net, p)[0] == pytest.approx(1.0)
    assert se_per_iu([1.0], p)[0] == pytest.approx(0.96)


def test_hand_received_energy():
    p, net, alloc = _toy()
    # 1 + (N-K+1) * gamma + beta (info AP) = 1 + 8 + 3
    assert received_energy_terms(alloc, net, p)[0] == pytest.approx(12.0)
    assert q_closed_form(alloc, net, p)[0] == pytest.approx(48 * 12.0)


def test_hand_received_energy_two_eus():
    p = SystemParams(M=1, N=4, K_d=1, L=2, tau_c=50, noise_power=1.0, p_pilot=1.0, he_targets=0.0)
    z = np.zeros((1, 2))
    net = NetworkRealization(z, z, np.zeros((2, 2)), 0, 1.0, beta_iu=np.ones((1, 1)), gamma_iu=np.ones((1, 1)),
                             beta_eu=np.array([[2.0, 3.0]]), gamma_eu=np.array([[1.0, 1.0]]))
    alloc = Allocation([0.0], [[0.0]], [[0.5, 0.5]])
    # EU 0: 1 + 4 * 0.5 * 1 + 0.5 * 2 (beam of EU 1) = 4; EU 1: 1 + 2 + 0.5 * 3 = 4.5
    assert np.allclose(received_energy_terms(alloc, net, p), [4.0, 4.5])


def test_omega_value():
    m = EhModel(150.0, 0.014, 0.024)
    assert m.omega == pytest.approx(1 / (1 + np.exp(2.1)))
    assert m.omega == pytest.approx(0.1091, abs=1e-4)


def test_harvest_zero_at_zero_and_saturates():
    m = EhModel(150.0, 0.014, 0.024)
    assert harvested_energy_phi(0.0, m) == 0.0
    assert harvested_energy_phi(10.0, m) == pytest.approx(m.phi, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_harvest_monotone(q1, q2):
    m = EhModel(150.0, 0.014, 0.024)
    lo, hi = sorted((q1, q2))
    assert harvested_energy_phi(lo, m) <= harvested_energy_phi(hi, m)
    assert 0.0 <= harvested_energy_phi(hi, m) <= m.phi


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.05, 0.1))
def test_inverse_logistic_round_trip(q):
    m = EhModel(150.0, 0.014, 0.024)
    psi = logistic_psi(q, m)
    assert inverse_logistic_f(psi, m) == pytest.approx(q, abs=1e-10)


def test_harvest_matches_definition_away_from_zero():
    m = EhModel(150.0, 0.014, 0.024)
    q = np.array([1e-3, 0.01, 0.03])
    ref = (logistic_psi(q, m) - m.phi * m.omega) / (1 - m.omega)
    assert np.allclose(harvested_energy_phi(q, m), ref, rtol=1e-10)


def test_inverse_logistic_domain():
    m = EhModel(150.0, 0.014, 0.024)
    with pytest.raises(ValueError):
        inverse_logistic_f(0.0, m)
    with pytest.raises(ValueError):
        inverse_logistic_f(m.phi, m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_more_energy_power_never_lowers_q(seed, frac):
    p = SystemParams(M=4, K_d=2, L=2)
    net = generate_network(p, seed)
    a = np.array([1.0, 1.0, 0.0, 0.0])
    base = Allocation(a, np.outer(a, [0.5, 0.5]), np.outer(1 - a, [frac / 2, frac / 2]))
    full = Allocation(a, np.outer(a, [0.5, 0.5]), np.outer(1 - a, [0.5, 0.5]))
    assert np.all(q_closed_form(full, net, p) >= q_closed_form(base, net, p))


def test_negative_power_rejected():
    p, net, _ = _toy()
    with pytest.raises(ValueError):
        sinr_closed_form(Allocation([1.0, 0.0], [[-0.1], [0.0]], [[0.0], [1.0]]), net, p)


def test_power_violation():
    ok = Allocation([1.0, 0.0], [[0.6], [0.0]], [[0.0], [1.0]])
    bad = Allocation([1.0, 0.0], [[1.2], [0.0]], [[0.0], [1.0]])
    assert ok.is_valid() and ok.is_binary
    assert bad.power_violation() == pytest.approx(0.2)


def test_he_feasibility_is_relative():
    p, net, alloc = _toy()
    phi = evaluate(alloc, net, p).phi_per_eu[0]
    tight = p.replace(he_targets=phi * (1 + 0.5e-6))
    loose = p.replace(he_targets=phi * (1 + 2e-6))
    assert evaluate(alloc, net, tight).feasible_he[0]
    assert not evaluate(alloc, net, loose).feasible_he[0]


def test_se_feasibility_absolute():
    p, net, alloc = _toy()
    assert evaluate(alloc, net, p.replace(se_target=0.96 + 5e-7)).feasible_se[0]
    assert not evaluate(alloc, net, p.replace(se_target=0.96 + 2e-6)).feasible_se[0]


def test_benchmark3_halves_time_and_uses_full_array():
    p, net, _ = _toy()
    eta_i = np.array([[0.5], [0.5]])
    eta_e = np.array([[1.0], [1.0]])
    r = evaluate_benchmark3(eta_i, eta_e, net, p)
    # info: 3 * (2 sqrt(0.5))^2 / (1 + 1) = 3; energy: 1 + (N+1) * 2 * 2 = 21
    assert r.se_per_iu[0] == pytest.approx(0.5 * 0.96 * 2.0)
    assert r.q_per_eu[0] == pytest.approx(0.5 * 48 * 21.0)
